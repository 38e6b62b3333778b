use crate::neuron::{
    genome_len, Matrix, NetworkSpec, Property, Trajectory, CURRENT_UNIT, DEFAULT_R_MEM,
};

use super::{check_trajectory, presynaptic, GradError, GradMode, Surrogate};

/// Gradient of a loss with respect to the trainable neuron properties (genome
/// layout, see [`crate::neuron::genome_pack`]) and the weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub genome: Vec<f64>,
    /// Same shapes as `NetworkSpec::weights`. Left at zero for the first layer
    /// when the trajectory carries no external input.
    pub weights: Vec<Matrix>,
}

impl Gradients {
    pub(crate) fn zeros(net: &NetworkSpec) -> Self {
        Self {
            genome: vec![0.0; genome_len(net)],
            weights: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
        }
    }

    pub fn weights_flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flat_map(|w| w.as_slice().iter().copied())
            .collect()
    }

    pub(crate) fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.genome.iter_mut().zip(&other.genome) {
            *a += scale * b;
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += scale * y;
            }
        }
    }
}

/// Packs per-neuron, per-property gradients `[layer][neuron][property]` into genome layout.
pub(crate) fn pack_property_grads(net: &NetworkSpec, grads: &[Vec<[f64; 4]>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(genome_len(net));
    for layer in grads {
        for prop in net.trainable.properties() {
            out.extend(layer.iter().map(|g| g[prop.index()]));
        }
    }
    out
}

/// Single reverse sweep over a recorded trajectory.
///
/// `loss_grads[t]` is `dl/dv` of the output layer at step `t` (any averaging
/// over steps is the caller's responsibility). Neurons start from their
/// resting potential, so the initial state contributes to the `v_rest`
/// gradient.
pub fn backward(
    net: &NetworkSpec,
    traj: &Trajectory,
    loss_grads: &[Vec<f64>],
    surrogate: &Surrogate,
    mode: GradMode,
) -> Result<Gradients, GradError> {
    check_trajectory(net, traj, loss_grads)?;
    let layers = net.num_layers();
    let sizes = &net.layer_sizes[1..];

    let mut prop_grads: Vec<Vec<[f64; 4]>> = sizes.iter().map(|&n| vec![[0.0; 4]; n]).collect();
    let mut weight_grads: Vec<Matrix> = net
        .weights
        .iter()
        .map(|w| Matrix::zeros(w.rows(), w.cols()))
        .collect();
    // adjoint of v(t) carried back from step t + 1
    let mut carry: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();

    let (tau, vth, vrest, res) = (
        Property::TauM.index(),
        Property::VTh.index(),
        Property::VRest.index(),
        Property::RMem.index(),
    );

    for t in (0..traj.len()).rev() {
        let step = &traj.steps[t];
        // adjoint of each layer's spikes, accumulated from the layer above
        let mut spike_adj: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
        for l in (0..layers).rev() {
            let rec = &step.layers[l];
            let params = &net.params[l];
            let spiking = net.layer_spiking(l);
            let v_prev = traj.v_before(t, l);
            let pre = presynaptic(net, traj, t, l);
            let mut current_adj = vec![0.0; sizes[l]];

            for i in 0..sizes[l] {
                let p = &params[i];
                let k = p.decay();
                let u = rec.u[i];
                let s = if rec.s[i] { 1.0 } else { 0.0 };

                let mut gv = carry[l][i];
                if l + 1 == layers {
                    gv += loss_grads[t][i];
                }

                // v = u (1 - s) + v_rest s
                let mut gu = gv * (1.0 - s);
                let mut gs = spike_adj[l][i];
                if mode == GradMode::Full {
                    gs += gv * (p.v_rest - u);
                }
                prop_grads[l][i][vrest] += gv * s;

                // s = H(u - v_th)
                if spiking {
                    let g = surrogate.derivative(u - p.v_th, p.v_th);
                    gu += gs * g;
                    prop_grads[l][i][vth] -= gs * g;
                }

                // u = v_prev + k (R I - v_prev + v_rest)
                let current = rec.current[i];
                let drive = p.r_mem() * current;
                let gk = gu * (drive - v_prev[i] + p.v_rest);
                prop_grads[l][i][tau] += gk * k * (1.0 - k);
                prop_grads[l][i][res] += gu * k * current * DEFAULT_R_MEM;
                prop_grads[l][i][vrest] += gu * k;
                carry[l][i] = gu * (1.0 - k);
                current_adj[i] = gu * k * p.r_mem();
            }

            // I = CURRENT_UNIT * W x
            let w = &net.weights[l];
            for i in 0..sizes[l] {
                let gc = current_adj[i] * CURRENT_UNIT;
                if gc == 0.0 {
                    continue;
                }
                if !pre.is_empty() {
                    for (gw, x) in weight_grads[l].row_mut(i).iter_mut().zip(&pre) {
                        *gw += gc * x;
                    }
                }
                if l > 0 {
                    for (ga, wij) in spike_adj[l - 1].iter_mut().zip(w.row(i)) {
                        *ga += gc * wij;
                    }
                }
            }
        }
    }

    // initial state v(-1) = v_rest
    for l in 0..layers {
        for i in 0..sizes[l] {
            prop_grads[l][i][vrest] += carry[l][i];
        }
    }

    Ok(Gradients {
        genome: pack_property_grads(net, &prop_grads),
        weights: weight_grads,
    })
}
