//! Reference gradient built from explicit per-step Jacobian matrices.
//!
//! For every step the full state Jacobian `J_t = dV(t)/dV(t-1)` and the local
//! parameter sensitivity `F_t = dV(t)/dtheta` (previous state held fixed) are
//! formed densely by forward-mode differentiation within the step. The
//! gradient is then the literal double sum
//!
//! ```text
//! sum_n sum_k  g_n^T (J_n J_{n-1} ... J_{k+1}) F_k
//! ```
//!
//! with products formed as explicit matrix multiplications. Cost is
//! O(T^2 N^3); it exists to check [`super::backward`] on small networks.

use crate::neuron::{Matrix, NetworkSpec, Trajectory, CURRENT_UNIT, DEFAULT_R_MEM};

use super::backward::{pack_property_grads, Gradients};
use super::{check_trajectory, presynaptic, GradError, GradMode, Surrogate};

pub const ORACLE_MAX_NEURONS: usize = 32;
pub const ORACLE_MAX_STEPS: usize = 64;

type Dense = Vec<Vec<f64>>;

fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

fn identity(n: usize) -> Dense {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, m) = (a.len(), b.first().map_or(0, Vec::len));
    let mut out = zeros(n, m);
    for i in 0..n {
        for (k, &aik) in a[i].iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Column layout of the oracle's parameter space.
struct Columns {
    neuron_offset: Vec<usize>,
    weight_offset: Vec<usize>,
    total: usize,
}

impl Columns {
    fn new(net: &NetworkSpec) -> Self {
        let mut neuron_offset = Vec::new();
        let mut acc = 0;
        for &n in &net.layer_sizes[1..] {
            neuron_offset.push(acc);
            acc += n;
        }
        let neurons = acc;
        let mut weight_offset = Vec::new();
        let mut pos = 4 * neurons;
        for w in &net.weights {
            weight_offset.push(pos);
            pos += w.rows() * w.cols();
        }
        Self {
            neuron_offset,
            weight_offset,
            total: pos,
        }
    }

    fn param(&self, l: usize, i: usize, prop: usize) -> usize {
        4 * (self.neuron_offset[l] + i) + prop
    }

    fn state(&self, l: usize, i: usize) -> usize {
        self.neuron_offset[l] + i
    }
}

/// Explicit-sum gradient; same contract as [`super::backward`].
pub fn jacobian_product_oracle(
    net: &NetworkSpec,
    traj: &Trajectory,
    loss_grads: &[Vec<f64>],
    surrogate: &Surrogate,
    mode: GradMode,
) -> Result<Gradients, GradError> {
    check_trajectory(net, traj, loss_grads)?;
    let n_state = net.num_neurons();
    if n_state > ORACLE_MAX_NEURONS || traj.len() > ORACLE_MAX_STEPS {
        return Err(GradError::TooLarge {
            neurons: n_state,
            steps: traj.len(),
            max_neurons: ORACLE_MAX_NEURONS,
            max_steps: ORACLE_MAX_STEPS,
        });
    }
    let cols = Columns::new(net);
    let layers = net.num_layers();
    let t_len = traj.len();

    // dV(-1)/dtheta: the initial state is each neuron's resting potential.
    let mut init = zeros(n_state, cols.total);
    for l in 0..layers {
        for i in 0..net.layer_sizes[l + 1] {
            init[cols.state(l, i)][cols.param(l, i, 2)] = 1.0;
        }
    }

    let mut jac: Vec<Dense> = Vec::with_capacity(t_len);
    let mut local: Vec<Dense> = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let (j, f) = step_matrices(net, traj, t, &cols, surrogate, mode);
        jac.push(j);
        local.push(f);
    }

    let mut total = vec![0.0; cols.total];
    let out_layer = layers - 1;
    for n in 0..t_len {
        let g = &loss_grads[n];
        if g.iter().all(|&x| x == 0.0) {
            continue;
        }
        // row vector g_n over the full state
        let mut gn = zeros(1, n_state);
        for (i, &x) in g.iter().enumerate() {
            gn[0][cols.state(out_layer, i)] = x;
        }
        let mut prod = identity(n_state);
        for k in (0..=n).rev() {
            let term = matmul(&matmul(&gn, &prod), &local[k]);
            axpy(&mut total, 1.0, &term[0]);
            prod = matmul(&prod, &jac[k]);
        }
        let term = matmul(&matmul(&gn, &prod), &init);
        axpy(&mut total, 1.0, &term[0]);
    }

    let mut prop_grads: Vec<Vec<[f64; 4]>> = Vec::with_capacity(layers);
    for l in 0..layers {
        let mut layer = Vec::with_capacity(net.layer_sizes[l + 1]);
        for i in 0..net.layer_sizes[l + 1] {
            let mut g = [0.0; 4];
            for (p, gp) in g.iter_mut().enumerate() {
                *gp = total[cols.param(l, i, p)];
            }
            layer.push(g);
        }
        prop_grads.push(layer);
    }
    let weights = net
        .weights
        .iter()
        .enumerate()
        .map(|(l, w)| {
            let n = w.rows() * w.cols();
            let off = cols.weight_offset[l];
            Matrix::from_vec(w.rows(), w.cols(), total[off..off + n].to_vec())
        })
        .collect();
    Ok(Gradients {
        genome: pack_property_grads(net, &prop_grads),
        weights,
    })
}

/// Forward-mode sensitivities of one step: (dV(t)/dV(t-1), dV(t)/dtheta).
fn step_matrices(
    net: &NetworkSpec,
    traj: &Trajectory,
    t: usize,
    cols: &Columns,
    surrogate: &Surrogate,
    mode: GradMode,
) -> (Dense, Dense) {
    let n_state = net.num_neurons();
    let mut dv_state = zeros(n_state, n_state);
    let mut dv_param = zeros(n_state, cols.total);
    // spike sensitivities of the previous layer within this step
    let mut ds_state_prev: Dense = Vec::new();
    let mut ds_param_prev: Dense = Vec::new();

    for l in 0..net.num_layers() {
        let n = net.layer_sizes[l + 1];
        let rec = &traj.steps[t].layers[l];
        let v_prev = traj.v_before(t, l);
        let pre = presynaptic(net, traj, t, l);
        let w = &net.weights[l];
        let spiking = net.layer_spiking(l);
        let mut ds_state = zeros(n, n_state);
        let mut ds_param = zeros(n, cols.total);

        for i in 0..n {
            let p = &net.params[l][i];
            let k = p.decay();
            let u = rec.u[i];
            let s = if rec.s[i] { 1.0 } else { 0.0 };
            let r = p.r_mem();
            let current = rec.current[i];

            // dI: through previous-layer spikes and through the weights
            let mut di_state = vec![0.0; n_state];
            let mut di_param = vec![0.0; cols.total];
            if l > 0 {
                for j in 0..w.cols() {
                    let wij = w.get(i, j) * CURRENT_UNIT;
                    axpy(&mut di_state, wij, &ds_state_prev[j]);
                    axpy(&mut di_param, wij, &ds_param_prev[j]);
                }
            }
            if !pre.is_empty() {
                let off = cols.weight_offset[l] + i * w.cols();
                for (j, x) in pre.iter().enumerate() {
                    di_param[off + j] += CURRENT_UNIT * x;
                }
            }

            // u = (1 - k) v_prev + k (R I + v_rest)
            let mut du_state = vec![0.0; n_state];
            let mut du_param = vec![0.0; cols.total];
            du_state[cols.state(l, i)] = 1.0 - k;
            axpy(&mut du_state, k * r, &di_state);
            axpy(&mut du_param, k * r, &di_param);
            du_param[cols.param(l, i, 0)] += k * (1.0 - k) * (r * current + p.v_rest - v_prev[i]);
            du_param[cols.param(l, i, 2)] += k;
            du_param[cols.param(l, i, 3)] += k * current * DEFAULT_R_MEM;

            // s = H(u - v_th) with surrogate slope
            let g = if spiking {
                surrogate.derivative(u - p.v_th, p.v_th)
            } else {
                0.0
            };
            let ds_s: Vec<f64> = du_state.iter().map(|x| g * x).collect();
            let mut ds_p: Vec<f64> = du_param.iter().map(|x| g * x).collect();
            ds_p[cols.param(l, i, 1)] -= g;

            // v = u (1 - s) + v_rest s
            let row = cols.state(l, i);
            axpy(&mut dv_state[row], 1.0 - s, &du_state);
            axpy(&mut dv_param[row], 1.0 - s, &du_param);
            dv_param[row][cols.param(l, i, 2)] += s;
            if mode == GradMode::Full {
                axpy(&mut dv_state[row], p.v_rest - u, &ds_s);
                axpy(&mut dv_param[row], p.v_rest - u, &ds_p);
            }
            ds_state[i] = ds_s;
            ds_param[i] = ds_p;
        }
        ds_state_prev = ds_state;
        ds_param_prev = ds_param;
    }
    (dv_state, dv_param)
}
