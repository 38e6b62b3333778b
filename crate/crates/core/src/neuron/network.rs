use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::lif::lif_step_in_place;
use super::{LayerState, Matrix, NeuronParams, SimError, TrainableMask, CURRENT_UNIT, DEFAULT_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    /// Final layer is non-spiking; its membrane potential is the output.
    #[default]
    MembranePotential,
    /// Final layer spikes; the output is its cumulative spike count.
    SpikeCount,
}

/// Feedforward spiking network with fixed weights and per-neuron parameters.
///
/// `layer_sizes[0]` is the input width; every following entry is a layer of
/// LIF neurons. `weights[l]` maps layer `l` (or the input for `l == 0`) onto
/// neuron layer `l` and has shape `layer_sizes[l + 1] x layer_sizes[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Matrix>,
    pub params: Vec<Vec<NeuronParams>>,
    pub delta_t: f64,
    pub trainable: TrainableMask,
    pub readout: ReadoutMode,
    /// Scale applied to raw observations before they enter the first weight matrix.
    pub input_gain: f64,
}

impl NetworkSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        weights: Vec<Matrix>,
        params: Vec<Vec<NeuronParams>>,
    ) -> Result<Self, SimError> {
        let net = Self {
            layer_sizes,
            weights,
            params,
            delta_t: DEFAULT_DT,
            trainable: TrainableMask::ALL,
            readout: ReadoutMode::MembranePotential,
            input_gain: 1.0,
        };
        net.validate()?;
        Ok(net)
    }

    /// LeCun-initialized weights and default neuron parameters everywhere.
    pub fn with_defaults(layer_sizes: &[usize], seed: u64) -> Result<Self, SimError> {
        let weights = init_weights(layer_sizes, seed);
        let params = layer_sizes[1..]
            .iter()
            .map(|&n| vec![NeuronParams::default(); n])
            .collect();
        Self::new(layer_sizes.to_vec(), weights, params)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.layer_sizes.len() < 2 {
            return Err(SimError::InvalidNetwork(
                "need an input width and at least one neuron layer".into(),
            ));
        }
        if let Some(l) = self.layer_sizes.iter().position(|&n| n == 0) {
            return Err(SimError::InvalidNetwork(format!(
                "layer {l} has zero width"
            )));
        }
        let layers = self.num_layers();
        if self.weights.len() != layers || self.params.len() != layers {
            return Err(SimError::InvalidNetwork(format!(
                "{layers} neuron layers but {} weight matrices and {} parameter tables",
                self.weights.len(),
                self.params.len()
            )));
        }
        for l in 0..layers {
            let w = &self.weights[l];
            let (rows, cols) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            if w.rows() != rows || w.cols() != cols {
                return Err(SimError::InvalidNetwork(format!(
                    "weight matrix {l} is {}x{}, expected {rows}x{cols}",
                    w.rows(),
                    w.cols()
                )));
            }
            if self.params[l].len() != rows {
                return Err(SimError::InvalidNetwork(format!(
                    "parameter table {l} has {} entries, expected {rows}",
                    self.params[l].len()
                )));
            }
        }
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(SimError::InvalidNetwork("delta_t must be positive".into()));
        }
        Ok(())
    }

    /// Number of neuron layers (excludes the input).
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_neurons(&self) -> usize {
        self.layer_sizes[1..].iter().sum()
    }

    /// Whether neuron layer `l` emits spikes. Only a membrane-potential readout is silent.
    pub fn layer_spiking(&self, l: usize) -> bool {
        l + 1 < self.num_layers() || self.readout == ReadoutMode::SpikeCount
    }

    /// Current into the first neuron layer for raw input `x`, amperes.
    pub fn input_current(&self, x: &[f64]) -> Result<Vec<f64>, SimError> {
        if x.len() != self.input_dim() {
            return Err(SimError::Dimension {
                expected: self.input_dim(),
                got: x.len(),
                context: "network input",
            });
        }
        let scaled: Vec<f64> = x.iter().map(|v| self.input_gain * v).collect();
        Ok(self.weights[0]
            .matvec(&scaled)
            .into_iter()
            .map(|c| c * CURRENT_UNIT)
            .collect())
    }
}

/// LeCun-normal weights: zero mean, variance `1 / fan_in`.
pub fn init_weights(layer_sizes: &[usize], seed: u64) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    layer_sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).unwrap();
            let data = (0..fan_in * fan_out)
                .map(|_| normal.sample(&mut rng))
                .collect();
            Matrix::from_vec(fan_out, fan_in, data)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// Synaptic input current, amperes.
    pub current: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// External input at this step; empty when the first-layer current was supplied directly.
    pub input: Vec<f64>,
    pub layers: Vec<LayerRecord>,
}

/// Everything needed to replay or differentiate a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Membrane potentials before the first step (one vector per layer).
    pub initial_v: Vec<Vec<f64>>,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Post-reset potential of layer `l` just before step `t`.
    pub fn v_before(&self, t: usize, l: usize) -> &[f64] {
        if t == 0 {
            &self.initial_v[l]
        } else {
            &self.steps[t - 1].layers[l].v
        }
    }
}

/// Stateful single-threaded simulation of one network.
pub struct Simulation<'a> {
    net: &'a NetworkSpec,
    states: Vec<LayerState>,
    u: Vec<Vec<f64>>,
    spike_counts: Vec<f64>,
    trajectory: Option<Trajectory>,
}

impl<'a> Simulation<'a> {
    pub fn new(net: &'a NetworkSpec, record: bool) -> Self {
        let states: Vec<LayerState> = net.params.iter().map(|p| LayerState::at_rest(p)).collect();
        let trajectory = record.then(|| Trajectory {
            initial_v: states.iter().map(|s| s.v.clone()).collect(),
            steps: Vec::new(),
        });
        Self {
            net,
            u: net.layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            spike_counts: vec![0.0; net.output_dim()],
            states,
            trajectory,
        }
    }

    pub fn network(&self) -> &NetworkSpec {
        self.net
    }

    /// Advances one step with raw input `x` and returns the readout.
    pub fn step(&mut self, x: &[f64]) -> Result<&[f64], SimError> {
        let current = self.net.input_current(x)?;
        self.advance(current, x.to_vec())
    }

    /// Advances one step with a precomputed first-layer current (see
    /// [`NetworkSpec::input_current`]).
    pub fn step_with_current(&mut self, current: &[f64]) -> Result<&[f64], SimError> {
        if current.len() != self.net.layer_sizes[1] {
            return Err(SimError::Dimension {
                expected: self.net.layer_sizes[1],
                got: current.len(),
                context: "first-layer current",
            });
        }
        self.advance(current.to_vec(), Vec::new())
    }

    fn advance(&mut self, first_current: Vec<f64>, input: Vec<f64>) -> Result<&[f64], SimError> {
        let layers = self.net.num_layers();
        let mut records = self.trajectory.as_ref().map(|_| Vec::with_capacity(layers));
        let mut current = first_current;
        for l in 0..layers {
            let spiking = self.net.layer_spiking(l);
            lif_step_in_place(
                &mut self.states[l],
                &current,
                &self.net.params[l],
                spiking,
                &mut self.u[l],
            )?;
            let next = if l + 1 < layers {
                Some(
                    self.net.weights[l + 1]
                        .matvec_spikes(&self.states[l].s)
                        .into_iter()
                        .map(|c| c * CURRENT_UNIT)
                        .collect::<Vec<f64>>(),
                )
            } else {
                None
            };
            if let Some(r) = records.as_mut() {
                r.push(LayerRecord {
                    current: std::mem::take(&mut current),
                    u: self.u[l].clone(),
                    v: self.states[l].v.clone(),
                    s: self.states[l].s.clone(),
                });
            }
            if let Some(n) = next {
                current = n;
            }
        }
        let last = &self.states[layers - 1];
        for (c, &s) in self.spike_counts.iter_mut().zip(&last.s) {
            if s {
                *c += 1.0;
            }
        }
        if let (Some(t), Some(layers)) = (self.trajectory.as_mut(), records) {
            t.steps.push(StepRecord { input, layers });
        }
        Ok(self.readout())
    }

    pub fn readout(&self) -> &[f64] {
        match self.net.readout {
            ReadoutMode::MembranePotential => &self.states[self.net.num_layers() - 1].v,
            ReadoutMode::SpikeCount => &self.spike_counts,
        }
    }

    pub fn layer_state(&self, l: usize) -> &LayerState {
        &self.states[l]
    }

    pub fn into_trajectory(self) -> Option<Trajectory> {
        self.trajectory
    }
}

/// Runs the network over `inputs` (one row per step) from rest.
pub fn forward(
    net: &NetworkSpec,
    inputs: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Trajectory), SimError> {
    net.validate()?;
    let mut sim = Simulation::new(net, true);
    let mut outputs = Vec::with_capacity(inputs.len());
    for x in inputs {
        outputs.push(sim.step(x)?.to_vec());
    }
    Ok((outputs, sim.into_trajectory().expect("recording enabled")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::lif_step;

    fn hand_net() -> NetworkSpec {
        // 2 inputs -> 2 spiking -> 1 readout
        let w0 = Matrix::from_rows(&[vec![3.0, 0.0], vec![1.0, 1.0]]);
        let w1 = Matrix::from_rows(&[vec![1.0, -0.5]]);
        let params = vec![
            vec![NeuronParams::default(); 2],
            vec![NeuronParams::default()],
        ];
        NetworkSpec::new(vec![2, 2, 1], vec![w0, w1], params).unwrap()
    }

    #[test]
    fn zero_weights_read_rest() {
        let mut net = NetworkSpec::with_defaults(&[3, 4], 1).unwrap();
        net.weights[0] = Matrix::zeros(4, 3);
        let inputs = vec![vec![1.0, -2.0, 5.0]; 6];
        let (out, traj) = forward(&net, &inputs).unwrap();
        assert_eq!(traj.len(), 6);
        for o in out {
            assert_eq!(o, vec![0.0; 4]);
        }
    }

    #[test]
    fn two_layer_matches_manual_unrolling() {
        let net = hand_net();
        let inputs = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let (out, _) = forward(&net, &inputs).unwrap();

        // Hidden neuron 0 sees 3 V, neuron 1 sees 1 V at step 0.
        // step 0: u_h = (0.75, 0.25) -> spike (1, 0), v_h = (0, 0.25)
        //         readout: u = 0.25 * 1.0 = 0.25
        // step 1: u_h = (0 + .25*3, .25 + .25*(1 - .25)) = (0.75, 0.4375) -> s = (1, 0)
        //         readout: u = 0.25 + 0.25 * (1 - 0.25) = 0.4375
        // step 2: input (0,1): currents (0, 1)
        //         u_h = (0, 0.4375 + .25*(1 - .4375)) = (0, 0.578125) -> s = (0, 1)
        //         readout: u = 0.4375 + 0.25 * (-0.5 - 0.4375) = 0.203125
        let expected = [0.25, 0.4375, 0.203125];
        for (o, e) in out.iter().zip(expected) {
            assert!((o[0] - e).abs() < 1e-12, "{o:?} vs {e}");
        }
    }

    #[test]
    fn replay_reproduces_trajectory() {
        let net = NetworkSpec::with_defaults(&[3, 5, 4, 2], 7).unwrap();
        let inputs: Vec<Vec<f64>> = (0..12)
            .map(|t| vec![(t as f64).sin() * 3.0, 1.5, -(t as f64) * 0.3])
            .collect();
        let (_, traj) = forward(&net, &inputs).unwrap();
        let mut states: Vec<LayerState> =
            net.params.iter().map(|p| LayerState::at_rest(p)).collect();
        for step in &traj.steps {
            for (l, rec) in step.layers.iter().enumerate() {
                let (next, u) = lif_step(
                    &states[l],
                    &rec.current,
                    &net.params[l],
                    net.layer_spiking(l),
                )
                .unwrap();
                assert_eq!(u, rec.u);
                assert_eq!(next.v, rec.v);
                assert_eq!(next.s, rec.s);
                states[l] = next;
            }
        }
    }

    #[test]
    fn deterministic_outputs() {
        let net = NetworkSpec::with_defaults(&[2, 8, 3], 3).unwrap();
        let inputs = vec![vec![0.7, -1.2]; 20];
        assert_eq!(
            forward(&net, &inputs).unwrap(),
            forward(&net, &inputs).unwrap()
        );
    }

    #[test]
    fn empty_sequence_is_valid() {
        let net = hand_net();
        let (out, traj) = forward(&net, &[]).unwrap();
        assert!(out.is_empty());
        assert!(traj.is_empty());
    }

    #[test]
    fn input_width_mismatch_rejected() {
        let net = hand_net();
        assert!(matches!(
            forward(&net, &[vec![1.0]]),
            Err(SimError::Dimension { .. })
        ));
    }

    #[test]
    fn lecun_variance_and_seeding() {
        let a = init_weights(&[100, 10_000], 11);
        let w = a[0].as_slice();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 0.01).abs() < 0.05 * 0.01, "variance {var}");
        assert_eq!(a, init_weights(&[100, 10_000], 11));
        assert_ne!(a, init_weights(&[100, 10_000], 12));
    }

    #[test]
    fn spike_count_readout_counts() {
        let mut net = hand_net();
        net.readout = ReadoutMode::SpikeCount;
        net.weights[1] = Matrix::from_rows(&[vec![10.0, 0.0]]);
        let inputs = vec![vec![1.0, 0.0]; 4];
        let (out, traj) = forward(&net, &inputs).unwrap();
        let spikes: f64 = traj.steps.iter().filter(|s| s.layers[1].s[0]).count() as f64;
        assert_eq!(out.last().unwrap()[0], spikes);
        assert!(spikes > 0.0);
    }
}
