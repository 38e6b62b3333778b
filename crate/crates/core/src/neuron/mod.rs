//! Discretized leaky integrate-and-fire neurons with per-neuron parameters.
//!
//! Every neuron carries its own membrane time constant, threshold, resting
//! potential and membrane resistance. The time constant is stored through a
//! sigmoid reparameterization: `k = sigmoid(tau_raw)` is the Euler decay
//! factor `dt / tau_m`, so any finite genome value yields a stable update.
//!
//! ```text
//! u(t) = v(t-dt) + k * (R * I(t) - v(t-dt) + v_rest)
//! s(t) = H(u(t) - v_th)
//! v(t) = u(t) * (1 - s(t)) + v_rest * s(t)
//! ```

mod genome;
mod lif;
mod matrix;
mod network;

pub use genome::{
    genome_len, genome_pack, genome_unpack, weights_len, weights_pack, weights_unpack, Genome,
    Property, TrainableMask,
};
pub use lif::{lif_step, LayerState};
pub use matrix::Matrix;
pub use network::{
    forward, init_weights, LayerRecord, NetworkSpec, ReadoutMode, Simulation, StepRecord,
    Trajectory,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulation time step, seconds.
pub const DEFAULT_DT: f64 = 5e-3;
/// Membrane time constant, seconds.
pub const DEFAULT_TAU_M: f64 = 20e-3;
/// Firing threshold, volts.
pub const DEFAULT_V_TH: f64 = 0.5;
/// Resting (and reset) potential, volts.
pub const DEFAULT_V_REST: f64 = 0.0;
/// Membrane resistance, ohms.
pub const DEFAULT_R_MEM: f64 = 5e7;
/// Current carried by one unit of synaptic weight times one spike, amperes.
///
/// Chosen so that `DEFAULT_R_MEM * CURRENT_UNIT == 1 V`: a unit weighted spike
/// drives a default neuron by one volt.
pub const CURRENT_UNIT: f64 = 1.0 / DEFAULT_R_MEM;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite input current at neuron {neuron}")]
    NonFiniteInput { neuron: usize },
    #[error("non-finite parameter `{name}` at neuron {neuron}")]
    NonFiniteParam { neuron: usize, name: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
}

/// Logistic function, clamped so the result is strictly inside (0, 1) even
/// where the exact value rounds to 0 or 1 in f64.
pub fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Inverse of [`sigmoid`] for `p` in (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Properties of a single neuron. `delta_t` is global and lives on the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    /// Unconstrained membrane time constant; `sigmoid(tau_raw) = dt / tau_m`.
    pub tau_raw: f64,
    pub v_th: f64,
    pub v_rest: f64,
    /// Membrane resistance in units of [`DEFAULT_R_MEM`]; see [`NeuronParams::r_mem`].
    pub resistance: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self::from_physical(
            DEFAULT_TAU_M,
            DEFAULT_V_TH,
            DEFAULT_V_REST,
            DEFAULT_R_MEM,
            DEFAULT_DT,
        )
    }
}

impl NeuronParams {
    /// Builds parameters from a physical time constant. Requires `tau_m > dt`.
    pub fn from_physical(tau_m: f64, v_th: f64, v_rest: f64, r_mem: f64, dt: f64) -> Self {
        assert!(tau_m > dt, "tau_m must exceed the time step");
        Self {
            tau_raw: logit(dt / tau_m),
            v_th,
            v_rest,
            resistance: r_mem / DEFAULT_R_MEM,
        }
    }

    /// Euler decay factor `dt / tau_m`, always in (0, 1).
    #[inline]
    pub fn decay(&self) -> f64 {
        sigmoid(self.tau_raw)
    }

    /// Effective membrane time constant in seconds.
    pub fn tau_m(&self, dt: f64) -> f64 {
        dt / self.decay()
    }

    /// Membrane resistance, ohms.
    #[inline]
    pub fn r_mem(&self) -> f64 {
        self.resistance * DEFAULT_R_MEM
    }

    pub(crate) fn check_finite(&self, neuron: usize) -> Result<(), SimError> {
        for (name, x) in [
            ("tau_raw", self.tau_raw),
            ("v_th", self.v_th),
            ("v_rest", self.v_rest),
            ("resistance", self.resistance),
        ] {
            if !x.is_finite() {
                return Err(SimError::NonFiniteParam { neuron, name });
            }
        }
        Ok(())
    }
}
