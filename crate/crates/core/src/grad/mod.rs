//! Reverse-mode gradients through the LIF recursion.
//!
//! The temporal Jacobian of one neuron is
//!
//! ```text
//! full:     dv(t)/dv(t-dt) = [1 - s + (v_rest - u) g'(u - v_th)] (1 - k)
//! detached: dv(t)/dv(t-dt) = (1 - s) (1 - k)
//! ```
//!
//! where `k = dt / tau_m`. The detached variant drops the gradient through the
//! reset; spikes still carry surrogate gradients into the next layer.

mod adam;
mod backward;
mod oracle;
mod reinforce;
mod stability;
mod surrogate;

pub use adam::Adam;
pub use backward::{backward, Gradients};
pub use oracle::{jacobian_product_oracle, ORACLE_MAX_NEURONS, ORACLE_MAX_STEPS};
pub use reinforce::{reinforce_update, softmax, Baseline, Episode};
pub use stability::{stability_report, Histogram, StabilityReport, StabilityRow};
pub use surrogate::{nonzero_sign, Surrogate, SurrogateKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neuron::{NetworkSpec, NeuronParams, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    /// Gradient flows through the spike-reset term.
    #[default]
    Full,
    /// The reset term is treated as a constant.
    Detached,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error("trajectory does not match network: {0}")]
    Mismatch(String),
    #[error("oracle size guard exceeded: {neurons} neurons, {steps} steps (max {max_neurons}, {max_steps})")]
    TooLarge {
        neurons: usize,
        steps: usize,
        max_neurons: usize,
        max_steps: usize,
    },
    #[error("empty episode batch")]
    EmptyBatch,
}

/// `dv(t)/dv(t - dt)` for one neuron at one step.
pub fn step_jacobian(
    u: f64,
    s: bool,
    params: &NeuronParams,
    surrogate: &Surrogate,
    mode: GradMode,
) -> f64 {
    let retain = 1.0 - params.decay();
    let not_spiked = if s { 0.0 } else { 1.0 };
    match mode {
        GradMode::Full => {
            let g = surrogate.derivative(u - params.v_th, params.v_th);
            (not_spiked + (params.v_rest - u) * g) * retain
        }
        GradMode::Detached => not_spiked * retain,
    }
}

/// Checks that the trajectory was produced by a network with `net`'s shape.
pub(crate) fn check_trajectory(
    net: &NetworkSpec,
    traj: &Trajectory,
    loss_grads: &[Vec<f64>],
) -> Result<(), GradError> {
    if loss_grads.len() != traj.len() {
        return Err(GradError::Mismatch(format!(
            "{} loss-gradient rows for {} steps",
            loss_grads.len(),
            traj.len()
        )));
    }
    if let Some((t, g)) = loss_grads
        .iter()
        .enumerate()
        .find(|(_, g)| g.len() != net.output_dim())
    {
        return Err(GradError::Mismatch(format!(
            "loss gradient at step {t} has {} entries, output has {}",
            g.len(),
            net.output_dim()
        )));
    }
    let layers = net.num_layers();
    if traj.initial_v.len() != layers {
        return Err(GradError::Mismatch("initial state layer count".into()));
    }
    for (t, step) in traj.steps.iter().enumerate() {
        if step.layers.len() != layers {
            return Err(GradError::Mismatch(format!("step {t} layer count")));
        }
        for (l, rec) in step.layers.iter().enumerate() {
            let n = net.layer_sizes[l + 1];
            if rec.u.len() != n || rec.v.len() != n || rec.s.len() != n || rec.current.len() != n {
                return Err(GradError::Mismatch(format!("step {t}, layer {l} width")));
            }
        }
        if !step.input.is_empty() && step.input.len() != net.input_dim() {
            return Err(GradError::Mismatch(format!("step {t} input width")));
        }
    }
    Ok(())
}

/// Presynaptic activity feeding neuron layer `l` at step `t`: the scaled
/// external input for the first layer, the previous layer's spikes otherwise.
pub(crate) fn presynaptic(net: &NetworkSpec, traj: &Trajectory, t: usize, l: usize) -> Vec<f64> {
    if l == 0 {
        traj.steps[t]
            .input
            .iter()
            .map(|x| net.input_gain * x)
            .collect()
    } else {
        traj.steps[t].layers[l - 1]
            .s
            .iter()
            .map(|&s| if s { 1.0 } else { 0.0 })
            .collect()
    }
}
