use serde::{Deserialize, Serialize};

use crate::neuron::{NetworkSpec, Trajectory};

use super::{backward, GradError, GradMode, Gradients, Surrogate};

/// One rollout of a softmax policy over readout potentials.
#[derive(Debug, Clone)]
pub struct Episode {
    pub trajectory: Trajectory,
    /// Action index sampled at every step (same length as the trajectory).
    pub actions: Vec<usize>,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    BatchMean,
    Constant(f64),
}

/// Numerically stable softmax of `beta * v`.
pub fn softmax(v: &[f64], beta: f64) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (beta * (x - m)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Score-function gradient `mean_e (G_e - b) * grad log pi(actions_e)`.
///
/// The log-probability gradient is carried into the network by [`backward`],
/// so the result has the genome layout of `net` plus per-matrix weight
/// gradients. It is an ascent direction on expected return.
pub fn reinforce_update(
    net: &NetworkSpec,
    episodes: &[Episode],
    surrogate: &Surrogate,
    mode: GradMode,
    baseline: Baseline,
    beta: f64,
) -> Result<Gradients, GradError> {
    if episodes.is_empty() {
        return Err(GradError::EmptyBatch);
    }
    let b = match baseline {
        Baseline::BatchMean => episodes.iter().map(|e| e.ret).sum::<f64>() / episodes.len() as f64,
        Baseline::Constant(c) => c,
    };
    let mut total = Gradients::zeros(net);
    let out_layer = net.num_layers() - 1;
    for ep in episodes {
        if ep.actions.len() != ep.trajectory.len() {
            return Err(GradError::Mismatch(format!(
                "{} actions for {} steps",
                ep.actions.len(),
                ep.trajectory.len()
            )));
        }
        let advantage = ep.ret - b;
        if advantage == 0.0 {
            continue;
        }
        let loss_grads: Vec<Vec<f64>> = ep
            .trajectory
            .steps
            .iter()
            .zip(&ep.actions)
            .map(|(step, &a)| {
                let p = softmax(&step.layers[out_layer].v, beta);
                p.iter()
                    .enumerate()
                    .map(|(j, pj)| advantage * beta * (if j == a { 1.0 } else { 0.0 } - pj))
                    .collect()
            })
            .collect();
        let g = backward(net, &ep.trajectory, &loss_grads, surrogate, mode)?;
        total.add_scaled(&g, 1.0 / episodes.len() as f64);
    }
    Ok(total)
}
