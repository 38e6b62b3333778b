//! Post-hoc analysis: distribution fits of membrane time constants, Shapley
//! attribution of neuron properties, and per-class firing rates.

mod fit;
mod io;
mod shapley;
mod special;

pub use fit::{
    fit_gamma, fit_lognormal, gamma_log_likelihood, gamma_moments, lognormal_log_likelihood,
    sample_skewness, Family, FitResult, GAMMA_MAX_ITER,
};
pub use io::{
    read_coalition_csv, read_samples_csv, write_firing_csv, write_fit_csv, write_shapley_csv,
};
pub use shapley::{
    coalition_name, coalition_table, halfcheetah_report, shapley_exact, ShapleyReport, COALITIONS,
    HALFCHEETAH_ABLATION, PLAYERS,
};
pub use special::{digamma, ln_gamma, trigamma};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::neuron::Trajectory;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least 2 samples, got {n}")]
    TooFewSamples { n: usize },
    #[error("sample {index} is {value}; all samples must be positive")]
    NonPositive { index: usize, value: f64 },
    #[error("value {index} is not finite")]
    NonFinite { index: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("missing coalition {0}")]
    MissingCoalition(String),
    #[error("class {class} has no trajectories")]
    EmptyGroup { class: usize },
    #[error("neuron index {index} out of range for {total} neurons")]
    NeuronIndex { index: usize, total: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mean spike frequency of sampled neurons, per class.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringTable {
    /// Flat neuron indices (all layers, in order).
    pub neurons: Vec<usize>,
    /// `rates[i][c]`: spikes per step of `neurons[i]` averaged over class `c`.
    pub rates: Vec<Vec<f64>>,
}

fn locate(traj: &Trajectory, flat: usize) -> Option<(usize, usize)> {
    let mut off = 0;
    for (l, v) in traj.initial_v.iter().enumerate() {
        if flat < off + v.len() {
            return Some((l, flat - off));
        }
        off += v.len();
    }
    None
}

/// Spike count divided by simulation steps, averaged over each class's trajectories.
pub fn firing_stats(
    groups: &[Vec<Trajectory>],
    neuron_sample: &[usize],
) -> Result<FiringTable, AnalysisError> {
    let mut rates = vec![vec![0.0; groups.len()]; neuron_sample.len()];
    for (c, group) in groups.iter().enumerate() {
        if group.is_empty() || group.iter().any(|t| t.is_empty()) {
            return Err(AnalysisError::EmptyGroup { class: c });
        }
        for traj in group {
            let total: usize = traj.initial_v.iter().map(Vec::len).sum();
            for (i, &flat) in neuron_sample.iter().enumerate() {
                let (l, j) =
                    locate(traj, flat).ok_or(AnalysisError::NeuronIndex { index: flat, total })?;
                let spikes = traj.steps.iter().filter(|s| s.layers[l].s[j]).count();
                rates[i][c] += spikes as f64 / traj.len() as f64 / group.len() as f64;
            }
        }
    }
    Ok(FiringTable {
        neurons: neuron_sample.to_vec(),
        rates,
    })
}

/// `k` distinct neuron indices out of `total`, sorted, reproducible from `seed`.
pub fn sample_neurons(total: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = sample(&mut rng, total, k.min(total)).into_vec();
    v.sort_unstable();
    v
}
