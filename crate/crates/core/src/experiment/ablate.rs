use std::path::Path;

use serde::Serialize;

use crate::analysis::coalition_name;
use crate::neuron::TrainableMask;

use super::build::{hidden_widths, task_dims};
use super::io::{atomic_write, write_csv};
use super::train::{load_datasets, train, write_timing};
use super::{ExperimentConfig, ExperimentError, Task, TrainTarget};

/// Mean and spread of the final reward for one trainable-property mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblateRow {
    /// Bit string in property order `tau_m v_th v_rest R`.
    pub mask: String,
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub sd: f64,
    pub coalition: String,
    pub hidden: usize,
    pub trainable_params: usize,
    pub runs: usize,
}

#[derive(Serialize)]
struct AblateRun {
    mask: String,
    seed: u64,
    final_reward: f64,
    final_population_mean: f64,
}

pub(crate) fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = if x.len() > 1 {
        (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Trains one neuron-property run per mask and seed and writes `ablate.csv`
/// (readable by the `shapley` command), `ablate_runs.csv` and per-run curves.
pub fn run_ablate(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<AblateRow>, ExperimentError> {
    cfg.validate()?;
    if cfg.experiment.task == Task::Sphere {
        return Err(ExperimentError::Config(
            "ablation needs a network task".into(),
        ));
    }
    let masks: Vec<TrainableMask> = if cfg.ablate.masks.is_empty() {
        (1..16).map(TrainableMask::from_bits).collect()
    } else {
        cfg.ablate
            .masks
            .iter()
            .map(|m| TrainableMask::parse_bit_string(m).expect("validated"))
            .collect()
    };
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    atomic_write(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    let data = load_datasets(cfg)?;
    let dims = task_dims(cfg.experiment.task, data.as_ref().map(|d| &d.train))?;
    let budget = cfg.ablate.param_budget.or(cfg.network.param_budget);

    let mut rows = Vec::with_capacity(masks.len());
    let mut runs = Vec::new();
    for mask in masks {
        let bits = mask.to_bit_string();
        let mut sub = cfg.clone();
        sub.network.trainable = bits.clone();
        sub.network.train = TrainTarget::Neurons;
        let hidden = hidden_widths(&sub, budget, dims)?;
        let mut finals = Vec::with_capacity(cfg.experiment.repeats);
        let mut params = 0;
        for r in 0..cfg.experiment.repeats as u64 {
            sub.experiment.seed = cfg.experiment.seed + r;
            let t = train(&sub, &hidden, data.as_ref(), None)?;
            let run_dir = dir
                .join("runs")
                .join(format!("mask_{bits}_seed_{}", sub.experiment.seed));
            atomic_write(&run_dir.join("curves.csv"), &t.curves)?;
            write_timing(&run_dir.join("timing.csv"), &t.seconds)?;
            log::info!(
                "mask {bits} seed {}: {:.4}",
                sub.experiment.seed,
                t.summary.final_reward
            );
            finals.push(t.summary.final_reward);
            params = t.summary.trainable_params;
            runs.push(AblateRun {
                mask: bits.clone(),
                seed: sub.experiment.seed,
                final_reward: t.summary.final_reward,
                final_population_mean: t.summary.final_population_mean.unwrap_or(f64::NAN),
            });
        }
        let (mean, sd) = mean_sd(&finals);
        rows.push(AblateRow {
            mask: bits,
            mean,
            sd,
            coalition: coalition_name(mask.bits() as usize),
            hidden: hidden[0],
            trainable_params: params,
            runs: finals.len(),
        });
    }
    write_csv(&dir.join("ablate.csv"), &rows)?;
    write_csv(&dir.join("ablate_runs.csv"), &runs)?;
    Ok(rows)
}
