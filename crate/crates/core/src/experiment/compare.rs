use std::path::Path;

use serde::Serialize;

use crate::grad::SurrogateKind;

use super::build::hidden_widths;
use super::io::{atomic_write, write_csv};
use super::train::train;
use super::{
    ExperimentConfig, ExperimentError, Method, Optimizer, SurrogateSpec, Task, TrainTarget,
};

/// One point of a learning curve in `compare.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub horizon: usize,
    pub method: String,
    pub seed: u64,
    pub lr: f64,
    pub surrogate: String,
    pub alpha: f64,
    /// Generation (ES) or update (BPTT).
    pub step: u64,
    pub episodes: u64,
    pub reward_mean: f64,
}

/// One run in `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub horizon: usize,
    pub method: String,
    pub seed: u64,
    pub lr: f64,
    pub surrogate: String,
    pub alpha: f64,
    pub episodes: u64,
    /// Mean return of the last `es_population` training episodes.
    pub final_return: f64,
    /// ES: greedy return of the final center. BPTT: same as `final_return`.
    pub final_reward: f64,
}

fn kind_name(k: SurrogateKind) -> &'static str {
    match k {
        SurrogateKind::Rectangular => "rectangular",
        SurrogateKind::Arctan => "arctan",
        SurrogateKind::LogNonzeroSign => "log_nonzero_sign",
    }
}

/// Runs every horizon x method x seed (x learning rate x surrogate for BPTT)
/// with the same episode budget, writing `compare.csv` and `summary.csv`.
///
/// Every run consumes exactly `compare.episode_budget` training episodes: ES
/// uses `budget / es_population` generations of one episode per member and
/// BPTT `budget / bptt.batch` updates. The final-return window has the ES
/// population size for both.
pub fn run_compare(
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<CompareSummary>, ExperimentError> {
    cfg.validate()?;
    let c = &cfg.compare;
    if cfg.experiment.task != Task::Cartpole {
        return Err(ExperimentError::Config(
            "compare runs the cartpole task".into(),
        ));
    }
    if c.es_population == 0 || !c.es_population.is_multiple_of(2) || !c.episode_budget.is_multiple_of(c.es_population) {
        return Err(ExperimentError::Config(
            "compare.episode_budget must be a multiple of the even compare.es_population".into(),
        ));
    }
    if cfg.bptt.batch == 0 || !c.episode_budget.is_multiple_of(cfg.bptt.batch) {
        return Err(ExperimentError::Config(
            "compare.episode_budget must be a multiple of bptt.batch".into(),
        ));
    }
    if c.horizons.is_empty() || c.methods.is_empty() {
        return Err(ExperimentError::Config(
            "compare needs horizons and methods".into(),
        ));
    }
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    atomic_write(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;

    let lrs = if c.bp_lrs.is_empty() {
        vec![cfg.bptt.lr]
    } else {
        c.bp_lrs.clone()
    };
    let surrogates = if c.surrogates.is_empty() {
        vec![SurrogateSpec {
            kind: cfg.bptt.surrogate,
            alpha: cfg.bptt.alpha,
        }]
    } else {
        c.surrogates.clone()
    };

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for r in 0..cfg.experiment.repeats as u64 {
        let seed = cfg.experiment.seed + r;
        for &horizon in &c.horizons {
            for &method in &c.methods {
                let mut sub = cfg.clone();
                sub.experiment.seed = seed;
                sub.env.max_steps = horizon;
                sub.network.train = match method {
                    Method::EsNeuron | Method::BpNeuron => TrainTarget::Neurons,
                    Method::EsWeight | Method::BpWeight => TrainTarget::Weights,
                };
                let variants: Vec<(f64, SurrogateSpec)> = match method {
                    Method::EsNeuron | Method::EsWeight => {
                        sub.experiment.optimizer = Optimizer::EsPgpe;
                        sub.es.population = c.es_population;
                        sub.es.generations = (c.episode_budget / c.es_population) as u64;
                        sub.es.episodes_per_genome = 1;
                        vec![(sub.es.lr_center, surrogates[0])]
                    }
                    Method::BpNeuron | Method::BpWeight => {
                        sub.experiment.optimizer = Optimizer::BpttReinforce;
                        sub.bptt.updates = c.episode_budget / cfg.bptt.batch;
                        sub.bptt.final_window = c.es_population;
                        lrs.iter()
                            .flat_map(|&lr| surrogates.iter().map(move |&s| (lr, s)))
                            .collect()
                    }
                };
                let is_es = sub.experiment.optimizer == Optimizer::EsPgpe;
                let dims = super::build::task_dims(Task::Cartpole, None)?;
                let hidden = hidden_widths(&sub, sub.network.param_budget, dims)?;
                for (lr, s) in variants {
                    let mut run = sub.clone();
                    if !is_es {
                        run.bptt.lr = lr;
                        run.bptt.surrogate = s.kind;
                        run.bptt.alpha = s.alpha;
                    }
                    let (sname, alpha) = if is_es {
                        ("none", 0.0)
                    } else {
                        (kind_name(s.kind), s.alpha)
                    };
                    let t = train(&run, &hidden, None, None)?;
                    log::info!(
                        "horizon {horizon} {} seed {seed} lr {lr} {sname}: final return {:.2}",
                        method.name(),
                        t.summary.final_training_return.unwrap_or(f64::NAN)
                    );
                    for &(step, episodes, reward_mean) in &t.series {
                        rows.push(CompareRow {
                            horizon,
                            method: method.name().into(),
                            seed,
                            lr,
                            surrogate: sname.into(),
                            alpha,
                            step,
                            episodes,
                            reward_mean,
                        });
                    }
                    summary.push(CompareSummary {
                        horizon,
                        method: method.name().into(),
                        seed,
                        lr,
                        surrogate: sname.into(),
                        alpha,
                        episodes: t.summary.episodes,
                        final_return: t.summary.final_training_return.unwrap_or(f64::NAN),
                        final_reward: t.summary.final_reward,
                    });
                }
            }
        }
    }
    write_csv(&dir.join("compare.csv"), &rows)?;
    write_csv(&dir.join("summary.csv"), &summary)?;
    Ok(summary)
}
