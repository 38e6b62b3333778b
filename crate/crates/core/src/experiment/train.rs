use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::envs::{accuracy, load_dataset, CartPoleParams, ImageDataset, Split};
use crate::es::{Direction, EsConfig};
use crate::neuron::NetworkSpec;

use super::bptt_run::{run_reinforce, run_supervised};
use super::build::{build_network, hidden_widths, task_dims, EvalEnv, Target, TaskFitness};
use super::es_run::run_es;
use super::io::{
    atomic_write, config_hash, csv_bytes, genome_csv, write_csv, write_json, Metadata,
    CURVES_SCHEMA_VERSION,
};
use super::{ExperimentConfig, ExperimentError, Optimizer, Task};

/// Generations between ES checkpoints.
const CHECKPOINT_EVERY: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// ES: fitness of the final center. REINFORCE: mean return of the last
    /// `bptt.final_window` episodes. Supervised: batch accuracy of the last update.
    pub final_reward: f64,
    /// ES only: mean fitness of the last population.
    pub final_population_mean: Option<f64>,
    /// REINFORCE only: mean return of the last `bptt.final_window` episodes
    /// (ES: of the last population), comparable across optimizers.
    pub final_training_return: Option<f64>,
    /// Classification: accuracy of the final network on the training set.
    pub train_accuracy: Option<f64>,
    /// Classification with a test set: accuracy of the final network on it.
    pub test_accuracy: Option<f64>,
    pub episodes: u64,
    pub trainable_params: usize,
    pub hidden: Vec<usize>,
}

/// Result of one training run, before anything is written.
pub(crate) struct Trained {
    pub curves: Vec<u8>,
    pub seconds: Vec<f64>,
    pub net: Option<NetworkSpec>,
    pub summary: RunSummary,
    /// `(step, cumulative episodes, mean training return)` per curve row.
    pub series: Vec<(u64, u64, f64)>,
}

pub(crate) struct Datasets {
    pub train: ImageDataset,
    pub test: Option<ImageDataset>,
}

pub(crate) fn load_datasets(cfg: &ExperimentConfig) -> Result<Option<Datasets>, ExperimentError> {
    if cfg.experiment.task != Task::Classify {
        return Ok(None);
    }
    let env = &cfg.env;
    let (Some(ti), Some(tl)) = (&env.train_images, &env.train_labels) else {
        return Err(ExperimentError::Config(
            "classification needs env.train_images and env.train_labels".into(),
        ));
    };
    let mut train = load_dataset(ti, tl, Split::Train)?;
    if let Some(n) = env.train_limit {
        if n < train.len() {
            train = train.subset(&(0..n).collect::<Vec<_>>());
        }
    }
    let test = match (&env.test_images, &env.test_labels) {
        (Some(i), Some(l)) => Some(load_dataset(i, l, Split::Test)?),
        _ => None,
    };
    Ok(Some(Datasets { train, test }))
}

fn eval_env(cfg: &ExperimentConfig) -> EvalEnv {
    match cfg.experiment.task {
        Task::Memory => EvalEnv::Memory {
            length: cfg.env.memory_length,
        },
        _ => EvalEnv::CartPole {
            max_steps: cfg.env.max_steps,
            params: CartPoleParams::default(),
        },
    }
}

/// Trains once with the given hidden widths; nothing is written except the
/// optional ES checkpoint.
pub(crate) fn train(
    cfg: &ExperimentConfig,
    hidden: &[usize],
    data: Option<&Datasets>,
    checkpoint: Option<&Path>,
) -> Result<Trained, ExperimentError> {
    let seed = cfg.experiment.seed;
    if cfg.experiment.task == Task::Sphere {
        let es = EsConfig {
            direction: Direction::Minimize,
            ..cfg.es_config()
        };
        let out = run_es(
            &es,
            vec![cfg.env.sphere_init; cfg.env.sphere_dim],
            &TaskFitness::Sphere,
            0,
            checkpoint,
            CHECKPOINT_EVERY,
        )?;
        return Ok(Trained {
            curves: csv_bytes(&out.rows)?,
            series: out
                .rows
                .iter()
                .map(|r| (r.generation, r.episodes, r.fitness_mean))
                .collect(),
            seconds: out.seconds.clone(),
            net: None,
            summary: RunSummary {
                final_reward: out.final_center(),
                final_population_mean: Some(out.final_population_mean()),
                final_training_return: None,
                train_accuracy: None,
                test_accuracy: None,
                episodes: 0,
                trainable_params: cfg.env.sphere_dim,
                hidden: Vec::new(),
            },
        });
    }

    let dims = task_dims(cfg.experiment.task, data.map(|d| &d.train))?;
    let template = build_network(cfg, hidden, dims)?;
    let target = Target::from(cfg.network.train);
    let trainable_params = target.len(&template);
    if trainable_params == 0 {
        return Err(ExperimentError::Config("nothing to train".into()));
    }

    let (net, mut summary, curves, seconds, series) = match cfg.experiment.optimizer {
        Optimizer::EsPgpe => {
            let fitness = match data {
                Some(d) => TaskFitness::classify(
                    template.clone(),
                    target,
                    &d.train,
                    cfg.env.classify_steps,
                    cfg.env.classify_objective,
                )?,
                None => TaskFitness::Policy {
                    template: template.clone(),
                    target,
                    env: eval_env(cfg),
                },
            };
            let out = run_es(
                &cfg.es_config(),
                target.pack(&template),
                &fitness,
                fitness.episodes_per_eval(),
                checkpoint,
                CHECKPOINT_EVERY,
            )?;
            let net = target.unpack(&template, &out.state.center)?;
            let summary = RunSummary {
                final_reward: out.final_center(),
                final_population_mean: Some(out.final_population_mean()),
                final_training_return: Some(out.final_population_mean()),
                train_accuracy: None,
                test_accuracy: None,
                episodes: out.episodes,
                trainable_params,
                hidden: hidden.to_vec(),
            };
            let series = out
                .rows
                .iter()
                .map(|r| (r.generation, r.episodes, r.fitness_mean))
                .collect();
            (net, summary, csv_bytes(&out.rows)?, out.seconds, series)
        }
        Optimizer::BpttReinforce => {
            let out = run_reinforce(&template, target, eval_env(cfg), &cfg.bptt, seed)?;
            let summary = RunSummary {
                final_reward: out.final_reward,
                final_population_mean: None,
                final_training_return: Some(out.final_reward),
                train_accuracy: None,
                test_accuracy: None,
                episodes: out.episodes,
                trainable_params,
                hidden: hidden.to_vec(),
            };
            let series = out
                .rows
                .iter()
                .map(|r| (r.update, r.episodes, r.reward_mean))
                .collect();
            (out.net, summary, csv_bytes(&out.rows)?, out.seconds, series)
        }
        Optimizer::BpttSupervised => {
            let d = data.ok_or_else(|| {
                ExperimentError::Config("supervised training needs a dataset".into())
            })?;
            let out = run_supervised(
                &template,
                target,
                &d.train,
                cfg.env.classify_steps,
                &cfg.bptt,
                seed,
            )?;
            let summary = RunSummary {
                final_reward: out.final_reward,
                final_population_mean: None,
                final_training_return: None,
                train_accuracy: None,
                test_accuracy: None,
                episodes: out.episodes,
                trainable_params,
                hidden: hidden.to_vec(),
            };
            let series = out
                .rows
                .iter()
                .map(|r| (r.update, r.examples, r.accuracy))
                .collect();
            (out.net, summary, csv_bytes(&out.rows)?, out.seconds, series)
        }
    };
    if let Some(d) = data {
        summary.train_accuracy = Some(accuracy(&net, &d.train, cfg.env.classify_steps)?);
        if let Some(t) = &d.test {
            summary.test_accuracy = Some(accuracy(&net, t, cfg.env.classify_steps)?);
        }
    }
    Ok(Trained {
        curves,
        seconds,
        net: Some(net),
        summary,
        series,
    })
}

#[derive(Serialize)]
struct TimingRow {
    row: usize,
    seconds: f64,
}

pub(crate) fn write_timing(path: &Path, seconds: &[f64]) -> Result<(), ExperimentError> {
    let rows: Vec<TimingRow> = seconds
        .iter()
        .enumerate()
        .map(|(row, &seconds)| TimingRow { row, seconds })
        .collect();
    write_csv(path, &rows)
}

/// Directory a run of `cfg` writes into: `output_dir/name`.
pub fn run_directory(cfg: &ExperimentConfig) -> PathBuf {
    cfg.experiment.output_dir.join(&cfg.experiment.name)
}

/// Validates `cfg`, trains, and writes the run directory `dir`.
pub fn run_train(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary, ExperimentError> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    atomic_write(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    let data = load_datasets(cfg)?;
    let dims = match cfg.experiment.task {
        Task::Sphere => (0, 0),
        t => task_dims(t, data.as_ref().map(|d| &d.train))?,
    };
    let hidden = if cfg.experiment.task == Task::Sphere {
        Vec::new()
    } else {
        hidden_widths(cfg, cfg.network.param_budget, dims)?
    };
    let checkpoint =
        (cfg.experiment.optimizer == Optimizer::EsPgpe).then(|| dir.join("checkpoint.bin"));
    let trained = train(cfg, &hidden, data.as_ref(), checkpoint.as_deref())?;

    atomic_write(&dir.join("curves.csv"), &trained.curves)?;
    write_timing(&dir.join("timing.csv"), &trained.seconds)?;
    if let Some(net) = &trained.net {
        atomic_write(&dir.join("genome.csv"), &genome_csv(net)?)?;
        write_json(&dir.join("network.json"), net)?;
    }
    let meta = Metadata {
        name: cfg.experiment.name.clone(),
        task: cfg.experiment.task.name().into(),
        optimizer: cfg.experiment.optimizer.name().into(),
        config_sha256: config_hash(cfg),
        seed: cfg.experiment.seed,
        schema_version: CURVES_SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        episodes: trained.summary.episodes,
        trainable_params: trained.summary.trainable_params,
        summary: serde_json::to_value(&trained.summary).expect("summary serializes"),
    };
    write_json(&dir.join("metadata.json"), &meta)?;
    log::info!(
        "{}: final reward {:.4} after {} episodes ({:.1} s)",
        cfg.experiment.name,
        trained.summary.final_reward,
        trained.summary.episodes,
        meta.wall_time_s
    );
    Ok(trained.summary)
}
