//! Experiment configuration and runners behind the `hetsnn` binary.
//!
//! A run writes into its own directory:
//! - `config.toml`: the fully resolved configuration;
//! - `curves.csv`: one row per ES generation or BPTT update;
//! - `timing.csv`: wall-clock seconds per row of `curves.csv`;
//! - `genome.csv`: final per-neuron properties;
//! - `network.json`: the final network;
//! - `metadata.json`: config hash, seed, wall time, episode count, summary;
//! - `checkpoint.bin`: ES state (ES runs only).
//!
//! `curves.csv` is a pure function of `config.toml`; all other timing
//! information is kept out of it.

mod ablate;
mod bptt_run;
mod build;
mod compare;
mod config;
mod es_run;
mod io;
mod tools;
mod train;

pub use ablate::{run_ablate, AblateRow};
pub use bptt_run::{run_reinforce, run_supervised, BpttOutcome, ReinforceRow, SupervisedRow};
pub use build::{
    build_network, memory_reward, solve_width, task_dims, EvalEnv, Target, TaskFitness,
};
pub use compare::{run_compare, CompareRow, CompareSummary};
pub use config::{
    AblateSection, BpttSection, CompareSection, EnvSection, ExperimentConfig, ExperimentSection,
    Method, NetworkSection, NeuronSection, Optimizer, SurrogateSpec, Task, TrainTarget,
};
pub use es_run::{run_es, EsCurveRow, EsOutcome, CENTER_MEMBER};
pub use io::{atomic_write, config_hash, genome_csv, Metadata, CURVES_SCHEMA_VERSION};
pub use tools::{
    fitdist, gradcheck, random_grad_case, shapley_from_csv, stats, write_shapley_report, FitRow,
    GradCase, GradCheckReport,
};
pub use train::{run_directory, run_train, RunSummary};

use std::path::PathBuf;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::envs::{EnvError, IdxError};
use crate::es::EsError;
use crate::grad::GradError;
use crate::neuron::SimError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Es(#[from] EsError),
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Failed(String),
}

impl ExperimentError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
