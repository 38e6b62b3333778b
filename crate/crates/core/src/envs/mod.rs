//! Task environments and the glue that runs a network as a policy.

mod cartpole;
mod classify;
mod idx;
mod memory;

pub use cartpole::{CartPoleEnv, CartPoleParams, CartPoleState};
pub use classify::{
    accuracy, argmax, classify_episode, classify_with_current, cross_entropy, input_currents,
    ClassifyFitness, ClassifyObjective,
};
pub use idx::{
    load_dataset, load_idx_images, load_idx_labels, parse_idx_images, parse_idx_labels,
    write_idx_images, write_idx_labels, IdxError, ImageDataset, Split, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use memory::MemoryLengthEnv;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grad::softmax;
use crate::neuron::{NetworkSpec, SimError, Simulation, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called after the episode finished; call reset first")]
    EpisodeDone,
    #[error("step called before reset")]
    NotReset,
    #[error("action {action} out of range for {n} discrete actions")]
    InvalidAction { action: usize, n: usize },
    #[error("policy network: {0}")]
    Sim(#[from] SimError),
    #[error("policy has {got} outputs, environment has {expected} actions")]
    PolicyShape { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous { low: Vec<f64>, high: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with discrete actions indexed from 0.
pub trait Environment: Send {
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;
    fn observation_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn max_steps(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    /// Argmax of the readout, lowest index on ties.
    Greedy,
    /// Sample from `softmax(beta * readout)`.
    Softmax { beta: f64 },
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub ret: f64,
    pub steps: usize,
    pub actions: Vec<usize>,
    pub trajectory: Option<Trajectory>,
}

const ACTION_STREAM: u64 = 0xA5A5_5A5A_0F0F_F0F0;

/// Runs one episode with the network as policy. The network sees one
/// observation per step; its readout after that step selects the action.
pub fn rollout(
    net: &NetworkSpec,
    env: &mut dyn Environment,
    seed: u64,
    policy: Policy,
    record: bool,
) -> Result<Rollout, EnvError> {
    let n_actions = match env.action_space() {
        ActionSpace::Discrete(n) => n,
        ActionSpace::Continuous { low, .. } => {
            return Err(EnvError::PolicyShape {
                expected: low.len(),
                got: net.output_dim(),
            })
        }
    };
    if net.output_dim() != n_actions {
        return Err(EnvError::PolicyShape {
            expected: n_actions,
            got: net.output_dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ACTION_STREAM);
    let mut sim = Simulation::new(net, record);
    let mut obs = env.reset(seed);
    let mut ret = 0.0;
    let mut actions = Vec::new();
    loop {
        let out = sim.step(&obs)?;
        let action = match policy {
            Policy::Greedy => argmax(out),
            Policy::Softmax { beta } => {
                let p = softmax(out, beta);
                let x: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = p.len() - 1;
                for (i, pi) in p.iter().enumerate() {
                    acc += pi;
                    if x < acc {
                        pick = i;
                        break;
                    }
                }
                pick
            }
        };
        let r = env.step(action)?;
        actions.push(action);
        ret += r.reward;
        obs = r.observation;
        if r.done {
            break;
        }
    }
    Ok(Rollout {
        ret,
        steps: actions.len(),
        actions,
        trajectory: sim.into_trajectory(),
    })
}
