use crate::envs::{
    argmax, rollout, CartPoleEnv, CartPoleParams, ClassifyFitness, ClassifyObjective, EnvError,
    Environment, ImageDataset, MemoryLengthEnv, Policy,
};
use crate::es::{Fitness, FitnessError};
use crate::neuron::{
    genome_len, genome_pack, genome_unpack, init_weights, weights_len, weights_pack,
    weights_unpack, NetworkSpec, SimError, Simulation, TrainableMask,
};

use super::{ExperimentConfig, ExperimentError, Task, TrainTarget};

/// `(input, output)` widths of the policy network for `task`.
pub fn task_dims(
    task: Task,
    dataset: Option<&ImageDataset>,
) -> Result<(usize, usize), ExperimentError> {
    match task {
        Task::Memory => Ok((2, 2)),
        Task::Cartpole => Ok((4, 2)),
        Task::Classify => {
            let ds = dataset
                .ok_or_else(|| ExperimentError::Config("classification needs a dataset".into()))?;
            let classes = ds
                .labels
                .iter()
                .copied()
                .max()
                .map_or(10, |m| (m as usize + 1).max(10));
            Ok((ds.pixels_per_image(), classes))
        }
        Task::Sphere => Err(ExperimentError::Config(
            "the sphere task has no network".into(),
        )),
    }
}

/// Hidden width of a single-hidden-layer network whose trainable count is
/// closest to `target`.
///
/// Neuron training counts `mask.count()` values per LIF neuron (hidden and
/// output); weight training counts `h * (n_in + n_out)` weights.
pub fn solve_width(
    target: usize,
    train: TrainTarget,
    mask: TrainableMask,
    n_in: usize,
    n_out: usize,
) -> Result<usize, ExperimentError> {
    let h = match train {
        TrainTarget::Neurons => {
            let m = mask.count();
            if m == 0 {
                return Err(ExperimentError::Config(
                    "the all-false mask has an empty genome".into(),
                ));
            }
            (target as f64 / m as f64 - n_out as f64).round()
        }
        TrainTarget::Weights => (target as f64 / (n_in + n_out) as f64).round(),
    };
    if h < 1.0 {
        return Err(ExperimentError::Config(format!(
            "parameter budget {target} is too small for a hidden layer"
        )));
    }
    Ok(h as usize)
}

/// Network with the configured neuron defaults and LeCun weights.
pub fn build_network(
    cfg: &ExperimentConfig,
    hidden: &[usize],
    dims: (usize, usize),
) -> Result<NetworkSpec, ExperimentError> {
    let mut sizes = vec![dims.0];
    sizes.extend_from_slice(hidden);
    sizes.push(dims.1);
    let weights = init_weights(&sizes, cfg.weight_seed());
    let p = cfg.neuron.params();
    let params = sizes[1..].iter().map(|&n| vec![p; n]).collect();
    let mut net = NetworkSpec::new(sizes, weights, params)?;
    net.delta_t = cfg.neuron.dt_ms * 1e-3;
    net.trainable = cfg.network.mask()?;
    net.readout = cfg.network.readout;
    net.input_gain = cfg.network.input_gain;
    net.validate()?;
    Ok(net)
}

/// Hidden widths for `cfg`, solving for the parameter budget when one is set.
pub(crate) fn hidden_widths(
    cfg: &ExperimentConfig,
    budget: Option<usize>,
    dims: (usize, usize),
) -> Result<Vec<usize>, ExperimentError> {
    match budget {
        Some(b) => Ok(vec![solve_width(
            b,
            cfg.network.train,
            cfg.network.mask()?,
            dims.0,
            dims.1,
        )?]),
        None => Ok(cfg.network.hidden.clone()),
    }
}

/// What an optimizer vector encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Neurons,
    Weights,
}

impl From<TrainTarget> for Target {
    fn from(t: TrainTarget) -> Self {
        match t {
            TrainTarget::Neurons => Target::Neurons,
            TrainTarget::Weights => Target::Weights,
        }
    }
}

impl Target {
    pub fn len(self, net: &NetworkSpec) -> usize {
        match self {
            Target::Neurons => genome_len(net),
            Target::Weights => weights_len(net),
        }
    }

    pub fn pack(self, net: &NetworkSpec) -> Vec<f64> {
        match self {
            Target::Neurons => genome_pack(net),
            Target::Weights => weights_pack(net),
        }
    }

    pub fn unpack(self, net: &NetworkSpec, x: &[f64]) -> Result<NetworkSpec, SimError> {
        match self {
            Target::Neurons => genome_unpack(net, x),
            Target::Weights => weights_unpack(net, x),
        }
    }
}

/// Reinforcement environments the runners know how to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalEnv {
    Memory {
        length: usize,
    },
    CartPole {
        max_steps: usize,
        params: CartPoleParams,
    },
}

impl EvalEnv {
    pub fn make(&self) -> Box<dyn Environment> {
        match *self {
            EvalEnv::Memory { length } => Box::new(MemoryLengthEnv::new(length)),
            EvalEnv::CartPole { max_steps, params } => {
                Box::new(CartPoleEnv::with_params(params, max_steps))
            }
        }
    }

    /// Episodes consumed by one greedy evaluation.
    pub fn episodes_per_eval(&self) -> u64 {
        match self {
            EvalEnv::Memory { .. } => 2,
            EvalEnv::CartPole { .. } => 1,
        }
    }

    /// Greedy return. The memory task is scored exactly over both cues.
    pub fn greedy_return(&self, net: &NetworkSpec, seed: u64) -> Result<f64, EnvError> {
        match *self {
            EvalEnv::Memory { length } => {
                Ok(0.5 * (memory_reward(net, length, 1.0)? + memory_reward(net, length, -1.0)?))
            }
            EvalEnv::CartPole { .. } => {
                Ok(rollout(net, self.make().as_mut(), seed, Policy::Greedy, false)?.ret)
            }
        }
    }
}

/// Greedy return of one memory episode with cue `c0`.
pub fn memory_reward(net: &NetworkSpec, length: usize, c0: f64) -> Result<f64, EnvError> {
    let mut env = MemoryLengthEnv::new(length);
    let mut obs = env.reset_with_context(c0);
    let mut sim = Simulation::new(net, false);
    let mut ret = 0.0;
    loop {
        let action = argmax(sim.step(&obs)?);
        let r = env.step(action)?;
        ret += r.reward;
        obs = r.observation;
        if r.done {
            return Ok(ret);
        }
    }
}

/// Fitness of a configured task, for genomes in the layout of `target`.
pub enum TaskFitness {
    /// `sum x^2` (a loss).
    Sphere,
    Policy {
        template: NetworkSpec,
        target: Target,
        env: EvalEnv,
    },
    /// Neuron genomes reuse the first-layer currents of the fixed weights.
    ClassifyNeurons(ClassifyFitness),
    ClassifyWeights {
        template: NetworkSpec,
        data: ImageDataset,
        steps: usize,
        objective: ClassifyObjective,
    },
}

impl TaskFitness {
    pub fn classify(
        template: NetworkSpec,
        target: Target,
        data: &ImageDataset,
        steps: usize,
        objective: ClassifyObjective,
    ) -> Result<Self, SimError> {
        Ok(match target {
            Target::Neurons => TaskFitness::ClassifyNeurons(ClassifyFitness::new(
                template, data, steps, objective,
            )?),
            Target::Weights => TaskFitness::ClassifyWeights {
                template,
                data: data.clone(),
                steps,
                objective,
            },
        })
    }

    /// Environment episodes per fitness evaluation (0 for the sphere).
    pub fn episodes_per_eval(&self) -> u64 {
        match self {
            TaskFitness::Sphere => 0,
            TaskFitness::Policy { env, .. } => env.episodes_per_eval(),
            TaskFitness::ClassifyNeurons(_) | TaskFitness::ClassifyWeights { .. } => 1,
        }
    }
}

impl Fitness for TaskFitness {
    fn evaluate(&self, genome: &[f64], seed: u64) -> Result<f64, FitnessError> {
        match self {
            TaskFitness::Sphere => Ok(genome.iter().map(|x| x * x).sum()),
            TaskFitness::Policy {
                template,
                target,
                env,
            } => {
                let net = target.unpack(template, genome)?;
                Ok(env.greedy_return(&net, seed)?)
            }
            TaskFitness::ClassifyNeurons(f) => f.evaluate(genome, seed),
            TaskFitness::ClassifyWeights {
                template,
                data,
                steps,
                objective,
            } => {
                let net = weights_unpack(template, genome)?;
                Ok(ClassifyFitness::new(net.clone(), data, *steps, *objective)?.score(&net)?)
            }
        }
    }
}
