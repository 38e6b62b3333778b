use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::ClassifyObjective;
use crate::es::EsConfig;
use crate::grad::{Baseline, GradMode, Surrogate, SurrogateKind};
use crate::neuron::{NeuronParams, ReadoutMode, TrainableMask};

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Sphere,
    Memory,
    Cartpole,
    Classify,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Sphere => "sphere",
            Task::Memory => "memory",
            Task::Cartpole => "cartpole",
            Task::Classify => "classify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    EsPgpe,
    BpttReinforce,
    BpttSupervised,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::EsPgpe => "es_pgpe",
            Optimizer::BpttReinforce => "bptt_reinforce",
            Optimizer::BpttSupervised => "bptt_supervised",
        }
    }
}

/// What the optimizer changes: neuron properties (weights fixed) or weights
/// (neuron properties fixed at their defaults).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainTarget {
    #[default]
    Neurons,
    Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub task: Task,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Independent runs for `ablate` and `compare`, seeded `seed, seed + 1, ...`.
    pub repeats: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: "run".into(),
            task: Task::Sphere,
            optimizer: Optimizer::EsPgpe,
            seed: 0,
            repeats: 1,
            output_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    /// When set, a single hidden layer is sized to this many trainable parameters.
    pub param_budget: Option<usize>,
    pub train: TrainTarget,
    /// Trainable properties as a bit string in the order tau_m, v_th, v_rest, R.
    pub trainable: String,
    pub readout: ReadoutMode,
    pub input_gain: f64,
    /// Seed of the weight initialization; defaults to the experiment seed.
    pub weight_seed: Option<u64>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            param_budget: None,
            train: TrainTarget::Neurons,
            trainable: "1111".into(),
            readout: ReadoutMode::MembranePotential,
            input_gain: 1.0,
            weight_seed: None,
        }
    }
}

impl NetworkSection {
    pub fn mask(&self) -> Result<TrainableMask, ExperimentError> {
        TrainableMask::parse_bit_string(&self.trainable).ok_or_else(|| {
            ExperimentError::Config(format!("bad trainable mask {:?}", self.trainable))
        })
    }
}

/// Initial neuron parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronSection {
    pub dt_ms: f64,
    pub tau_m_ms: f64,
    pub v_th: f64,
    pub v_rest: f64,
    pub r_mem: f64,
}

impl Default for NeuronSection {
    fn default() -> Self {
        Self {
            dt_ms: 5.0,
            tau_m_ms: 20.0,
            v_th: 0.5,
            v_rest: 0.0,
            r_mem: 5e7,
        }
    }
}

impl NeuronSection {
    pub fn params(&self) -> NeuronParams {
        NeuronParams::from_physical(
            self.tau_m_ms * 1e-3,
            self.v_th,
            self.v_rest,
            self.r_mem,
            self.dt_ms * 1e-3,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpttSection {
    pub lr: f64,
    pub surrogate: SurrogateKind,
    pub alpha: f64,
    pub grad_mode: GradMode,
    /// Episodes (or images) per update.
    pub batch: usize,
    pub updates: usize,
    /// Inverse temperature of the softmax over readout potentials.
    pub beta: f64,
    pub baseline: Baseline,
    /// Number of most recent episodes averaged into the final reward.
    pub final_window: usize,
}

impl Default for BpttSection {
    fn default() -> Self {
        Self {
            lr: 3e-2,
            surrogate: SurrogateKind::Rectangular,
            alpha: 2.0,
            grad_mode: GradMode::Full,
            batch: 16,
            updates: 240,
            beta: 1.0,
            baseline: Baseline::BatchMean,
            final_window: 128,
        }
    }
}

impl BpttSection {
    pub fn surrogate(&self) -> Surrogate {
        match self.surrogate {
            SurrogateKind::Rectangular => Surrogate::rectangular(),
            SurrogateKind::Arctan => Surrogate::arctan(self.alpha),
            SurrogateKind::LogNonzeroSign => Surrogate::log_nonzero_sign(self.alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub memory_length: usize,
    pub max_steps: usize,
    pub sphere_dim: usize,
    pub sphere_init: f64,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Use only the first `train_limit` training images.
    pub train_limit: Option<usize>,
    pub classify_steps: usize,
    pub classify_objective: ClassifyObjective,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            memory_length: 10,
            max_steps: 500,
            sphere_dim: 32,
            sphere_init: 1.0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            train_limit: None,
            classify_steps: 4,
            classify_objective: ClassifyObjective::Accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct AblateSection {
    /// Masks to train; empty means all 15 nonempty masks.
    pub masks: Vec<String>,
    /// Trainable parameters per run; the hidden width is solved per mask.
    pub param_budget: Option<usize>,
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EsNeuron,
    EsWeight,
    BpNeuron,
    BpWeight,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::EsNeuron,
        Method::EsWeight,
        Method::BpNeuron,
        Method::BpWeight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::EsNeuron => "es_neuron",
            Method::EsWeight => "es_weight",
            Method::BpNeuron => "bp_neuron",
            Method::BpWeight => "bp_weight",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub horizons: Vec<usize>,
    pub methods: Vec<Method>,
    /// Environment episodes per run, shared by every method.
    pub episode_budget: usize,
    pub es_population: usize,
    /// BPTT learning rates to sweep; empty means `bptt.lr`.
    pub bp_lrs: Vec<f64>,
    /// Surrogates to sweep; empty means the `bptt` surrogate.
    pub surrogates: Vec<SurrogateSpec>,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            horizons: vec![100, 200, 500, 1000],
            methods: Method::ALL.to_vec(),
            episode_budget: 3840,
            es_population: 128,
            bp_lrs: Vec::new(),
            surrogates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub network: NetworkSection,
    pub neuron: NeuronSection,
    pub es: EsConfig,
    pub bptt: BpttSection,
    pub env: EnvSection,
    pub ablate: AblateSection,
    pub compare: CompareSection,
}

fn check_file(field: &str, p: &Option<PathBuf>) -> Result<(), ExperimentError> {
    match p {
        None => Err(ExperimentError::Config(format!("env.{field} is required"))),
        Some(p) if !p.is_file() => Err(ExperimentError::Config(format!(
            "env.{field}: {} does not exist",
            p.display()
        ))),
        Some(_) => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative dataset paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.env.train_images,
            &mut self.env.train_labels,
            &mut self.env.test_images,
            &mut self.env.test_labels,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn weight_seed(&self) -> u64 {
        self.network.weight_seed.unwrap_or(self.experiment.seed)
    }

    /// ES settings with the experiment seed applied.
    pub fn es_config(&self) -> EsConfig {
        EsConfig {
            seed: self.experiment.seed,
            ..self.es.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let task = self.experiment.task;
        let opt = self.experiment.optimizer;
        match (task, opt) {
            (Task::Sphere, Optimizer::EsPgpe) => {}
            (Task::Sphere, _) => return bad("the sphere task only supports es_pgpe".into()),
            (Task::Memory | Task::Cartpole, Optimizer::BpttSupervised) => {
                return bad(format!(
                    "{} is a reinforcement task; use bptt_reinforce",
                    task.name()
                ))
            }
            (Task::Classify, Optimizer::BpttReinforce) => {
                return bad("classification uses bptt_supervised".into())
            }
            _ => {}
        }
        if opt == Optimizer::EsPgpe {
            self.es
                .validate()
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        } else {
            let b = &self.bptt;
            if !(b.lr > 0.0 && b.lr.is_finite()) {
                return bad("bptt.lr must be positive".into());
            }
            if b.batch == 0 || b.updates == 0 || b.final_window == 0 {
                return bad(
                    "bptt.batch, bptt.updates and bptt.final_window must be positive".into(),
                );
            }
            if !(b.beta > 0.0) || !(b.alpha > 0.0) {
                return bad("bptt.beta and bptt.alpha must be positive".into());
            }
            if self.network.readout != ReadoutMode::MembranePotential {
                return bad("BPTT optimizers need the membrane_potential readout".into());
            }
        }
        if self.experiment.repeats == 0 {
            return bad("experiment.repeats must be positive".into());
        }
        let n = &self.neuron;
        if !(n.dt_ms > 0.0 && n.tau_m_ms > n.dt_ms) {
            return bad("neuron.tau_m_ms must exceed neuron.dt_ms > 0".into());
        }
        if !(n.r_mem > 0.0) || !n.v_th.is_finite() || !n.v_rest.is_finite() {
            return bad("neuron parameters must be finite with r_mem > 0".into());
        }
        if task != Task::Sphere {
            let mask = self.network.mask()?;
            if self.network.train == TrainTarget::Neurons && mask == TrainableMask::NONE {
                return bad("network.trainable is empty: nothing to optimize".into());
            }
            if self.network.param_budget.is_none() && self.network.hidden.contains(&0) {
                return bad("network.hidden widths must be positive".into());
            }
            if !(self.network.input_gain.is_finite()) {
                return bad("network.input_gain must be finite".into());
            }
        }
        match task {
            Task::Sphere if self.env.sphere_dim == 0 => {
                return bad("env.sphere_dim must be positive".into())
            }
            Task::Memory if self.env.memory_length == 0 => {
                return bad("env.memory_length must be at least 1".into())
            }
            Task::Cartpole if self.env.max_steps == 0 => {
                return bad("env.max_steps must be positive".into())
            }
            Task::Classify => {
                check_file("train_images", &self.env.train_images)?;
                check_file("train_labels", &self.env.train_labels)?;
                if self.env.test_images.is_some() || self.env.test_labels.is_some() {
                    check_file("test_images", &self.env.test_images)?;
                    check_file("test_labels", &self.env.test_labels)?;
                }
                if self.env.classify_steps == 0 {
                    return bad("env.classify_steps must be positive".into());
                }
            }
            _ => {}
        }
        for m in &self.ablate.masks {
            match TrainableMask::parse_bit_string(m) {
                None => return bad(format!("ablate.masks: bad mask {m:?}")),
                Some(TrainableMask::NONE) => {
                    return bad("ablate.masks: the all-false mask has an empty genome".into())
                }
                Some(_) => {}
            }
        }
        let distinct: std::collections::BTreeSet<&String> = self.ablate.masks.iter().collect();
        if distinct.len() != self.ablate.masks.len() {
            return bad("ablate.masks must be distinct".into());
        }
        Ok(())
    }
}
