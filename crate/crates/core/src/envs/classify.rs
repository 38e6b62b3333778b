//! Image classification by a feedforward SNN driven with a constant input.

use serde::{Deserialize, Serialize};

use crate::es::{Fitness, FitnessError};
use crate::neuron::{genome_unpack, NetworkSpec, SimError, Simulation};

use super::ImageDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyObjective {
    #[default]
    Accuracy,
    /// Negative mean cross-entropy of `softmax(logits)`.
    CrossEntropy,
}

/// Index of the largest value; ties go to the lowest index, NaN never wins.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &x) in v.iter().enumerate() {
        if x > best_v {
            best = i;
            best_v = x;
        }
    }
    best
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Presents `image` for `steps` steps and returns the readout after the last step.
pub fn classify_episode(
    net: &NetworkSpec,
    image: &[f64],
    steps: usize,
) -> Result<Vec<f64>, SimError> {
    let current = net.input_current(image)?;
    classify_with_current(net, &current, steps)
}

/// Same as [`classify_episode`] with the first-layer current already computed.
pub fn classify_with_current(
    net: &NetworkSpec,
    current: &[f64],
    steps: usize,
) -> Result<Vec<f64>, SimError> {
    if steps == 0 {
        return Err(SimError::InvalidNetwork(
            "classification needs at least one step".into(),
        ));
    }
    let mut sim = Simulation::new(net, false);
    for _ in 0..steps {
        sim.step_with_current(current)?;
    }
    Ok(sim.readout().to_vec())
}

/// First-layer currents of every image in `ds` (pixels scaled to [0, 1]).
///
/// They depend only on the input weights and gain, so an optimizer that
/// changes neuron properties alone can reuse them across genomes.
pub fn input_currents(net: &NetworkSpec, ds: &ImageDataset) -> Result<Vec<Vec<f64>>, SimError> {
    (0..ds.len())
        .map(|i| net.input_current(&ds.image_normalized(i)))
        .collect()
}

pub fn accuracy(net: &NetworkSpec, ds: &ImageDataset, steps: usize) -> Result<f64, SimError> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for i in 0..ds.len() {
        let logits = classify_episode(net, &ds.image_normalized(i), steps)?;
        if argmax(&logits) == ds.labels[i] as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// ES fitness over a fixed evaluation set, for genomes of neuron properties.
pub struct ClassifyFitness {
    template: NetworkSpec,
    currents: Vec<Vec<f64>>,
    labels: Vec<u8>,
    steps: usize,
    objective: ClassifyObjective,
}

impl ClassifyFitness {
    pub fn new(
        template: NetworkSpec,
        ds: &ImageDataset,
        steps: usize,
        objective: ClassifyObjective,
    ) -> Result<Self, SimError> {
        let currents = input_currents(&template, ds)?;
        Ok(Self {
            template,
            currents,
            labels: ds.labels.clone(),
            steps,
            objective,
        })
    }

    pub fn score(&self, net: &NetworkSpec) -> Result<f64, SimError> {
        if self.labels.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (c, &label) in self.currents.iter().zip(&self.labels) {
            let logits = classify_with_current(net, c, self.steps)?;
            total += match self.objective {
                ClassifyObjective::Accuracy => (argmax(&logits) == label as usize) as u8 as f64,
                ClassifyObjective::CrossEntropy => -cross_entropy(&logits, label as usize),
            };
        }
        Ok(total / self.labels.len() as f64)
    }
}

impl Fitness for ClassifyFitness {
    fn evaluate(&self, genome: &[f64], _episode_seed: u64) -> Result<f64, FitnessError> {
        let net = genome_unpack(&self.template, genome)?;
        Ok(self.score(&net)?)
    }
}
