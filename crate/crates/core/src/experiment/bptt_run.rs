use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::envs::{argmax, cross_entropy, rollout, EnvError, ImageDataset, Policy};
use crate::es::{episode_seed, noise_seed};
use crate::grad::{backward, reinforce_update, softmax, Adam, Episode, Gradients};
use crate::neuron::{forward, NetworkSpec};

use super::{BpttSection, EvalEnv, ExperimentError, Target};

/// One row of a REINFORCE `curves.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReinforceRow {
    pub update: u64,
    /// Cumulative training episodes after this update.
    pub episodes: u64,
    pub reward_mean: f64,
    pub reward_max: f64,
    pub reward_min: f64,
    pub grad_norm: f64,
}

/// One row of a supervised `curves.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupervisedRow {
    pub update: u64,
    /// Cumulative training examples after this update.
    pub examples: u64,
    pub loss: f64,
    pub accuracy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct BpttOutcome<R> {
    pub net: NetworkSpec,
    pub rows: Vec<R>,
    pub seconds: Vec<f64>,
    pub episodes: u64,
    /// Mean return of the last `final_window` training episodes (REINFORCE)
    /// or mean batch accuracy of the last update (supervised).
    pub final_reward: f64,
}

fn flatten(g: &Gradients, target: Target) -> Vec<f64> {
    match target {
        Target::Neurons => g.genome.clone(),
        Target::Weights => g.weights_flat(),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Applies one Adam step to `params` along `grad` unless it is non-finite.
fn apply(adam: &mut Adam, params: &mut [f64], grad: &[f64], update: u64) -> f64 {
    let n = norm(grad);
    if n.is_finite() {
        adam.step(params, grad);
    } else {
        log::warn!("update {update}: non-finite gradient, step skipped");
    }
    n
}

/// Policy-gradient training with a softmax policy over readout potentials.
pub fn run_reinforce(
    net: &NetworkSpec,
    target: Target,
    env: EvalEnv,
    b: &BpttSection,
    seed: u64,
) -> Result<BpttOutcome<ReinforceRow>, ExperimentError> {
    let surrogate = b.surrogate();
    let mut params = target.pack(net);
    let mut adam = Adam::new(params.len(), b.lr);
    let mut rows = Vec::with_capacity(b.updates);
    let mut seconds = Vec::with_capacity(b.updates);
    let mut returns = Vec::with_capacity(b.updates * b.batch);
    let policy = Policy::Softmax { beta: b.beta };
    for u in 0..b.updates as u64 {
        let start = Instant::now();
        let cur = target.unpack(net, &params)?;
        let episodes: Vec<Episode> = (0..b.batch as u64)
            .into_par_iter()
            .map(|m| {
                let mut e = env.make();
                let r = rollout(&cur, e.as_mut(), episode_seed(seed, u, m, 0), policy, true)?;
                Ok::<_, EnvError>(Episode {
                    trajectory: r.trajectory.expect("recording enabled"),
                    actions: r.actions,
                    ret: r.ret,
                })
            })
            .collect::<Result<_, _>>()?;
        let grads = reinforce_update(&cur, &episodes, &surrogate, b.grad_mode, b.baseline, b.beta)?;
        let descent: Vec<f64> = flatten(&grads, target).iter().map(|g| -g).collect();
        let grad_norm = apply(&mut adam, &mut params, &descent, u);

        let rets: Vec<f64> = episodes.iter().map(|e| e.ret).collect();
        returns.extend_from_slice(&rets);
        rows.push(ReinforceRow {
            update: u,
            episodes: returns.len() as u64,
            reward_mean: rets.iter().sum::<f64>() / rets.len() as f64,
            reward_max: rets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            reward_min: rets.iter().copied().fold(f64::INFINITY, f64::min),
            grad_norm,
        });
        seconds.push(start.elapsed().as_secs_f64());
    }
    let window = &returns[returns.len().saturating_sub(b.final_window)..];
    Ok(BpttOutcome {
        net: target.unpack(net, &params)?,
        rows,
        seconds,
        episodes: returns.len() as u64,
        final_reward: window.iter().sum::<f64>() / window.len() as f64,
    })
}

/// Cross-entropy training on the readout after the last presentation step.
pub fn run_supervised(
    net: &NetworkSpec,
    target: Target,
    data: &ImageDataset,
    steps: usize,
    b: &BpttSection,
    seed: u64,
) -> Result<BpttOutcome<SupervisedRow>, ExperimentError> {
    if data.is_empty() {
        return Err(ExperimentError::Config("empty training set".into()));
    }
    let surrogate = b.surrogate();
    let mut params = target.pack(net);
    let mut adam = Adam::new(params.len(), b.lr);
    let mut rows = Vec::with_capacity(b.updates);
    let mut seconds = Vec::with_capacity(b.updates);
    for u in 0..b.updates as u64 {
        let start = Instant::now();
        let cur = target.unpack(net, &params)?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(seed, u));
        let batch: Vec<usize> = (0..b.batch)
            .map(|_| rng.random_range(0..data.len()))
            .collect();
        let per_example: Vec<(Gradients, f64, bool)> = batch
            .par_iter()
            .map(|&i| {
                let image = data.image_normalized(i);
                let label = data.labels[i] as usize;
                let (outputs, traj) = forward(&cur, &vec![image; steps])?;
                let logits = outputs.last().expect("at least one step");
                let p = softmax(logits, 1.0);
                let mut loss_grads = vec![vec![0.0; logits.len()]; steps];
                loss_grads[steps - 1] = p
                    .iter()
                    .enumerate()
                    .map(|(j, pj)| (pj - (j == label) as u8 as f64) / b.batch as f64)
                    .collect();
                let g = backward(&cur, &traj, &loss_grads, &surrogate, b.grad_mode)?;
                Ok::<_, ExperimentError>((g, cross_entropy(logits, label), argmax(logits) == label))
            })
            .collect::<Result<_, _>>()?;
        let mut total = Gradients::zeros(&cur);
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (g, l, c) in &per_example {
            total.add_scaled(g, 1.0);
            loss += l;
            correct += *c as usize;
        }
        let grad_norm = apply(&mut adam, &mut params, &flatten(&total, target), u);
        rows.push(SupervisedRow {
            update: u,
            examples: (u + 1) * b.batch as u64,
            loss: loss / b.batch as f64,
            accuracy: correct as f64 / b.batch as f64,
            grad_norm,
        });
        seconds.push(start.elapsed().as_secs_f64());
    }
    let last = rows.last().map_or(f64::NAN, |r| r.accuracy);
    Ok(BpttOutcome {
        net: target.unpack(net, &params)?,
        rows,
        seconds,
        episodes: b.updates as u64 * b.batch as u64,
        final_reward: last,
    })
}
