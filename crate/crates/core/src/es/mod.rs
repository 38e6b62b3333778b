//! Evolution strategies over flat genomes.
//!
//! Two optimizers share one evaluation harness:
//! - plain ES: `M` independent Gaussian perturbations, gradient estimate
//!   `(1/M) sum_j (eps_j / sigma) (L_j - mean L)`, fixed scalar `sigma`;
//! - PGPE: `M/2` antithetic pairs `center +- sigma * eps`, per-dimension
//!   `sigma` adapted from the pair means.
//!
//! All randomness is counter-based: the perturbation noise of a generation
//! and every episode seed are pure functions of `(seed, generation, member,
//! episode)`, so results do not depend on evaluation order or thread count.

mod checkpoint;
mod seed;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use seed::{episode_seed, noise_seed};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SIGMA_MIN: f64 = 1e-4;
pub const SIGMA_MAX: f64 = 1.0;

pub type FitnessError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum EsError {
    #[error("invalid ES configuration: {0}")]
    InvalidConfig(String),
    #[error("empty sample batch")]
    EmptyBatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("generation {generation}: every population member had a non-finite fitness")]
    AllExcluded { generation: u64 },
    #[error("fitness evaluation failed for member {member}: {source}")]
    Fitness {
        member: usize,
        #[source]
        source: FitnessError,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    VanillaEs,
    #[default]
    Pgpe,
}

/// Whether fitness is a reward (ascend) or a loss (descend).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsConfig {
    pub population: usize,
    pub sigma0: f64,
    pub lr_center: f64,
    pub lr_sigma: f64,
    pub generations: u64,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub direction: Direction,
    /// Replace fitnesses by centered ranks in [-0.5, 0.5] before estimating.
    pub rank_shaping: bool,
    pub episodes_per_genome: usize,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            population: 256,
            sigma0: 0.1,
            lr_center: 0.15,
            lr_sigma: 0.1,
            generations: 1000,
            seed: 0,
            algorithm: Algorithm::Pgpe,
            direction: Direction::Maximize,
            rank_shaping: false,
            episodes_per_genome: 1,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<(), EsError> {
        let bad = |m: &str| Err(EsError::InvalidConfig(m.to_string()));
        if self.population == 0 {
            return bad("population must be positive");
        }
        if self.algorithm == Algorithm::Pgpe && !self.population.is_multiple_of(2) {
            return bad("population must be even for symmetric sampling");
        }
        for (name, x) in [
            ("sigma0", self.sigma0),
            ("lr_center", self.lr_center),
            ("lr_sigma", self.lr_sigma),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return bad(&format!("{name} must be positive and finite"));
            }
        }
        if self.generations == 0 {
            return bad("generations must be positive");
        }
        if self.episodes_per_genome == 0 {
            return bad("episodes_per_genome must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsState {
    pub center: Vec<f64>,
    /// Per-dimension search width, kept in `[SIGMA_MIN, SIGMA_MAX]`.
    pub sigma: Vec<f64>,
    /// Number of completed generations.
    pub generation: u64,
    /// Base seed of all counter-based streams.
    pub seed: u64,
}

impl EsState {
    pub fn new(center: Vec<f64>, cfg: &EsConfig) -> Self {
        let sigma = vec![cfg.sigma0.clamp(SIGMA_MIN, SIGMA_MAX); center.len()];
        Self {
            center,
            sigma,
            generation: 0,
            seed: cfg.seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn sigma_mean(&self) -> f64 {
        if self.sigma.is_empty() {
            0.0
        } else {
            self.sigma.iter().sum::<f64>() / self.sigma.len() as f64
        }
    }
}

/// Summary of one generation's population fitness (finite values only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    /// Index of the generation these fitnesses belong to.
    pub generation: u64,
    pub fitness_mean: f64,
    pub fitness_max: f64,
    pub fitness_min: f64,
    /// Mean search width after the update.
    pub sigma_mean: f64,
    pub excluded: usize,
}

/// Plain ES gradient estimate `(1/M) sum_j (eps_j / sigma) (L_j - mean L)`.
///
/// Each sample is `(eps_j, L_j)` with `L_j = L(theta + sigma * eps_j)`.
pub fn es_gradient(sigma: f64, samples: &[(Vec<f64>, f64)]) -> Result<Vec<f64>, EsError> {
    let first = samples.first().ok_or(EsError::EmptyBatch)?;
    let dim = first.0.len();
    let m = samples.len() as f64;
    let baseline = samples.iter().map(|s| s.1).sum::<f64>() / m;
    let mut g = vec![0.0; dim];
    for (eps, l) in samples {
        if eps.len() != dim {
            return Err(EsError::Dimension {
                expected: dim,
                got: eps.len(),
            });
        }
        let w = (l - baseline) / sigma;
        for (gi, e) in g.iter_mut().zip(eps) {
            *gi += w * e;
        }
    }
    g.iter_mut().for_each(|x| *x /= m);
    Ok(g)
}

/// Center gradient from antithetic pairs `(eps_j, r_plus_j, r_minus_j)`:
/// `(1/P) sum_j eps_j (r_plus - r_minus) / (2 sigma)` per dimension.
pub fn antithetic_gradient(
    sigma: &[f64],
    pairs: &[(Vec<f64>, f64, f64)],
) -> Result<Vec<f64>, EsError> {
    if pairs.is_empty() {
        return Err(EsError::EmptyBatch);
    }
    let dim = sigma.len();
    let mut g = vec![0.0; dim];
    for (eps, rp, rm) in pairs {
        if eps.len() != dim {
            return Err(EsError::Dimension {
                expected: dim,
                got: eps.len(),
            });
        }
        let d = (rp - rm) / 2.0;
        for ((gi, e), s) in g.iter_mut().zip(eps).zip(sigma) {
            *gi += d * e / s;
        }
    }
    let p = pairs.len() as f64;
    g.iter_mut().for_each(|x| *x /= p);
    Ok(g)
}

/// Moves the center by `lr * gradient`: up for [`Direction::Maximize`], down
/// for [`Direction::Minimize`].
pub fn es_update(
    state: &EsState,
    gradient: &[f64],
    lr: f64,
    direction: Direction,
) -> Result<EsState, EsError> {
    if gradient.len() != state.dim() {
        return Err(EsError::Dimension {
            expected: state.dim(),
            got: gradient.len(),
        });
    }
    let sign = match direction {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    let mut next = state.clone();
    for (c, g) in next.center.iter_mut().zip(gradient) {
        *c += sign * lr * g;
    }
    Ok(next)
}

/// Centered ranks in `[-0.5, 0.5]`; ties share their average rank.
pub fn centered_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg / (n - 1) as f64 - 0.5;
        }
        i = j + 1;
    }
    ranks
}

/// A fitness function pure in `(genome, episode_seed)`.
pub trait Fitness: Sync {
    fn evaluate(&self, genome: &[f64], episode_seed: u64) -> Result<f64, FitnessError>;
}

/// Adapter for infallible closures.
pub struct FnFitness<F>(pub F);

impl<F> Fitness for FnFitness<F>
where
    F: Fn(&[f64], u64) -> f64 + Sync,
{
    fn evaluate(&self, genome: &[f64], episode_seed: u64) -> Result<f64, FitnessError> {
        Ok((self.0)(genome, episode_seed))
    }
}

/// Mean reward over `episodes` rollouts per genome, evaluated in parallel on
/// the current rayon pool. The result is ordered like `genomes`.
pub fn evaluate_population<F: Fitness + ?Sized>(
    genomes: &[Vec<f64>],
    fitness: &F,
    episodes: usize,
    base_seed: u64,
    generation: u64,
) -> Result<Vec<f64>, EsError> {
    if episodes == 0 {
        return Err(EsError::InvalidConfig("episodes must be positive".into()));
    }
    genomes
        .par_iter()
        .enumerate()
        .map(|(member, g)| {
            let mut total = 0.0;
            for ep in 0..episodes {
                let seed = episode_seed(base_seed, generation, member as u64, ep as u64);
                total += fitness
                    .evaluate(g, seed)
                    .map_err(|source| EsError::Fitness { member, source })?;
            }
            Ok(total / episodes as f64)
        })
        .collect()
}

fn finite_stats(values: &[f64]) -> Option<(f64, f64, f64)> {
    let finite: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    let mean = finite.iter().sum::<f64>() / finite.len() as f64;
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    Some((mean, max, min))
}

fn draw_noise(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Fitness oriented so that larger is better.
fn oriented(values: &[f64], direction: Direction) -> Vec<f64> {
    match direction {
        Direction::Maximize => values.to_vec(),
        Direction::Minimize => values.iter().map(|x| -x).collect(),
    }
}

/// Perturbation pairs of generation `state.generation`, interleaved as
/// `[+0, -0, +1, -1, ...]`, and their noise vectors.
pub fn pgpe_population(state: &EsState, population: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(state.seed, state.generation));
    let mut eps = Vec::with_capacity(population / 2);
    let mut genomes = Vec::with_capacity(population);
    for _ in 0..population / 2 {
        let e = draw_noise(&mut rng, state.dim());
        let delta: Vec<f64> = e.iter().zip(&state.sigma).map(|(e, s)| e * s).collect();
        genomes.push(
            state
                .center
                .iter()
                .zip(&delta)
                .map(|(c, d)| c + d)
                .collect(),
        );
        genomes.push(
            state
                .center
                .iter()
                .zip(&delta)
                .map(|(c, d)| c - d)
                .collect(),
        );
        eps.push(e);
    }
    (genomes, eps)
}

/// One PGPE generation: evaluate, estimate, update center and sigma.
pub fn pgpe_step<F: Fitness + ?Sized>(
    state: &EsState,
    cfg: &EsConfig,
    fitness: &F,
) -> Result<(EsState, GenerationStats), EsError> {
    cfg.validate()?;
    let (genomes, eps) = pgpe_population(state, cfg.population);
    let raw = evaluate_population(
        &genomes,
        fitness,
        cfg.episodes_per_genome,
        state.seed,
        state.generation,
    )?;
    pgpe_apply(state, cfg, &eps, &raw)
}

/// PGPE update from the interleaved fitnesses of [`pgpe_population`].
pub fn pgpe_apply(
    state: &EsState,
    cfg: &EsConfig,
    eps: &[Vec<f64>],
    raw: &[f64],
) -> Result<(EsState, GenerationStats), EsError> {
    if raw.len() != 2 * eps.len() {
        return Err(EsError::Dimension {
            expected: 2 * eps.len(),
            got: raw.len(),
        });
    }
    let valid: Vec<usize> = (0..eps.len())
        .filter(|&j| raw[2 * j].is_finite() && raw[2 * j + 1].is_finite())
        .collect();
    let excluded_pairs = eps.len() - valid.len();
    if excluded_pairs > 0 {
        log::warn!(
            "generation {}: excluded {} antithetic pair(s) with non-finite fitness",
            state.generation,
            excluded_pairs
        );
    }
    if valid.is_empty() {
        return Err(EsError::AllExcluded {
            generation: state.generation,
        });
    }

    let mut r: Vec<f64> = valid
        .iter()
        .flat_map(|&j| [raw[2 * j], raw[2 * j + 1]])
        .collect();
    r = oriented(&r, cfg.direction);
    if cfg.rank_shaping {
        r = centered_ranks(&r);
    }

    let pairs: Vec<(Vec<f64>, f64, f64)> = valid
        .iter()
        .enumerate()
        .map(|(v, &j)| (eps[j].clone(), r[2 * v], r[2 * v + 1]))
        .collect();
    let grad_center = antithetic_gradient(&state.sigma, &pairs)?;

    let p = pairs.len() as f64;
    let baseline = pairs.iter().map(|(_, a, b)| (a + b) / 2.0).sum::<f64>() / p;
    let mut grad_sigma = vec![0.0; state.dim()];
    for (e, rp, rm) in &pairs {
        let w = (rp + rm) / 2.0 - baseline;
        for ((g, ei), s) in grad_sigma.iter_mut().zip(e).zip(&state.sigma) {
            *g += w * (ei * ei - 1.0) * s;
        }
    }

    let mut next = es_update(state, &grad_center, cfg.lr_center, Direction::Maximize)?;
    for (s, g) in next.sigma.iter_mut().zip(&grad_sigma) {
        *s = (*s + cfg.lr_sigma * g / p).clamp(SIGMA_MIN, SIGMA_MAX);
    }
    next.generation += 1;

    let (mean, max, min) = finite_stats(raw).expect("at least one valid pair");
    let stats = GenerationStats {
        generation: state.generation,
        fitness_mean: mean,
        fitness_max: max,
        fitness_min: min,
        sigma_mean: next.sigma_mean(),
        excluded: 2 * excluded_pairs,
    };
    Ok((next, stats))
}

/// Independent perturbations of generation `state.generation` with scalar width `sigma`.
pub fn vanilla_population(
    state: &EsState,
    population: usize,
    sigma: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(state.seed, state.generation));
    let mut eps = Vec::with_capacity(population);
    let mut genomes = Vec::with_capacity(population);
    for _ in 0..population {
        let e = draw_noise(&mut rng, state.dim());
        genomes.push(
            state
                .center
                .iter()
                .zip(&e)
                .map(|(c, e)| c + sigma * e)
                .collect(),
        );
        eps.push(e);
    }
    (genomes, eps)
}

/// One plain ES generation with fixed scalar `sigma = cfg.sigma0`.
pub fn vanilla_step<F: Fitness + ?Sized>(
    state: &EsState,
    cfg: &EsConfig,
    fitness: &F,
) -> Result<(EsState, GenerationStats), EsError> {
    cfg.validate()?;
    let (genomes, eps) = vanilla_population(state, cfg.population, cfg.sigma0);
    let raw = evaluate_population(
        &genomes,
        fitness,
        cfg.episodes_per_genome,
        state.seed,
        state.generation,
    )?;
    let valid: Vec<usize> = (0..raw.len()).filter(|&j| raw[j].is_finite()).collect();
    let excluded = raw.len() - valid.len();
    if excluded > 0 {
        log::warn!(
            "generation {}: excluded {} member(s) with non-finite fitness",
            state.generation,
            excluded
        );
    }
    if valid.is_empty() {
        return Err(EsError::AllExcluded {
            generation: state.generation,
        });
    }
    let mut r: Vec<f64> = oriented(
        &valid.iter().map(|&j| raw[j]).collect::<Vec<_>>(),
        cfg.direction,
    );
    if cfg.rank_shaping {
        r = centered_ranks(&r);
    }
    let samples: Vec<(Vec<f64>, f64)> = valid
        .iter()
        .zip(r)
        .map(|(&j, x)| (eps[j].clone(), x))
        .collect();
    let g = es_gradient(cfg.sigma0, &samples)?;
    let mut next = es_update(state, &g, cfg.lr_center, Direction::Maximize)?;
    next.generation += 1;
    let (mean, max, min) = finite_stats(&raw).expect("at least one valid member");
    let stats = GenerationStats {
        generation: state.generation,
        fitness_mean: mean,
        fitness_max: max,
        fitness_min: min,
        sigma_mean: next.sigma_mean(),
        excluded,
    };
    Ok((next, stats))
}

/// Dispatches on `cfg.algorithm`.
pub fn es_step<F: Fitness + ?Sized>(
    state: &EsState,
    cfg: &EsConfig,
    fitness: &F,
) -> Result<(EsState, GenerationStats), EsError> {
    match cfg.algorithm {
        Algorithm::Pgpe => pgpe_step(state, cfg, fitness),
        Algorithm::VanillaEs => vanilla_step(state, cfg, fitness),
    }
}
