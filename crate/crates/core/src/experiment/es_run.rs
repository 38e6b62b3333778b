use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::es::{episode_seed, es_step, save_checkpoint, EsConfig, EsState, Fitness};

use super::io::atomic_write;
use super::ExperimentError;

/// Member index of the center in episode-seed derivation.
pub const CENTER_MEMBER: u64 = u64::MAX - 1;

/// One row of an ES `curves.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsCurveRow {
    pub generation: u64,
    /// Cumulative training episodes after this generation.
    pub episodes: u64,
    pub fitness_mean: f64,
    pub fitness_max: f64,
    pub fitness_min: f64,
    pub sigma_mean: f64,
    /// Fitness of the center after this generation's update.
    pub center_fitness: f64,
    pub excluded: usize,
}

#[derive(Debug, Clone)]
pub struct EsOutcome {
    pub state: EsState,
    pub rows: Vec<EsCurveRow>,
    /// Wall-clock seconds per generation.
    pub seconds: Vec<f64>,
    pub episodes: u64,
}

impl EsOutcome {
    pub fn final_center(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.center_fitness)
    }

    pub fn final_population_mean(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.fitness_mean)
    }
}

fn save(path: &Path, state: &EsState) -> Result<(), ExperimentError> {
    let mut buf = Vec::new();
    save_checkpoint(state, &mut buf)?;
    atomic_write(path, &buf)
}

fn center_fitness<F: Fitness + ?Sized>(
    fitness: &F,
    state: &EsState,
    episodes: usize,
    generation: u64,
) -> Result<f64, ExperimentError> {
    let mut total = 0.0;
    for ep in 0..episodes {
        let seed = episode_seed(state.seed, generation, CENTER_MEMBER, ep as u64);
        total += fitness
            .evaluate(&state.center, seed)
            .map_err(|e| ExperimentError::Failed(format!("center evaluation: {e}")))?;
    }
    Ok(total / episodes as f64)
}

/// Runs `cfg.generations` generations from `init`.
///
/// With a checkpoint path the state is saved every `checkpoint_every`
/// generations, after the last one, and before returning an error.
pub fn run_es<F: Fitness + ?Sized>(
    cfg: &EsConfig,
    init: Vec<f64>,
    fitness: &F,
    episodes_per_eval: u64,
    checkpoint: Option<&Path>,
    checkpoint_every: u64,
) -> Result<EsOutcome, ExperimentError> {
    cfg.validate()?;
    let mut state = EsState::new(init, cfg);
    let mut rows = Vec::with_capacity(cfg.generations as usize);
    let mut seconds = Vec::with_capacity(cfg.generations as usize);
    let per_gen = cfg.population as u64 * cfg.episodes_per_genome as u64 * episodes_per_eval;
    let mut episodes = 0;
    for g in 0..cfg.generations {
        let start = Instant::now();
        let step = es_step(&state, cfg, fitness)
            .map_err(ExperimentError::from)
            .and_then(|(next, stats)| {
                let c = center_fitness(fitness, &next, cfg.episodes_per_genome, g)?;
                Ok((next, stats, c))
            });
        let (next, stats, center) = match step {
            Ok(x) => x,
            Err(e) => {
                if let Some(p) = checkpoint {
                    save(p, &state)?;
                    log::error!("generation {g} failed; state saved to {}", p.display());
                }
                return Err(e);
            }
        };
        state = next;
        episodes += per_gen;
        rows.push(EsCurveRow {
            generation: stats.generation,
            episodes,
            fitness_mean: stats.fitness_mean,
            fitness_max: stats.fitness_max,
            fitness_min: stats.fitness_min,
            sigma_mean: stats.sigma_mean,
            center_fitness: center,
            excluded: stats.excluded,
        });
        seconds.push(start.elapsed().as_secs_f64());
        log::debug!(
            "generation {g}: mean {:.4} max {:.4} center {:.4} sigma {:.4}",
            stats.fitness_mean,
            stats.fitness_max,
            center,
            stats.sigma_mean
        );
        if let Some(p) = checkpoint {
            if checkpoint_every > 0 && (g + 1) % checkpoint_every == 0 {
                save(p, &state)?;
            }
        }
    }
    if let Some(p) = checkpoint {
        save(p, &state)?;
    }
    Ok(EsOutcome {
        state,
        rows,
        seconds,
        episodes,
    })
}
