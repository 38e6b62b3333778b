use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ActionSpace, EnvError, Environment, StepResult};

/// Stylized T-maze: a cue `c0` in {-1, +1} is shown at the first step only,
/// and the final action must reproduce it.
///
/// Observation at step `t` is `(c_t, t / N)` with `c_t = 0` for `t >= 1`.
/// Action 0 means -1, action 1 means +1. Reward is +1 for a match and -1 for
/// a mismatch at step `N - 1`, 0 otherwise.
#[derive(Debug, Clone)]
pub struct MemoryLengthEnv {
    n: usize,
    c0: f64,
    t: usize,
    started: bool,
}

impl MemoryLengthEnv {
    /// # Panics
    /// If `n == 0`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "memory length must be at least 1");
        Self {
            n,
            c0: 1.0,
            t: 0,
            started: false,
        }
    }

    pub fn length(&self) -> usize {
        self.n
    }

    pub fn context(&self) -> f64 {
        self.c0
    }

    /// Starts an episode with a fixed cue.
    pub fn reset_with_context(&mut self, c0: f64) -> Vec<f64> {
        self.c0 = if c0 < 0.0 { -1.0 } else { 1.0 };
        self.t = 0;
        self.started = true;
        vec![self.c0, 0.0]
    }

    pub fn action_value(action: usize) -> f64 {
        if action == 0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl Environment for MemoryLengthEnv {
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c0 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        self.reset_with_context(c0)
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.t >= self.n {
            return Err(EnvError::EpisodeDone);
        }
        if action > 1 {
            return Err(EnvError::InvalidAction { action, n: 2 });
        }
        let reward = if self.t == self.n - 1 {
            if Self::action_value(action) == self.c0 {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        };
        self.t += 1;
        Ok(StepResult {
            observation: vec![0.0, self.t as f64 / self.n as f64],
            reward,
            done: self.t == self.n,
        })
    }

    fn observation_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(2)
    }

    fn max_steps(&self) -> usize {
        self.n
    }
}
