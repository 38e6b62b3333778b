use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvError, Environment, StepResult};

/// Physical constants of the cart-pole system (CartPole-v1 values by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub mass_cart: f64,
    pub mass_pole: f64,
    /// Half the pole length, meters.
    pub half_length: f64,
    pub force: f64,
    /// Euler integration step, seconds.
    pub tau: f64,
    /// Termination angle, radians.
    pub theta_limit: f64,
    pub x_limit: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            mass_cart: 1.0,
            mass_pole: 0.1,
            half_length: 0.5,
            force: 10.0,
            tau: 0.02,
            theta_limit: 12.0 * 2.0 * std::f64::consts::PI / 360.0,
            x_limit: 2.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

/// Cart-pole balancing. Action 0 pushes left, 1 pushes right; reward is +1 for
/// every step taken, including the one that ends the episode.
#[derive(Debug, Clone)]
pub struct CartPoleEnv {
    pub params: CartPoleParams,
    max_steps: usize,
    state: CartPoleState,
    steps: usize,
    done: bool,
    started: bool,
}

impl CartPoleEnv {
    pub fn new(max_steps: usize) -> Self {
        Self::with_params(CartPoleParams::default(), max_steps)
    }

    pub fn with_params(params: CartPoleParams, max_steps: usize) -> Self {
        Self {
            params,
            max_steps,
            state: CartPoleState::default(),
            steps: 0,
            done: false,
            started: false,
        }
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, state: CartPoleState) -> Vec<f64> {
        self.state = state;
        self.steps = 0;
        self.done = false;
        self.started = true;
        state.to_vec()
    }

    fn integrate(&mut self, force: f64) {
        let p = &self.params;
        let CartPoleState {
            x,
            x_dot,
            theta,
            theta_dot,
        } = self.state;
        let total_mass = p.mass_cart + p.mass_pole;
        let pole_ml = p.mass_pole * p.half_length;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + pole_ml * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (p.gravity * sin - cos * temp)
            / (p.half_length * (4.0 / 3.0 - p.mass_pole * cos * cos / total_mass));
        let x_acc = temp - pole_ml * theta_acc * cos / total_mass;
        self.state = CartPoleState {
            x: x + p.tau * x_dot,
            x_dot: x_dot + p.tau * x_acc,
            theta: theta + p.tau * theta_dot,
            theta_dot: theta_dot + p.tau * theta_acc,
        };
    }

    /// Applies an arbitrary horizontal force for one step; no termination check.
    pub fn step_force(&mut self, force: f64) -> CartPoleState {
        self.integrate(force);
        self.state
    }
}

impl Environment for CartPoleEnv {
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = || rng.random_range(-0.05..0.05);
        let state = CartPoleState {
            x: u(),
            x_dot: u(),
            theta: u(),
            theta_dot: u(),
        };
        self.reset_to(state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let force = match action {
            0 => -self.params.force,
            1 => self.params.force,
            _ => return Err(EnvError::InvalidAction { action, n: 2 }),
        };
        self.integrate(force);
        self.steps += 1;
        let s = self.state;
        let fallen = s.x.abs() > self.params.x_limit || s.theta.abs() > self.params.theta_limit;
        self.done = fallen || self.steps >= self.max_steps;
        Ok(StepResult {
            observation: s.to_vec(),
            reward: 1.0,
            done: self.done,
        })
    }

    fn observation_dim(&self) -> usize {
        4
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(2)
    }

    fn max_steps(&self) -> usize {
        self.max_steps
    }
}
