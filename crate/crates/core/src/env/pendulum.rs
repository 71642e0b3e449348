//! Cart-pole balancing with a sine-transformed discrete action set.
//!
//! Action `i` of `K` is mapped to `a_pred = 4 pi i / (K - 1)` and applied
//! as the horizontal force `3 sin(a_pred)`, so several indices share the
//! same physical effect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::constants::cart_pole::*;
use super::{EnvId, EnvSpec, Environment, Phase, StepResult};
use crate::error::{Error, Result};

pub fn pendulum_action_map(index: usize, n_actions: usize) -> Result<f64> {
    if n_actions < 2 {
        return Err(Error::Env(format!("need at least 2 actions, got {n_actions}")));
    }
    if index >= n_actions {
        return Err(Error::Env(format!("action {index} out of range 0..{n_actions}")));
    }
    let a_pred = ACTION_RANGE * index as f64 / (n_actions - 1) as f64;
    Ok(FORCE_AMPLITUDE * a_pred.sin())
}

#[derive(Debug, Clone)]
pub struct PendulumSine {
    spec: EnvSpec,
    forces: Vec<f64>,
    rng: ChaCha8Rng,
    state: [f64; 4],
    t: usize,
    phase: Phase,
}

impl PendulumSine {
    pub fn new(n_actions: usize, seed: u64) -> Result<Self> {
        let forces = (0..n_actions)
            .map(|i| pendulum_action_map(i, n_actions))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: EnvSpec { id: EnvId::PendulumSine, n_actions, obs_dim: 4, horizon: HORIZON, gamma: 0.99 },
            forces,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: [0.0; 4],
            t: 0,
            phase: Phase::NeedsReset,
        })
    }

    pub fn forces(&self) -> &[f64] {
        &self.forces
    }

    fn start_at(&mut self, state: [f64; 4]) -> Vec<f64> {
        self.state = state;
        self.t = 0;
        self.phase = Phase::Running;
        state.to_vec()
    }
}

/// One Euler step of the cart-pole equations of motion.
pub(crate) fn cart_pole_dynamics(state: [f64; 4], force: f64) -> [f64; 4] {
    let [x, x_dot, theta, theta_dot] = state;
    let (sin, cos) = theta.sin_cos();
    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
    [x + TAU * x_dot, x_dot + TAU * x_acc, theta + TAU * theta_dot, theta_dot + TAU * theta_acc]
}

impl Environment for PendulumSine {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        let mut s = [0.0; 4];
        for v in &mut s {
            *v = self.rng.random_range(-INIT_BOUND..=INIT_BOUND);
        }
        self.start_at(s)
    }

    fn reset_exploring(&mut self) -> Vec<f64> {
        let s = [
            self.rng.random_range(-X_THRESHOLD..=X_THRESHOLD),
            self.rng.random_range(-1.5..=1.5),
            self.rng.random_range(-THETA_THRESHOLD..=THETA_THRESHOLD),
            self.rng.random_range(-1.5..=1.5),
        ];
        self.start_at(s)
    }

    fn reset_to(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        let s: [f64; 4] = obs.try_into().map_err(|_| Error::Env("pendulum state has 4 entries".into()))?;
        Ok(self.start_at(s))
    }

    fn state_bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let hi = vec![X_THRESHOLD, 3.0, THETA_THRESHOLD, 3.5];
        Some((hi.iter().map(|x| -x).collect(), hi))
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        self.phase.check_step(action, self.spec.n_actions)?;
        self.state = cart_pole_dynamics(self.state, self.forces[action]);
        self.t += 1;
        let [x, _, theta, _] = self.state;
        let terminated = x.abs() > X_THRESHOLD || theta.abs() > THETA_THRESHOLD;
        let truncated = !terminated && self.t >= self.spec.horizon;
        if terminated || truncated {
            self.phase = Phase::Done;
        }
        Ok(StepResult { next_obs: self.state.to_vec(), reward: 1.0, terminated, truncated })
    }

    fn feature_names(&self) -> Vec<String> {
        ["cart_position", "cart_velocity", "pole_angle", "pole_angular_velocity"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }
}
