//! Continuous mountain car with a uniformly discretised force.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::constants::mountain_car::*;
use super::{EnvId, EnvSpec, Environment, Phase, StepResult};
use crate::error::{Error, Result};

/// `f = -1 + 2 i / (K - 1)`.
pub fn mountain_car_action_map(index: usize, n_actions: usize) -> Result<f64> {
    if n_actions < 2 || index >= n_actions {
        return Err(Error::Env(format!("action {index} invalid for {n_actions} actions")));
    }
    Ok(-1.0 + 2.0 * index as f64 / (n_actions - 1) as f64)
}

#[derive(Debug, Clone)]
pub struct MountainCar {
    spec: EnvSpec,
    forces: Vec<f64>,
    rng: ChaCha8Rng,
    position: f64,
    velocity: f64,
    t: usize,
    phase: Phase,
}

impl MountainCar {
    pub fn new(n_actions: usize, seed: u64) -> Result<Self> {
        let forces = (0..n_actions)
            .map(|i| mountain_car_action_map(i, n_actions))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: EnvSpec { id: EnvId::MountainCarDisc, n_actions, obs_dim: 2, horizon: HORIZON, gamma: 0.99 },
            forces,
            rng: ChaCha8Rng::seed_from_u64(seed),
            position: 0.0,
            velocity: 0.0,
            t: 0,
            phase: Phase::NeedsReset,
        })
    }

    fn start_at(&mut self, position: f64, velocity: f64) -> Vec<f64> {
        self.position = position;
        self.velocity = velocity;
        self.t = 0;
        self.phase = Phase::Running;
        vec![position, velocity]
    }
}

impl Environment for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        let p = self.rng.random_range(INIT_LOW..=INIT_HIGH);
        self.start_at(p, 0.0)
    }

    fn reset_exploring(&mut self) -> Vec<f64> {
        let p = self.rng.random_range(MIN_POSITION..GOAL_POSITION);
        let v = self.rng.random_range(-MAX_SPEED..=MAX_SPEED);
        self.start_at(p, v)
    }

    fn reset_to(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        match obs {
            [p, v] => Ok(self.start_at(p.clamp(MIN_POSITION, MAX_POSITION), v.clamp(-MAX_SPEED, MAX_SPEED))),
            _ => Err(Error::Env("mountain-car state has 2 entries".into())),
        }
    }

    fn state_bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((vec![MIN_POSITION, -MAX_SPEED], vec![MAX_POSITION, MAX_SPEED]))
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        self.phase.check_step(action, self.spec.n_actions)?;
        let force = self.forces[action];
        self.velocity += force * POWER - GRAVITY * (3.0 * self.position).cos();
        self.velocity = self.velocity.clamp(-MAX_SPEED, MAX_SPEED);
        self.position = (self.position + self.velocity).clamp(MIN_POSITION, MAX_POSITION);
        if self.position == MIN_POSITION && self.velocity < 0.0 {
            self.velocity = 0.0;
        }
        self.t += 1;
        let terminated = self.position >= GOAL_POSITION && self.velocity >= GOAL_VELOCITY;
        let truncated = !terminated && self.t >= self.spec.horizon;
        let mut reward = -FORCE_COST * force * force;
        if terminated {
            reward += GOAL_REWARD;
        }
        if terminated || truncated {
            self.phase = Phase::Done;
        }
        Ok(StepResult { next_obs: vec![self.position, self.velocity], reward, terminated, truncated })
    }

    fn feature_names(&self) -> Vec<String> {
        vec!["position".into(), "velocity".into()]
    }
}
