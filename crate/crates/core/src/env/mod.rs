//! Seedable episodic environments behind a single reset/step interface.

pub mod constants;
mod gridworld;
mod lob;
mod mountain_car;
mod pendulum;
mod standardize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gridworld::{GridEncoding, GridSpec, GridWorld, StateDecoder};
pub use lob::{imbalance_rule, trade_reward, LobConfig, LobEnv, LOB_ACTIONS, LONG, FLAT, SHORT};
pub use mountain_car::{mountain_car_action_map, MountainCar};
pub use pendulum::{pendulum_action_map, PendulumSine};
pub(crate) use pendulum::cart_pole_dynamics;
pub use standardize::{Standardizer, STD_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvId {
    #[serde(rename = "pendulum-sine")]
    PendulumSine,
    #[serde(rename = "mountain-car-disc")]
    MountainCarDisc,
    #[serde(rename = "lob-synth")]
    LobSynth,
    #[serde(rename = "gridworld")]
    Gridworld,
}

impl EnvId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvId::PendulumSine => "pendulum-sine",
            EnvId::MountainCarDisc => "mountain-car-disc",
            EnvId::LobSynth => "lob-synth",
            EnvId::Gridworld => "gridworld",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum-sine" => Ok(EnvId::PendulumSine),
            "mountain-car-disc" => Ok(EnvId::MountainCarDisc),
            "lob-synth" => Ok(EnvId::LobSynth),
            "gridworld" => Ok(EnvId::Gridworld),
            other => Err(Error::Config(format!("unknown environment id `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub id: EnvId,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub horizon: usize,
    /// Discount used when reporting discounted returns.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<StepResult>;

    /// Restart from a state drawn over the whole reachable region rather
    /// than the nominal start distribution. Used to build FQI batches.
    fn reset_exploring(&mut self) -> Vec<f64> {
        self.reset()
    }

    /// Restart the episode from an explicit observation, when the
    /// observation fully determines the state.
    fn reset_to(&mut self, _obs: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Env(format!("{} does not support reset_to", self.spec().id)))
    }

    /// Box enclosing the reachable observations, when one exists.
    fn state_bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }

    fn feature_names(&self) -> Vec<String>;
}

/// Reset/step ordering shared by every environment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) enum Phase {
    #[default]
    NeedsReset,
    Running,
    Done,
}

impl Phase {
    pub(crate) fn check_step(&self, action: usize, n_actions: usize) -> Result<()> {
        match self {
            Phase::NeedsReset => return Err(Error::Env("step called before reset".into())),
            Phase::Done => return Err(Error::Env("step called after episode end; reset first".into())),
            Phase::Running => {}
        }
        if action >= n_actions {
            return Err(Error::Env(format!("action {action} out of range 0..{n_actions}")));
        }
        Ok(())
    }
}

/// Environment selection plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    Pendulum { n_actions: usize },
    MountainCar { n_actions: usize },
    Lob(LobConfig),
    Gridworld(GridSpec),
}

impl EnvConfig {
    pub fn id(&self) -> EnvId {
        match self {
            EnvConfig::Pendulum { .. } => EnvId::PendulumSine,
            EnvConfig::MountainCar { .. } => EnvId::MountainCarDisc,
            EnvConfig::Lob(_) => EnvId::LobSynth,
            EnvConfig::Gridworld(_) => EnvId::Gridworld,
        }
    }

    pub fn build(&self, seed: u64) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvConfig::Pendulum { n_actions } => Box::new(PendulumSine::new(*n_actions, seed)?),
            EnvConfig::MountainCar { n_actions } => Box::new(MountainCar::new(*n_actions, seed)?),
            EnvConfig::Lob(cfg) => Box::new(LobEnv::new(cfg.clone(), seed)?),
            EnvConfig::Gridworld(spec) => Box::new(GridWorld::new(spec.clone(), seed)?),
        })
    }

    pub fn spec(&self) -> Result<EnvSpec> {
        Ok(self.build(0)?.spec().clone())
    }
}

/// Undiscounted return of one episode driven by `act`.
pub fn run_episode(env: &mut dyn Environment, mut act: impl FnMut(&[f64]) -> usize) -> Result<(f64, usize)> {
    let mut obs = env.reset();
    let mut total = 0.0;
    let mut steps = 0;
    loop {
        let step = env.step(act(&obs))?;
        total += step.reward;
        steps += 1;
        if step.done() {
            return Ok((total, steps));
        }
        obs = step.next_obs;
    }
}
