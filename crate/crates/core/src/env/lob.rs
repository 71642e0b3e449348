//! Synthetic level-1 order book whose price drift follows the volume imbalance.
//!
//! Each step emits the best bid and ask sizes plus distractor features
//! (lagged price moves, the price level, pure noise). The next price move is
//! `kappa * (bid - ask) / (bid + ask) + sigma * noise`, so with `sigma = 0`
//! trading the sign of the imbalance is optimal at every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{EnvId, EnvSpec, Environment, Phase, StepResult};
use crate::error::{Error, Result};

pub const LONG: usize = 0;
pub const FLAT: usize = 1;
pub const SHORT: usize = 2;
/// Position taken by each action index.
pub const LOB_ACTIONS: [f64; 3] = [1.0, 0.0, -1.0];

const N_LAGS: usize = 3;
const START_PRICE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LobConfig {
    pub n_features: usize,
    pub episode_len: usize,
    pub sigma: f64,
    pub kappa: f64,
    pub min_volume: f64,
    pub max_volume: f64,
}

impl Default for LobConfig {
    fn default() -> Self {
        Self { n_features: 15, episode_len: 200, sigma: 0.0, kappa: 1.0, min_volume: 1.0, max_volume: 100.0 }
    }
}

impl LobConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_features < 2 {
            return Err(Error::Config("lob-synth needs n_features >= 2".into()));
        }
        if self.episode_len == 0 {
            return Err(Error::Config("lob-synth needs episode_len >= 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config("lob-synth sigma must be finite and >= 0".into()));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config("lob-synth kappa must be > 0".into()));
        }
        if !(self.min_volume > 0.0 && self.max_volume > self.min_volume) {
            return Err(Error::Config("lob-synth needs 0 < min_volume < max_volume".into()));
        }
        Ok(())
    }
}

/// `R_{t+1} = a_t (price_{t+1} - price_t)`.
pub fn trade_reward(position: f64, price: f64, next_price: f64) -> f64 {
    position * (next_price - price)
}

/// Long when the bid size exceeds the ask size, short when it is smaller.
pub fn imbalance_rule(bid: f64, ask: f64) -> usize {
    if bid > ask {
        LONG
    } else if bid < ask {
        SHORT
    } else {
        FLAT
    }
}

#[derive(Debug, Clone)]
pub struct LobEnv {
    spec: EnvSpec,
    cfg: LobConfig,
    rng: ChaCha8Rng,
    price: f64,
    lags: [f64; N_LAGS],
    obs: Vec<f64>,
    t: usize,
    phase: Phase,
}

impl LobEnv {
    pub fn new(cfg: LobConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            spec: EnvSpec {
                id: EnvId::LobSynth,
                n_actions: 3,
                obs_dim: cfg.n_features,
                horizon: cfg.episode_len,
                gamma: 0.99,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            price: START_PRICE,
            lags: [0.0; N_LAGS],
            obs: Vec::new(),
            t: 0,
            phase: Phase::NeedsReset,
            cfg,
        })
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    /// Drift component of the upcoming price move.
    pub fn expected_increment(&self) -> f64 {
        let (bid, ask) = (self.obs[0], self.obs[1]);
        self.cfg.kappa * (bid - ask) / (bid + ask)
    }

    fn draw_obs(&mut self) {
        let n = self.cfg.n_features;
        let mut obs = Vec::with_capacity(n);
        obs.push(self.rng.random_range(self.cfg.min_volume..self.cfg.max_volume));
        obs.push(self.rng.random_range(self.cfg.min_volume..self.cfg.max_volume));
        for i in 2..n {
            let k = i - 2;
            let x = if k < N_LAGS {
                self.lags[k]
            } else if k == N_LAGS {
                self.price - START_PRICE
            } else {
                self.rng.sample(StandardNormal)
            };
            obs.push(x);
        }
        self.obs = obs;
    }
}

impl Environment for LobEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        self.price = START_PRICE;
        self.lags = [0.0; N_LAGS];
        self.t = 0;
        self.phase = Phase::Running;
        self.draw_obs();
        self.obs.clone()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        self.phase.check_step(action, self.spec.n_actions)?;
        let noise: f64 = if self.cfg.sigma > 0.0 { self.rng.sample(StandardNormal) } else { 0.0 };
        let delta = self.expected_increment() + self.cfg.sigma * noise;
        let next_price = self.price + delta;
        let reward = trade_reward(LOB_ACTIONS[action], self.price, next_price);
        self.price = next_price;
        self.lags.rotate_right(1);
        self.lags[0] = delta;
        self.t += 1;
        self.draw_obs();
        let truncated = self.t >= self.spec.horizon;
        if truncated {
            self.phase = Phase::Done;
        }
        Ok(StepResult { next_obs: self.obs.clone(), reward, terminated: false, truncated })
    }

    fn feature_names(&self) -> Vec<String> {
        (0..self.cfg.n_features)
            .map(|i| match i {
                0 => "l1_bid_size".to_string(),
                1 => "l1_ask_size".to_string(),
                i if i - 2 < N_LAGS => format!("price_change_lag{}", i - 1),
                i if i - 2 == N_LAGS => "price_level".to_string(),
                i => format!("noise_{}", i - 2 - N_LAGS),
            })
            .collect()
    }
}
