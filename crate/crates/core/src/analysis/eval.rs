//! Greedy-policy evaluation over seeds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distill::DistilledPolicy;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::expert::QModel;
use crate::seeding::derive_seed;

/// Anything that picks one action per raw observation.
pub trait Actor {
    fn act(&self, obs: &[f64]) -> Result<usize>;
}

impl Actor for DistilledPolicy {
    fn act(&self, obs: &[f64]) -> Result<usize> {
        DistilledPolicy::act(self, obs)
    }
}

impl Actor for QModel {
    fn act(&self, obs: &[f64]) -> Result<usize> {
        Ok(self.greedy(obs))
    }
}

impl<F: Fn(&[f64]) -> usize> Actor for F {
    fn act(&self, obs: &[f64]) -> Result<usize> {
        Ok(self(obs))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seeds: Vec<u64>,
    /// Mean undiscounted return of each seed's episodes.
    pub per_seed: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
    pub n_episodes: usize,
}

impl EvalReport {
    pub fn n_seeds(&self) -> usize {
        self.per_seed.len()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "seed,n_episodes,mean_return")?;
        for (seed, ret) in self.seeds.iter().zip(&self.per_seed) {
            writeln!(w, "{seed},{},{ret}", self.n_episodes)?;
        }
        writeln!(w, "mean,{},{}", self.n_episodes, self.mean)?;
        writeln!(w, "std,{},{}", self.n_episodes, self.std)?;
        w.flush()?;
        Ok(())
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Undiscounted return of one episode, propagating policy errors.
pub fn episode_return(env_cfg: &EnvConfig, actor: &dyn Actor, env_seed: u64) -> Result<f64> {
    let mut env = env_cfg.build(env_seed)?;
    let mut obs = env.reset();
    let mut total = 0.0;
    loop {
        let step = env.step(actor.act(&obs)?)?;
        total += step.reward;
        if step.done() {
            return Ok(total);
        }
        obs = step.next_obs;
    }
}

/// Episode `j` of seed `s` runs in an environment seeded with
/// `derive_seed(s, j)`.
pub fn evaluate_policy(env_cfg: &EnvConfig, actor: &dyn Actor, n_episodes: usize, seeds: &[u64]) -> Result<EvalReport> {
    if n_episodes == 0 || seeds.is_empty() {
        return Err(Error::Config("evaluation needs n_episodes >= 1 and at least one seed".into()));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut total = 0.0;
        for j in 0..n_episodes {
            total += episode_return(env_cfg, actor, derive_seed(seed, j as u64))?;
        }
        per_seed.push(total / n_episodes as f64);
    }
    let (mean, std) = mean_std(&per_seed);
    Ok(EvalReport { seeds: seeds.to_vec(), per_seed, mean, std, n_episodes })
}
