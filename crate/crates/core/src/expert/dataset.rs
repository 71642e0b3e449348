//! Expert trajectory datasets and their JSON-lines file format.
//!
//! The first line is a metadata object; each following line is one visited
//! state `{"s": [...], "a": k, "q": [...]}` in collection order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::QModel;
use crate::env::{EnvConfig, EnvId, Standardizer};
use crate::error::{Error, Result};
use crate::mdp::argmax;
use crate::seeding::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub env: EnvId,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub n_trajectories: usize,
    pub seed: u64,
    pub standardizer: Standardizer,
    #[serde(default)]
    pub episode_lengths: Vec<usize>,
    /// How the stored Q values were produced.
    #[serde(default)]
    pub q_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub s: Vec<f64>,
    pub a: usize,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub meta: DatasetMeta,
    pub rows: Vec<DatasetRow>,
}

impl TrajectoryDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if self.rows.is_empty() {
            return Err(Error::Dataset("dataset has no rows".into()));
        }
        if m.standardizer.dim() != m.obs_dim {
            return Err(Error::Dataset("standardizer dimension differs from obs_dim".into()));
        }
        if !m.episode_lengths.is_empty() && m.episode_lengths.iter().sum::<usize>() != self.rows.len() {
            return Err(Error::Dataset("episode lengths do not add up to the row count".into()));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.s.len() != m.obs_dim || r.q.len() != m.n_actions || r.a >= m.n_actions {
                return Err(Error::Dataset(format!("row {i} does not match the metadata shape")));
            }
            if r.s.iter().chain(&r.q).any(|x| !x.is_finite()) {
                return Err(Error::Dataset(format!("row {i} has a non-finite value")));
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.meta)?;
        w.write_all(b"\n")?;
        for row in &self.rows {
            serde_json::to_writer(&mut w, row)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Dataset("empty dataset file".into()))??;
        let meta: DatasetMeta = serde_json::from_str(&header)?;
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(serde_json::from_str(&line)?);
        }
        let ds = Self { meta, rows };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }

    /// Keep only the first `n` trajectories.
    pub fn truncate_trajectories(&self, n: usize) -> Result<Self> {
        let lens = &self.meta.episode_lengths;
        if n == 0 || n > lens.len() {
            return Err(Error::Dataset(format!("cannot keep {n} of {} trajectories", lens.len())));
        }
        let keep: usize = lens[..n].iter().sum();
        let rows = self.rows[..keep].to_vec();
        let standardizer = Standardizer::fit(rows.iter().map(|r| r.s.as_slice()))?;
        let meta = DatasetMeta {
            n_trajectories: n,
            episode_lengths: lens[..n].to_vec(),
            standardizer,
            ..self.meta.clone()
        };
        Ok(Self { meta, rows })
    }
}

/// Runs the greedy expert for `n_trajectories` episodes; every visited state
/// becomes one row carrying the chosen action and the full Q vector.
/// Trajectory `i` uses an environment seeded with a seed derived from `(seed, i)`.
pub fn collect_trajectories(
    env_cfg: &EnvConfig,
    expert: &QModel,
    n_trajectories: usize,
    seed: u64,
) -> Result<TrajectoryDataset> {
    if n_trajectories == 0 {
        return Err(Error::Config("n_trajectories must be >= 1".into()));
    }
    let spec = env_cfg.spec()?;
    if expert.n_actions() != spec.n_actions {
        return Err(Error::Shape(format!(
            "expert has {} actions, environment {}",
            expert.n_actions(),
            spec.n_actions
        )));
    }
    let mut rows = Vec::new();
    let mut episode_lengths = Vec::with_capacity(n_trajectories);
    for i in 0..n_trajectories {
        let mut env = env_cfg.build(derive_seed(seed, i as u64))?;
        let mut s = env.reset();
        let mut len = 0;
        loop {
            let q = expert.q_values(&s);
            let a = argmax(&q);
            let step = env.step(a)?;
            rows.push(DatasetRow { s, a, q });
            len += 1;
            if step.done() {
                break;
            }
            s = step.next_obs;
        }
        episode_lengths.push(len);
    }
    let standardizer = Standardizer::fit(rows.iter().map(|r| r.s.as_slice()))?;
    let meta = DatasetMeta {
        env: spec.id,
        n_actions: spec.n_actions,
        obs_dim: spec.obs_dim,
        n_trajectories,
        seed,
        standardizer,
        episode_lengths,
        q_source: expert.describe(),
    };
    Ok(TrajectoryDataset { meta, rows })
}
