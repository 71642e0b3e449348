//! Learning curves of Adv+BC against BC-only over seeds and dataset sizes.

use std::fmt;
use std::io::Write;

use super::eval::{evaluate_policy, mean_std};
use crate::distill::{explain_train_with, DistillConfig, DistilledPolicy, PreparedDataset};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::expert::{collect_trajectories, QModel};
use crate::seeding::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    AdvBc,
    BcOnly,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::AdvBc, Method::BcOnly];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AdvBc => "adv_bc",
            Method::BcOnly => "bc_only",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct CurveConfig {
    pub dataset_sizes: Vec<usize>,
    pub methods: Vec<Method>,
    /// Number of training seeds.
    pub n_seeds: usize,
    /// Base seed for collection and evaluation.
    pub seed: u64,
    pub distill: DistillConfig,
    /// Evaluation episodes at every checkpoint.
    pub n_eval_episodes: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            dataset_sizes: vec![3],
            methods: Method::ALL.to_vec(),
            n_seeds: 6,
            seed: 0,
            distill: DistillConfig::default(),
            n_eval_episodes: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iter: usize,
    pub method: Method,
    pub seed: usize,
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub dataset_size: usize,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,method,seed,return")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.iter, p.method, p.seed, p.ret)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R, dataset_size: usize) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "iter,method,seed,return" {
            return Err(Error::Dataset(format!("unexpected curve header `{header}`")));
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let bad = || Error::Dataset(format!("curve line {} is malformed", i + 2));
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let method = Method::ALL.into_iter().find(|m| m.as_str() == f[1]).ok_or_else(bad)?;
            points.push(CurvePoint {
                iter: f[0].parse().map_err(|_| bad())?,
                method,
                seed: f[2].parse().map_err(|_| bad())?,
                ret: f[3].parse().map_err(|_| bad())?,
            });
        }
        Ok(Self { dataset_size, points })
    }

    /// Mean and std across seeds at every recorded iteration.
    pub fn summary(&self, method: Method) -> Vec<(usize, f64, f64)> {
        let mut iters: Vec<usize> = self.points.iter().filter(|p| p.method == method).map(|p| p.iter).collect();
        iters.sort_unstable();
        iters.dedup();
        iters
            .into_iter()
            .map(|it| {
                let rets: Vec<f64> =
                    self.points.iter().filter(|p| p.method == method && p.iter == it).map(|p| p.ret).collect();
                let (m, s) = mean_std(&rets);
                (it, m, s)
            })
            .collect()
    }

    /// Mean and std across seeds at the last iteration.
    pub fn final_stats(&self, method: Method) -> Option<(f64, f64)> {
        self.summary(method).last().map(|&(_, m, s)| (m, s))
    }
}

/// For each training seed `i`, collects `max(dataset_sizes)` trajectories
/// with seed `derive_seed(seed, i)` and keeps the leading ones for smaller
/// sizes, so larger datasets extend smaller ones. Every checkpoint is
/// evaluated greedily on `n_eval_episodes` episodes. Curves come back in
/// the order of `dataset_sizes`.
pub fn comparison_curve(env_cfg: &EnvConfig, expert: &QModel, cfg: &CurveConfig) -> Result<Vec<Curve>> {
    if cfg.dataset_sizes.is_empty() || cfg.dataset_sizes.contains(&0) || cfg.methods.is_empty() || cfg.n_seeds == 0 {
        return Err(Error::Config("curves need positive dataset sizes, a method and a seed".into()));
    }
    cfg.distill.validate()?;
    let max_size = *cfg.dataset_sizes.iter().max().expect("non-empty");
    let mut curves: Vec<Curve> =
        cfg.dataset_sizes.iter().map(|&dataset_size| Curve { dataset_size, points: Vec::new() }).collect();
    for i in 0..cfg.n_seeds {
        let full = collect_trajectories(env_cfg, expert, max_size, derive_seed(cfg.seed, i as u64))?;
        let eval_seed = derive_seed(cfg.seed ^ 0x5EED, i as u64);
        for curve in &mut curves {
            let ds = full.truncate_trajectories(curve.dataset_size)?;
            let data = PreparedDataset::from_dataset(&ds)?;
            for &method in &cfg.methods {
                let distill = DistillConfig { use_advantage: method == Method::AdvBc, ..cfg.distill.clone() };
                explain_train_with(&data, &distill, |iter, policy| {
                    let actor = DistilledPolicy { policy: policy.clone(), standardizer: ds.meta.standardizer.clone() };
                    let report = evaluate_policy(env_cfg, &actor, cfg.n_eval_episodes, &[eval_seed])?;
                    curve.points.push(CurvePoint { iter, method, seed: i, ret: report.mean });
                    Ok(())
                })?;
            }
        }
    }
    Ok(curves)
}
