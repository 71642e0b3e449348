//! Distillation of a softmax-linear policy from an expert dataset by
//! gradient ascent on `J_hat - eta * L_hat` with Adam.

mod adam;
mod grad;
mod policy;

use std::io::Write;

use crate::error::{Error, Result};

pub use adam::Adam;
pub use grad::{grad_advantage, grad_both, grad_bc, Gradient, PreparedDataset};
pub use policy::{DistilledPolicy, SoftmaxLinearPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    pub n_iterations: usize,
    pub learning_rate: f64,
    /// Weight `eta` of the behavioral-cloning loss.
    pub bc_weight: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Recorded with the run; training itself draws no random numbers.
    pub seed: u64,
    pub log_every: usize,
    /// `false` drops the advantage term (behavioral cloning only).
    pub use_advantage: bool,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            n_iterations: 20_000,
            learning_rate: 0.01,
            bc_weight: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            log_every: 100,
            use_advantage: true,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 || self.log_every == 0 {
            return Err(Error::Config("n_iterations and log_every must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.bc_weight >= 0.0) || !self.bc_weight.is_finite() {
            return Err(Error::Config("need lambda > 0 and finite eta >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("Adam needs betas in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub j_hat: f64,
    pub l_hat: f64,
    pub grad_norm_adv: f64,
    pub grad_norm_bc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainingTrace {
    pub const HEADER: &'static str = "iter,J_hat,L_hat,grad_norm_adv,grad_norm_bc";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for r in &self.records {
            writeln!(w, "{},{},{},{},{}", r.iter, r.j_hat, r.l_hat, r.grad_norm_adv, r.grad_norm_bc)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != Self::HEADER {
            return Err(Error::Dataset(format!("trace header `{header}` is not `{}`", Self::HEADER)));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let bad = || Error::Dataset(format!("trace line {} is malformed", i + 2));
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad());
            records.push(TraceRecord {
                iter: f[0].parse().map_err(|_| bad())?,
                j_hat: num(1)?,
                l_hat: num(2)?,
                grad_norm_adv: num(3)?,
                grad_norm_bc: num(4)?,
            });
        }
        Ok(Self { records })
    }
}

/// Algorithm loop from `W = 0`. Records are taken before the update at
/// every `log_every`-th iteration and once more after the last one; the
/// `checkpoint` callback sees the policy at each recorded iteration.
pub fn explain_train_with(
    data: &PreparedDataset,
    config: &DistillConfig,
    mut checkpoint: impl FnMut(usize, &SoftmaxLinearPolicy) -> Result<()>,
) -> Result<(SoftmaxLinearPolicy, TrainingTrace)> {
    config.validate()?;
    let mut policy = SoftmaxLinearPolicy::zeros(data.n_actions(), data.obs_dim());
    let mut adam = Adam::new(policy.weights().len(), config.beta1, config.beta2, config.eps);
    let mut trace = TrainingTrace::default();
    for iter in 0..=config.n_iterations {
        let (adv, bc) = grad_both(&policy, data);
        if !(adv.value.is_finite() && bc.value.is_finite()) || adv.grad.iter().chain(&bc.grad).any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient at iteration {iter} (J_hat={}, L_hat={})",
                adv.value, bc.value
            )));
        }
        if iter % config.log_every == 0 || iter == config.n_iterations {
            trace.records.push(TraceRecord {
                iter,
                j_hat: adv.value,
                l_hat: bc.value,
                grad_norm_adv: adv.norm(),
                grad_norm_bc: bc.norm(),
            });
            checkpoint(iter, &policy)?;
        }
        if iter == config.n_iterations {
            break;
        }
        let combined: Vec<f64> = if config.use_advantage {
            adv.grad.iter().zip(&bc.grad).map(|(a, b)| a - config.bc_weight * b).collect()
        } else {
            bc.grad.iter().map(|b| -config.bc_weight * b).collect()
        };
        adam.update(policy.weights_mut(), &combined, config.learning_rate);
    }
    Ok((policy, trace))
}

pub fn explain_train(data: &PreparedDataset, config: &DistillConfig) -> Result<(SoftmaxLinearPolicy, TrainingTrace)> {
    explain_train_with(data, config, |_, _| Ok(()))
}
