//! Expert policies with per-action Q estimates, and the trajectory datasets
//! collected from them.

mod dataset;
mod fqi;
pub mod grid;
mod lqr;
pub mod trees;

use serde::{Deserialize, Serialize};

use crate::env::{Standardizer, StateDecoder};
use crate::error::{Error, Result};
use crate::mdp::{argmax, PolicyTable, TabularMdp};

pub use dataset::{collect_trajectories, DatasetMeta, DatasetRow, TrajectoryDataset};
pub use fqi::{
    collect_batch, collect_grid_batch, fitted_q_iteration, FqiConfig, Regressor, RegressorConfig, Transition,
};
pub use lqr::{lqr_expert, LqrConfig};

/// Per-action Q estimates: an exact table or one regressor per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QModel {
    Table {
        q: Vec<Vec<f64>>,
        decoder: StateDecoder,
    },
    Fitted {
        standardizer: Standardizer,
        regressors: Vec<Regressor>,
        fqi_iterations: usize,
        gamma: f64,
    },
    /// One-step lookahead on a quadratic cost-to-go for the cart-pole.
    Quadratic(lqr::QuadraticQ),
}

impl QModel {
    pub fn n_actions(&self) -> usize {
        match self {
            QModel::Table { q, .. } => q.first().map_or(0, Vec::len),
            QModel::Fitted { regressors, .. } => regressors.len(),
            QModel::Quadratic(m) => m.forces.len(),
        }
    }

    pub fn q_values(&self, features: &[f64]) -> Vec<f64> {
        match self {
            QModel::Table { q, decoder } => q[decoder.decode(features)].clone(),
            QModel::Fitted { standardizer, regressors, .. } => {
                let z = standardizer.apply(features);
                regressors.iter().map(|r| r.predict(&z)).collect()
            }
            QModel::Quadratic(m) => m.q_values(features),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut text = serde_json::to_string(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let model: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if model.n_actions() == 0 {
            return Err(Error::Shape("expert file has no actions".into()));
        }
        Ok(model)
    }

    /// Greedy action with lowest-index tie-breaking.
    pub fn greedy(&self, features: &[f64]) -> usize {
        argmax(&self.q_values(features))
    }

    /// Provenance string recorded in dataset metadata.
    pub fn describe(&self) -> String {
        match self {
            QModel::Table { .. } => "value_iteration (optimal Q)".to_string(),
            QModel::Fitted { regressors, fqi_iterations, gamma, .. } => {
                let kind = regressors.iter().map(Regressor::name).find(|n| *n == "grid").unwrap_or("extra_trees");
                format!("fqi (regressor={kind}, iterations={fqi_iterations}, gamma={gamma})")
            }
            QModel::Quadratic(m) => format!("lqr lookahead (gamma={})", m.gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIterationResult {
    pub q: Vec<Vec<f64>>,
    pub policy: PolicyTable,
    pub sweeps: usize,
}

/// Iterates the Bellman optimality operator until `||Q - TQ||_inf < tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<ValueIterationResult> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("value iteration tolerance must be > 0, got {tol}")));
    }
    let mut q = vec![vec![0.0; mdp.n_actions()]; mdp.n_states()];
    let mut sweeps = 0;
    loop {
        let v: Vec<f64> = q.iter().map(|row| row[argmax(row)]).collect();
        let next = mdp.backup(&v);
        sweeps += 1;
        let residual = q
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if residual < tol {
            let policy = PolicyTable::greedy(&q);
            return Ok(ValueIterationResult { q, policy, sweeps });
        }
        q = next;
    }
}

/// How the expert distributes probability over actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpertPolicyKind<'a> {
    /// Deterministic argmax of Q, lowest index on ties.
    Greedy,
    Stochastic(&'a [f64]),
}

impl ExpertPolicyKind<'_> {
    pub fn probs(&self, q: &[f64]) -> Vec<f64> {
        match self {
            ExpertPolicyKind::Greedy => {
                let mut p = vec![0.0; q.len()];
                p[argmax(q)] = 1.0;
                p
            }
            ExpertPolicyKind::Stochastic(p) => p.to_vec(),
        }
    }
}

/// `A(s, a) = Q(s, a) - sum_b pi_E(b|s) Q(s, b)`.
pub fn advantage_from_row(q: &[f64], expert: ExpertPolicyKind<'_>) -> Vec<f64> {
    let v = match expert {
        ExpertPolicyKind::Greedy => q[argmax(q)],
        ExpertPolicyKind::Stochastic(p) => p.iter().zip(q).map(|(p, q)| p * q).sum(),
    };
    q.iter().map(|x| x - v).collect()
}
