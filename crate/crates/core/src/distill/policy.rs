use serde::{Deserialize, Serialize};

use crate::env::Standardizer;
use crate::error::{Error, Result};
use crate::mdp::argmax;

/// `pi(a|s) = softmax(W [s; 1])_a`, with `W` stored row-major as
/// `n_actions x (obs_dim + 1)` and the bias in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLinearPolicy {
    n_actions: usize,
    obs_dim: usize,
    weights: Vec<f64>,
}

impl SoftmaxLinearPolicy {
    pub fn zeros(n_actions: usize, obs_dim: usize) -> Self {
        Self { n_actions, obs_dim, weights: vec![0.0; n_actions * (obs_dim + 1)] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if n_actions == 0 || width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Shape("weight rows must be non-empty and equally long".into()));
        }
        if rows.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("policy weights".into()));
        }
        Ok(Self { n_actions, obs_dim: width - 1, weights: rows.concat() })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn weight(&self, action: usize, column: usize) -> f64 {
        self.weights[action * (self.obs_dim + 1) + column]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.obs_dim + 1).map(<[f64]>::to_vec).collect()
    }

    pub fn policy_probs(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.obs_dim {
            return Err(Error::Shape(format!("expected {} features, got {}", self.obs_dim, features.len())));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("policy input features".into()));
        }
        let mut x = features.to_vec();
        x.push(1.0);
        let mut out = vec![0.0; self.n_actions];
        self.probs_into(&x, &mut out);
        Ok(out)
    }

    /// Softmax probabilities for an input that already carries the trailing 1.
    pub(crate) fn probs_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.weights.chunks(x.len())) {
            *o = row.iter().zip(x).map(|(w, x)| w * x).sum();
        }
        super::grad::softmax_in_place(out);
    }

    /// Most probable action, lowest index on ties.
    pub fn greedy(&self, features: &[f64]) -> Result<usize> {
        Ok(argmax(&self.policy_probs(features)?))
    }
}

/// A trained policy together with the standardizer its inputs expect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistilled", into = "RawDistilled")]
pub struct DistilledPolicy {
    pub policy: SoftmaxLinearPolicy,
    pub standardizer: Standardizer,
}

#[derive(Serialize, Deserialize)]
struct RawDistilled {
    n_actions: usize,
    obs_dim: usize,
    weights: Vec<Vec<f64>>,
    standardizer: Standardizer,
}

impl TryFrom<RawDistilled> for DistilledPolicy {
    type Error = Error;

    fn try_from(raw: RawDistilled) -> Result<Self> {
        let policy = SoftmaxLinearPolicy::from_rows(raw.weights)?;
        if policy.n_actions != raw.n_actions || policy.obs_dim != raw.obs_dim || raw.standardizer.dim() != raw.obs_dim {
            return Err(Error::Shape("policy file dimensions disagree".into()));
        }
        Ok(Self { policy, standardizer: raw.standardizer })
    }
}

impl From<DistilledPolicy> for RawDistilled {
    fn from(p: DistilledPolicy) -> Self {
        Self {
            n_actions: p.policy.n_actions,
            obs_dim: p.policy.obs_dim,
            weights: p.policy.rows(),
            standardizer: p.standardizer,
        }
    }
}

impl DistilledPolicy {
    /// Greedy action for a raw (unstandardized) observation.
    pub fn act(&self, obs: &[f64]) -> Result<usize> {
        self.policy.greedy(&self.standardizer.apply(obs))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_are_uniform() {
        let p = SoftmaxLinearPolicy::zeros(4, 3).policy_probs(&[1.0, -2.0, 0.5]).unwrap();
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn shift_invariance() {
        let rows = vec![vec![0.3, -1.0, 0.2], vec![1.5, 0.4, -0.7], vec![-0.2, 0.0, 2.0]];
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[1], r[2] + 7.5]).collect();
        let s = [0.9, -0.4];
        let a = SoftmaxLinearPolicy::from_rows(rows).unwrap().policy_probs(&s).unwrap();
        let b = SoftmaxLinearPolicy::from_rows(shifted).unwrap().policy_probs(&s).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_logit_does_not_overflow() {
        let p = SoftmaxLinearPolicy::from_rows(vec![vec![0.0, 50.0], vec![0.0, 0.0], vec![0.0, 0.0]])
            .unwrap()
            .policy_probs(&[3.0])
            .unwrap();
        // Exact value: 1 / (1 + 2 e^-50).
        assert!(1.0 - p[0] < 1e-20);
        assert!((p[1] - (-50.0f64).exp() / (1.0 + 2.0 * (-50.0f64).exp())).abs() < 1e-30);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = SoftmaxLinearPolicy::from_rows(vec![vec![1e3, 0.0], vec![0.0, 0.0]]).unwrap().policy_probs(&[1e3]).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_features() {
        let pol = SoftmaxLinearPolicy::zeros(2, 2);
        assert!(pol.policy_probs(&[1.0]).is_err());
        assert!(pol.policy_probs(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn json_layout_and_round_trip() {
        let policy = SoftmaxLinearPolicy::from_rows(vec![vec![0.1, 0.2], vec![-0.3, 0.4]]).unwrap();
        let d = DistilledPolicy { policy, standardizer: Standardizer::identity(1) };
        let text = serde_json::to_string(&d).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n_actions"], 2);
        assert_eq!(v["obs_dim"], 1);
        assert_eq!(v["weights"][1][0], -0.3);
        assert!(v.get("standardizer").is_some());
        assert_eq!(serde_json::from_str::<DistilledPolicy>(&text).unwrap(), d);
        let bad = text.replace("\"obs_dim\":1", "\"obs_dim\":3");
        assert!(serde_json::from_str::<DistilledPolicy>(&bad).is_err());
    }
}
