//! Exact finite MDPs and closed-form policy evaluation.
//!
//! Everything here is solved by dense linear algebra rather than iteration,
//! so the results serve as ground truth for the sampled and approximate code
//! paths elsewhere in the crate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_STATES: usize = 64;
pub const MAX_ACTIONS: usize = 16;

const PROB_TOL: f64 = 1e-12;
const IDENTITY_TOL: f64 = 1e-9;

/// A finite discounted MDP with transition tensor `P[s][a][s']`, rewards
/// `R[s][a]` and start distribution `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    start_dist: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    start_dist: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
}

impl TryFrom<RawMdp> for TabularMdp {
    type Error = Error;

    fn try_from(raw: RawMdp) -> Result<Self> {
        let mdp = TabularMdp::new(raw.gamma, raw.start_dist, raw.transition, raw.reward)?;
        if mdp.n_states != raw.n_states || mdp.n_actions != raw.n_actions {
            return Err(Error::InvalidMdp(format!(
                "declared {}x{} but tables are {}x{}",
                raw.n_states, raw.n_actions, mdp.n_states, mdp.n_actions
            )));
        }
        Ok(mdp)
    }
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidMdp(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidMdp(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        gamma: f64,
        start_dist: Vec<f64>,
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 || n_states > MAX_STATES {
            return Err(Error::InvalidMdp(format!(
                "n_states must be in 1..={MAX_STATES}, got {n_states}"
            )));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 || n_actions > MAX_ACTIONS {
            return Err(Error::InvalidMdp(format!(
                "n_actions must be in 1..={MAX_ACTIONS}, got {n_actions}"
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("gamma must be in [0, 1), got {gamma}")));
        }
        if start_dist.len() != n_states || reward.len() != n_states {
            return Err(Error::InvalidMdp("start_dist/reward length differs from n_states".into()));
        }
        check_distribution(&start_dist, "start_dist")?;
        for (s, (rows, r)) in transition.iter().zip(&reward).enumerate() {
            if rows.len() != n_actions || r.len() != n_actions {
                return Err(Error::InvalidMdp(format!("state {s} has ragged action tables")));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMdp(format!("state {s} has a non-finite reward")));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::InvalidMdp(format!("P[{s}][{a}] has wrong length")));
                }
                check_distribution(row, &format!("P[{s}][{a}]"))?;
            }
        }
        Ok(Self { n_states, n_actions, gamma, start_dist, transition, reward })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn start_dist(&self) -> &[f64] {
        &self.start_dist
    }

    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[s][a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s][a]
    }

    fn check_policy(&self, policy: &PolicyTable) -> Result<()> {
        if policy.n_states() != self.n_states || policy.n_actions() != self.n_actions {
            return Err(Error::Shape(format!(
                "policy is {}x{}, MDP is {}x{}",
                policy.n_states(),
                policy.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }

    /// State-to-state kernel and expected reward under `policy`.
    fn policy_kernel(&self, policy: &PolicyTable) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n_states;
        let mut p = DMatrix::zeros(n, n);
        let mut r = DVector::zeros(n);
        for s in 0..n {
            for a in 0..self.n_actions {
                let w = policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                r[s] += w * self.reward[s][a];
                for (t, pt) in self.transition[s][a].iter().enumerate() {
                    p[(s, t)] += w * pt;
                }
            }
        }
        (p, r)
    }

    /// One-step lookahead `R[s][a] + gamma * sum_s' P[s][a][s'] v[s']`.
    pub fn backup(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| {
                        let next: f64 =
                            self.transition[s][a].iter().zip(v).map(|(p, x)| p * x).sum();
                        self.reward[s][a] + self.gamma * next
                    })
                    .collect()
            })
            .collect()
    }
}

/// Per-state action distributions `pi[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PolicyTable {
    probs: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for PolicyTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        PolicyTable::new(rows)
    }
}

impl From<PolicyTable> for Vec<Vec<f64>> {
    fn from(p: PolicyTable) -> Self {
        p.probs
    }
}

impl PolicyTable {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = probs.first().map_or(0, Vec::len);
        if probs.is_empty() || n_actions == 0 {
            return Err(Error::InvalidPolicy("empty policy table".into()));
        }
        for (s, row) in probs.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::InvalidPolicy(format!("row {s} is ragged")));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidPolicy(format!("row {s} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {total}")));
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states] }
    }

    /// One-hot rows selecting `actions[s]` in each state.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let probs = actions
            .iter()
            .map(|&a| {
                if a >= n_actions {
                    return Err(Error::InvalidPolicy(format!("action {a} out of range")));
                }
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(probs)
    }

    /// Deterministic policy picking the first maximiser of each row of `q`.
    pub fn greedy(q: &[Vec<f64>]) -> Self {
        let n_actions = q[0].len();
        let actions: Vec<usize> = q.iter().map(|row| argmax(row)).collect();
        Self::deterministic(&actions, n_actions).expect("argmax is always in range")
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s][a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }
}

/// Index of the first maximal entry.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// `V`, `Q` and `A = Q - V` of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueBundle {
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub adv: Vec<Vec<f64>>,
}

fn solve(system: DMatrix<f64>, rhs: DVector<f64>) -> Vec<f64> {
    // I - gamma * P is strictly diagonally dominant for gamma < 1.
    system
        .lu()
        .solve(&rhs)
        .expect("I - gamma P is nonsingular for gamma < 1")
        .iter()
        .copied()
        .collect()
}

/// Exact policy evaluation via `(I - gamma P_pi) V = R_pi`.
pub fn solve_values(mdp: &TabularMdp, policy: &PolicyTable) -> Result<ValueBundle> {
    mdp.check_policy(policy)?;
    let n = mdp.n_states();
    let (p, r) = mdp.policy_kernel(policy);
    let system = DMatrix::identity(n, n) - p * mdp.gamma();
    let v = solve(system, r);
    let q = mdp.backup(&v);
    let adv = q
        .iter()
        .zip(&v)
        .map(|(row, vs)| row.iter().map(|x| x - vs).collect())
        .collect();
    Ok(ValueBundle { v, q, adv })
}

/// Normalised discounted visitation `d(s) = (1 - gamma) sum_t gamma^t Pr(s_t = s)`.
pub fn discounted_state_distribution(mdp: &TabularMdp, policy: &PolicyTable) -> Result<Vec<f64>> {
    mdp.check_policy(policy)?;
    let n = mdp.n_states();
    let (p, _) = mdp.policy_kernel(policy);
    let system = DMatrix::identity(n, n) - p.transpose() * mdp.gamma();
    let mu = DVector::from_column_slice(mdp.start_dist());
    let x = solve(system, mu);
    Ok(x.into_iter().map(|d| (1.0 - mdp.gamma()) * d).collect())
}

/// `J = sum_s mu(s) V(s)`.
pub fn expected_return(mdp: &TabularMdp, policy: &PolicyTable) -> Result<f64> {
    let values = solve_values(mdp, policy)?;
    Ok(mdp.start_dist().iter().zip(&values.v).map(|(m, v)| m * v).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceDifference {
    /// `J(pi_new) - J(pi_old)` from two independent evaluations.
    pub direct: f64,
    /// `1/(1-gamma) sum_s d_new(s) sum_a pi_new(a|s) A_old(s,a)`.
    pub decomposed: f64,
}

pub fn performance_difference(
    mdp: &TabularMdp,
    pi_new: &PolicyTable,
    pi_old: &PolicyTable,
) -> Result<PerformanceDifference> {
    let direct = expected_return(mdp, pi_new)? - expected_return(mdp, pi_old)?;
    let old = solve_values(mdp, pi_old)?;
    let d_new = discounted_state_distribution(mdp, pi_new)?;
    let weighted: f64 = d_new
        .iter()
        .enumerate()
        .map(|(s, d)| d * expected_advantage(pi_new.row(s), &old.adv[s]))
        .sum();
    let decomposed = weighted / (1.0 - mdp.gamma());
    if (direct - decomposed).abs() > IDENTITY_TOL {
        return Err(Error::ConventionMismatch { direct, decomposed });
    }
    Ok(PerformanceDifference { direct, decomposed })
}

/// `sum_a pi(a) A(a)`.
pub fn expected_advantage(probs: &[f64], adv: &[f64]) -> f64 {
    probs.iter().zip(adv).map(|(p, a)| p * a).sum()
}

/// Random instance generators for sweeps and property tests.
pub mod random {
    use super::*;

    fn simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
        // Normalised exponentials: uniform on the simplex.
        let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
        // Push the rounding residue into the largest entry.
        let residue = 1.0 - row.iter().sum::<f64>();
        let top = argmax(&row);
        row[top] += residue;
        row
    }

    /// Dense random MDP with rewards in `[0, 1]`.
    pub fn mdp<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, gamma: f64) -> TabularMdp {
        let transition = (0..n_states)
            .map(|_| (0..n_actions).map(|_| simplex(rng, n_states)).collect())
            .collect();
        let reward = (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.random::<f64>()).collect())
            .collect();
        let start = simplex(rng, n_states);
        TabularMdp::new(gamma, start, transition, reward).expect("generator emits valid MDPs")
    }

    pub fn policy<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> PolicyTable {
        PolicyTable::new((0..n_states).map(|_| simplex(rng, n_actions)).collect())
            .expect("generator emits valid policies")
    }

    pub fn deterministic_policy<R: Rng + ?Sized>(
        rng: &mut R,
        n_states: usize,
        n_actions: usize,
    ) -> PolicyTable {
        let actions: Vec<usize> = (0..n_states).map(|_| rng.random_range(0..n_actions)).collect();
        PolicyTable::deterministic(&actions, n_actions).expect("in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_state(reward: f64, gamma: f64) -> TabularMdp {
        TabularMdp::new(gamma, vec![1.0], vec![vec![vec![1.0]]], vec![vec![reward]]).unwrap()
    }

    #[test]
    fn geometric_series_value() {
        let mdp = single_state(1.0, 0.9);
        let pi = PolicyTable::uniform(1, 1);
        let vb = solve_values(&mdp, &pi).unwrap();
        assert!((vb.v[0] - 10.0).abs() < 1e-12);
        assert!((expected_return(&mdp, &pi).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(TabularMdp::new(1.0, vec![1.0], vec![vec![vec![1.0]]], vec![vec![0.0]]).is_err());
        assert!(TabularMdp::new(0.5, vec![0.5], vec![vec![vec![1.0]]], vec![vec![0.0]]).is_err());
        assert!(TabularMdp::new(0.5, vec![1.0], vec![vec![vec![0.9]]], vec![vec![0.0]]).is_err());
        assert!(PolicyTable::new(vec![vec![0.7, 0.7]]).is_err());
        let mdp = single_state(1.0, 0.5);
        assert!(matches!(solve_values(&mdp, &PolicyTable::uniform(2, 1)), Err(Error::Shape(_))));
    }

    #[test]
    fn symmetric_actions_have_zero_advantage() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = random::mdp(&mut rng, 4, 3, 0.9);
        let mut transition: Vec<Vec<Vec<f64>>> =
            (0..4).map(|s| (0..3).map(|a| base.transition(s, a).to_vec()).collect()).collect();
        let mut reward: Vec<Vec<f64>> =
            (0..4).map(|s| (0..3).map(|a| base.reward(s, a)).collect()).collect();
        // State 2: all actions share action 0's row.
        for a in 1..3 {
            transition[2][a] = transition[2][0].clone();
            reward[2][a] = reward[2][0];
        }
        let mdp = TabularMdp::new(0.9, base.start_dist().to_vec(), transition, reward).unwrap();
        let pi = random::policy(&mut rng, 4, 3);
        let vb = solve_values(&mdp, &pi).unwrap();
        for a in 0..3 {
            assert!(vb.adv[2][a].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_reward_mdp_has_zero_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = random::mdp(&mut rng, 3, 2, 0.9);
        let transition = (0..3).map(|s| (0..2).map(|a| base.transition(s, a).to_vec()).collect()).collect();
        let mdp = TabularMdp::new(0.9, vec![0.0, 0.0, 1.0], transition, vec![vec![0.0; 2]; 3]).unwrap();
        let vb = solve_values(&mdp, &PolicyTable::uniform(3, 2)).unwrap();
        assert!(vb.v.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn absorbing_state_distribution() {
        // State 1 absorbs; mu is concentrated there.
        let transition = vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]];
        let mdp = TabularMdp::new(0.9, vec![0.0, 1.0], transition, vec![vec![0.0], vec![0.0]]).unwrap();
        let d = discounted_state_distribution(&mdp, &PolicyTable::uniform(2, 1)).unwrap();
        assert!(d[0].abs() < 1e-15);
        assert!((d[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_cycle_distribution_matches_truncated_series() {
        let transition = vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]];
        let mdp = TabularMdp::new(0.5, vec![1.0, 0.0], transition, vec![vec![0.0], vec![0.0]]).unwrap();
        let d = discounted_state_distribution(&mdp, &PolicyTable::uniform(2, 1)).unwrap();
        // Power series oracle: the chain alternates deterministically.
        let mut series = [0.0; 2];
        for t in 0..=100 {
            series[t % 2] += 0.5 * 0.5f64.powi(t as i32);
        }
        assert!((d[0] - series[0]).abs() < 1e-12, "{d:?} vs {series:?}");
        assert!((d[1] - series[1]).abs() < 1e-12);
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_value_return() {
        // Two states that swap deterministically with equal reward: V = c everywhere.
        let transition = vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]];
        let mdp = TabularMdp::new(0.8, vec![0.5, 0.5], transition, vec![vec![2.0], vec![2.0]]).unwrap();
        let j = expected_return(&mdp, &PolicyTable::uniform(2, 1)).unwrap();
        assert!((j - 10.0).abs() < 1e-12);
    }

    #[test]
    fn performance_difference_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mdp = random::mdp(&mut rng, 5, 3, 0.9);
        let a = random::policy(&mut rng, 5, 3);
        let b = random::policy(&mut rng, 5, 3);
        let pd = performance_difference(&mdp, &a, &b).unwrap();
        assert!((pd.direct - pd.decomposed).abs() < 1e-9);
        let same = performance_difference(&mdp, &a, &a).unwrap();
        assert!(same.direct.abs() < 1e-12 && same.decomposed.abs() < 1e-12);
    }

    #[test]
    fn greedy_improvement_is_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let mdp = random::mdp(&mut rng, 5, 3, 0.9);
            let pi = random::policy(&mut rng, 5, 3);
            let greedy = PolicyTable::greedy(&solve_values(&mdp, &pi).unwrap().q);
            let pd = performance_difference(&mdp, &greedy, &pi).unwrap();
            assert!(pd.direct >= -1e-12);
        }
    }

    #[test]
    fn solve_values_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mdp = random::mdp(&mut rng, 6, 4, 0.95);
        let pi = random::policy(&mut rng, 6, 4);
        assert_eq!(solve_values(&mdp, &pi).unwrap(), solve_values(&mdp, &pi).unwrap());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mdp = random::mdp(&mut rng, 3, 2, 0.5);
        let text = serde_json::to_string(&mdp).unwrap();
        for key in ["n_states", "n_actions", "gamma", "start_dist", "transition", "reward"] {
            assert!(text.contains(&format!("\"{key}\"")));
        }
        let back: TabularMdp = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mdp);
        let bad = text.replace("\"gamma\":0.5", "\"gamma\":1.5");
        assert!(serde_json::from_str::<TabularMdp>(&bad).is_err());
    }

    #[test]
    fn rejects_oversized_instances() {
        let n = MAX_STATES + 1;
        let row = {
            let mut r = vec![0.0; n];
            r[0] = 1.0;
            r
        };
        let mut start = vec![0.0; n];
        start[0] = 1.0;
        let res = TabularMdp::new(0.5, start, vec![vec![row]; n], vec![vec![0.0]; n]);
        assert!(res.is_err());
    }
}
