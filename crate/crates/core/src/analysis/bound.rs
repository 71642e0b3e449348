//! Exact checks of the performance-difference lower bound
//! `J(pi_I) - J(pi_E) >= DA / (1 - gamma) - gamma / (2 (1 - gamma)^3) * ||pi_I - pi_E||^2`
//! where `DA = sum_s d_E(s) sum_a pi_I(a|s) A_E(s, a)` uses the normalised
//! visitation `d_E`, so the first term carries the `1 / (1 - gamma)` that
//! the normalisation removed. Rewards must lie in `[0, 1]`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{
    discounted_state_distribution, expected_advantage, expected_return, random, solve_values, PolicyTable, TabularMdp,
};
use crate::seeding::derive_seed;

pub const BOUND_TOL: f64 = 1e-9;

/// `DA` with the normalised expert visitation.
pub fn disadvantage(mdp: &TabularMdp, pi_e: &PolicyTable, pi_i: &PolicyTable) -> Result<f64> {
    check_shapes(pi_e, pi_i)?;
    let d = discounted_state_distribution(mdp, pi_e)?;
    let adv = solve_values(mdp, pi_e)?.adv;
    Ok(d.iter().enumerate().map(|(s, ds)| ds * expected_advantage(pi_i.row(s), &adv[s])).sum())
}

/// `max_s sum_a |pi_a(a|s) - pi_b(a|s)|`, in `[0, 2]`.
pub fn policy_distance_inf(pi_a: &PolicyTable, pi_b: &PolicyTable) -> Result<f64> {
    check_shapes(pi_a, pi_b)?;
    Ok(pi_a
        .rows()
        .iter()
        .zip(pi_b.rows())
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

fn check_shapes(a: &PolicyTable, b: &PolicyTable) -> Result<()> {
    if (a.n_states(), a.n_actions()) != (b.n_states(), b.n_actions()) {
        return Err(Error::Shape(format!(
            "policy tables differ in shape: {}x{} vs {}x{}",
            a.n_states(),
            a.n_actions(),
            b.n_states(),
            b.n_actions()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    /// `DA` under the normalised visitation.
    pub disadvantage: f64,
    /// `DA / (1 - gamma)`.
    pub adv_term: f64,
    pub distance: f64,
    pub penalty: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

pub fn bound_check(mdp: &TabularMdp, pi_e: &PolicyTable, pi_i: &PolicyTable) -> Result<BoundReport> {
    let gamma = mdp.gamma();
    let lhs = expected_return(mdp, pi_i)? - expected_return(mdp, pi_e)?;
    let disadvantage = disadvantage(mdp, pi_e, pi_i)?;
    let adv_term = disadvantage / (1.0 - gamma);
    let distance = policy_distance_inf(pi_i, pi_e)?;
    let penalty = gamma / (2.0 * (1.0 - gamma).powi(3)) * distance * distance;
    let rhs = adv_term - penalty;
    let slack = lhs - rhs;
    Ok(BoundReport { lhs, disadvantage, adv_term, distance, penalty, rhs, slack, holds: slack >= -BOUND_TOL })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_instances: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub gammas: Vec<f64>,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { n_instances: 1000, max_states: 6, max_actions: 4, gammas: vec![0.5, 0.9, 0.95], seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub instance: usize,
    pub gamma: f64,
    pub n_states: usize,
    pub n_actions: usize,
    pub report: BoundReport,
}

/// Random instance `i` of a sweep. The surrogate is, in turn, a fresh
/// stochastic policy, a deterministic policy, or a small perturbation of
/// the expert.
pub fn sweep_instance(cfg: &SweepConfig, i: usize) -> (TabularMdp, PolicyTable, PolicyTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i as u64));
    let n_s = rng.random_range(1..=cfg.max_states);
    let n_a = rng.random_range(2.min(cfg.max_actions)..=cfg.max_actions);
    let gamma = cfg.gammas[i % cfg.gammas.len()];
    let mdp = random::mdp(&mut rng, n_s, n_a, gamma);
    let pi_e = random::policy(&mut rng, n_s, n_a);
    let pi_i = match i % 3 {
        0 => random::policy(&mut rng, n_s, n_a),
        1 => random::deterministic_policy(&mut rng, n_s, n_a),
        _ => {
            let eps: f64 = rng.random_range(0.0..0.2);
            let other = random::policy(&mut rng, n_s, n_a);
            let rows = pi_e
                .rows()
                .iter()
                .zip(other.rows())
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - eps) * x + eps * y).collect())
                .collect();
            PolicyTable::new(rows).expect("mixture of valid rows")
        }
    };
    (mdp, pi_e, pi_i)
}

pub fn bound_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.n_instances == 0 || cfg.max_states == 0 || cfg.max_actions == 0 || cfg.gammas.is_empty() {
        return Err(Error::Config("sweep needs instances, states, actions and gammas".into()));
    }
    if cfg.max_states > crate::mdp::MAX_STATES || cfg.max_actions > crate::mdp::MAX_ACTIONS {
        return Err(Error::Config("sweep sizes exceed the tabular limits".into()));
    }
    if cfg.gammas.iter().any(|g| !(0.0..1.0).contains(g)) {
        return Err(Error::Config("gammas must lie in [0, 1)".into()));
    }
    (0..cfg.n_instances)
        .map(|i| {
            let (mdp, pi_e, pi_i) = sweep_instance(cfg, i);
            Ok(SweepRow {
                instance: i,
                gamma: mdp.gamma(),
                n_states: mdp.n_states(),
                n_actions: mdp.n_actions(),
                report: bound_check(&mdp, &pi_e, &pi_i)?,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "instance,gamma,lhs,adv_term,penalty,slack,holds")?;
    for r in rows {
        let b = &r.report;
        writeln!(w, "{},{},{},{},{},{},{}", r.instance, r.gamma, b.lhs, b.adv_term, b.penalty, b.slack, b.holds)?;
    }
    w.flush()?;
    Ok(())
}
