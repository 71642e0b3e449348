//! Weight tables of distilled policies and the order-book checks on them.

use std::io::Write;

use super::eval::Actor;
use crate::distill::SoftmaxLinearPolicy;
use crate::env::{imbalance_rule, Environment, LobConfig, LobEnv, FLAT, LONG, SHORT};
use crate::error::{Error, Result};

/// Largest relative gap allowed between `|w(long, f)|` and `|w(short, f)|`.
pub const MAGNITUDE_TOL: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightReport {
    pub action_names: Vec<String>,
    /// Feature names followed by `bias`.
    pub column_names: Vec<String>,
    /// `n_actions x (obs_dim + 1)`.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

pub fn weight_report(
    policy: &SoftmaxLinearPolicy,
    feature_names: &[String],
    action_names: Option<&[String]>,
) -> Result<WeightReport> {
    if feature_names.len() != policy.obs_dim() {
        return Err(Error::Shape(format!(
            "{} feature names for {} features",
            feature_names.len(),
            policy.obs_dim()
        )));
    }
    let action_names = match action_names {
        Some(names) if names.len() == policy.n_actions() => names.to_vec(),
        Some(names) => {
            return Err(Error::Shape(format!("{} action names for {} actions", names.len(), policy.n_actions())))
        }
        None => (0..policy.n_actions()).map(|a| a.to_string()).collect(),
    };
    let mut column_names = feature_names.to_vec();
    column_names.push("bias".into());
    Ok(WeightReport { action_names, column_names, weights: policy.rows() })
}

impl WeightReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "action,feature,weight")?;
        for (action, row) in self.action_names.iter().zip(&self.weights) {
            for (feature, x) in self.column_names.iter().zip(row) {
                writeln!(w, "{action},{feature},{x}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Sign pattern long: +bid/-ask, short: -bid/+ask, and matching
    /// long/short magnitudes, on the first two (bid, ask) columns.
    pub fn lob_checks(&self) -> Vec<Check> {
        let w = |a: usize, f: usize| self.weights.get(a).and_then(|r| r.get(f)).copied().unwrap_or(0.0);
        let sign = |name: &str, value: f64, positive: bool| Check {
            name: name.into(),
            value,
            pass: if positive { value > 0.0 } else { value < 0.0 },
        };
        let balance = |name: &str, f: usize| {
            let (l, s) = (w(LONG, f).abs(), w(SHORT, f).abs());
            let gap = if l.max(s) > 0.0 { (l - s).abs() / l.max(s) } else { f64::INFINITY };
            Check { name: name.into(), value: gap, pass: gap <= MAGNITUDE_TOL }
        };
        vec![
            sign("long_bid_positive", w(LONG, 0), true),
            sign("long_ask_negative", w(LONG, 1), false),
            sign("short_bid_negative", w(SHORT, 0), false),
            sign("short_ask_positive", w(SHORT, 1), true),
            balance("bid_magnitude_balanced", 0),
            balance("ask_magnitude_balanced", 1),
        ]
    }
}

pub fn write_checks_csv<W: Write>(checks: &[Check], mut w: W) -> Result<()> {
    writeln!(w, "check,value,status")?;
    for c in checks {
        writeln!(w, "{},{},{}", c.name, c.value, if c.pass { "PASS" } else { "FAIL" })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleAgreement {
    pub n_states: usize,
    pub n_considered: usize,
    pub n_agree: usize,
}

impl RuleAgreement {
    pub fn rate(&self) -> f64 {
        if self.n_considered == 0 {
            return 0.0;
        }
        self.n_agree as f64 / self.n_considered as f64
    }
}

/// Compares `actor` with the imbalance rule on `n_states` fresh order-book
/// states, skipping books with `|bid - ask| / (bid + ask) <= margin`.
pub fn imbalance_agreement(
    actor: &dyn Actor,
    lob: &LobConfig,
    n_states: usize,
    seed: u64,
    margin: f64,
) -> Result<RuleAgreement> {
    let mut env = LobEnv::new(lob.clone(), seed)?;
    let mut obs = env.reset();
    let mut out = RuleAgreement { n_states, n_considered: 0, n_agree: 0 };
    for _ in 0..n_states {
        let (bid, ask) = (obs[0], obs[1]);
        if (bid - ask).abs() / (bid + ask) > margin {
            out.n_considered += 1;
            if actor.act(&obs)? == imbalance_rule(bid, ask) {
                out.n_agree += 1;
            }
        }
        let step = env.step(FLAT)?;
        obs = if step.done() { env.reset() } else { step.next_obs };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn zero_policy_fails_every_check() {
        let report = weight_report(&SoftmaxLinearPolicy::zeros(3, 4), &names(4), None).unwrap();
        assert!(report.weights.iter().flatten().all(|w| *w == 0.0));
        let checks = report.lob_checks();
        assert_eq!(checks.len(), 6);
        assert!(checks.iter().all(|c| !c.pass));
    }

    #[test]
    fn ideal_pattern_passes() {
        let rows = vec![vec![1.0, -1.1, 0.3, 0.0], vec![0.0; 4], vec![-1.05, 1.0, 0.2, 0.0]];
        let report = weight_report(&SoftmaxLinearPolicy::from_rows(rows).unwrap(), &names(3), None).unwrap();
        assert!(report.lob_checks().iter().all(|c| c.pass));
        let unbalanced = vec![vec![1.0, -1.0, 0.0], vec![0.0; 3], vec![-0.5, 1.0, 0.0]];
        let report = weight_report(&SoftmaxLinearPolicy::from_rows(unbalanced).unwrap(), &names(2), None).unwrap();
        let failed: Vec<String> = report.lob_checks().into_iter().filter(|c| !c.pass).map(|c| c.name).collect();
        assert_eq!(failed, vec!["bid_magnitude_balanced"]);
    }

    #[test]
    fn csv_layout() {
        let actions: Vec<String> = ["long", "flat", "short"].map(String::from).to_vec();
        let report = weight_report(&SoftmaxLinearPolicy::zeros(3, 2), &names(2), Some(&actions)).unwrap();
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 3);
        assert!(text.contains("\nshort,bias,0\n"));
        let mut out = Vec::new();
        write_checks_csv(&report.lob_checks(), &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("long_bid_positive,0,FAIL"));
        assert!(weight_report(&SoftmaxLinearPolicy::zeros(3, 2), &names(3), None).is_err());
    }

    #[test]
    fn the_rule_agrees_with_itself() {
        let rule = |o: &[f64]| imbalance_rule(o[0], o[1]);
        let a = imbalance_agreement(&rule, &LobConfig::default(), 500, 1, 0.1).unwrap();
        assert!(a.n_considered > 300);
        assert_eq!(a.rate(), 1.0);
        let contrarian = |o: &[f64]| imbalance_rule(o[1], o[0]);
        assert_eq!(imbalance_agreement(&contrarian, &LobConfig::default(), 500, 1, 0.1).unwrap().n_agree, 0);
    }
}
