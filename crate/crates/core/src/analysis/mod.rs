//! Theory checks and experiment reports.

mod bound;
mod curve;
mod eval;
pub mod plot;
mod weights;

pub use bound::{
    bound_check, bound_sweep, disadvantage, policy_distance_inf, sweep_instance, write_sweep_csv, BoundReport,
    SweepConfig, SweepRow, BOUND_TOL,
};
pub use curve::{comparison_curve, Curve, CurveConfig, CurvePoint, Method};
pub use eval::{episode_return, evaluate_policy, mean_std, Actor, EvalReport};
pub use weights::{
    imbalance_agreement, weight_report, write_checks_csv, Check, RuleAgreement, WeightReport, MAGNITUDE_TOL,
};
