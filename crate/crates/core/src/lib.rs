//! Distillation of interpretable softmax-linear policies from expert
//! Q-functions, with exact tabular oracles for the underlying theory.

pub mod analysis;
pub mod config;
pub mod distill;
pub mod env;
pub mod error;
pub mod expert;
pub mod mdp;
pub mod seeding;

pub use error::{Error, Result};
