//! Cart-pole expert from a discounted linear-quadratic regulator.
//!
//! The dynamics are linearised around the upright equilibrium and the
//! discounted Riccati recursion gives a quadratic cost-to-go `s' P s`.
//! Each discrete force is scored by a one-step lookahead through the exact
//! nonlinear dynamics, `Q(s, a) = -(s' C s + r u_a^2 + gamma f(s, u_a)' P f(s, u_a))`,
//! so actions that share a force share a Q value.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::env::{cart_pole_dynamics, pendulum_action_map};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LqrConfig {
    /// Diagonal state cost for `(x, x_dot, theta, theta_dot)`.
    pub state_cost: [f64; 4],
    pub force_cost: f64,
    pub gamma: f64,
}

impl Default for LqrConfig {
    fn default() -> Self {
        Self { state_cost: [1.0, 1.0, 10.0, 1.0], force_cost: 0.1, gamma: 0.99 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticQ {
    pub p: Vec<Vec<f64>>,
    pub state_cost: Vec<f64>,
    pub force_cost: f64,
    pub gamma: f64,
    pub forces: Vec<f64>,
}

impl QuadraticQ {
    pub fn q_values(&self, s: &[f64]) -> Vec<f64> {
        let state = [s[0], s[1], s[2], s[3]];
        let stage: f64 = self.state_cost.iter().zip(s).map(|(c, x)| c * x * x).sum();
        self.forces
            .iter()
            .map(|&u| {
                let next = cart_pole_dynamics(state, u);
                let mut cost_to_go = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        cost_to_go += next[i] * self.p[i][j] * next[j];
                    }
                }
                -(stage + self.force_cost * u * u + self.gamma * cost_to_go)
            })
            .collect()
    }
}

/// Jacobians of one Euler step at the upright rest state.
fn linearise() -> (Matrix4<f64>, Vector4<f64>) {
    let h = 1e-6;
    let mut a = Matrix4::zeros();
    for j in 0..4 {
        let mut plus = [0.0; 4];
        let mut minus = [0.0; 4];
        plus[j] = h;
        minus[j] = -h;
        let (fp, fm) = (cart_pole_dynamics(plus, 0.0), cart_pole_dynamics(minus, 0.0));
        for i in 0..4 {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let (fp, fm) = (cart_pole_dynamics([0.0; 4], h), cart_pole_dynamics([0.0; 4], -h));
    let b = Vector4::from_fn(|i, _| (fp[i] - fm[i]) / (2.0 * h));
    (a, b)
}

/// Fixed point of the discounted Riccati recursion.
fn riccati(cfg: &LqrConfig) -> Result<Matrix4<f64>> {
    let (a, b) = linearise();
    let c = Matrix4::from_diagonal(&Vector4::from(cfg.state_cost));
    let g = cfg.gamma;
    let mut p = c;
    for _ in 0..1_000_000 {
        let pb = p * b;
        let gain = (pb.transpose() * a) * (g / (cfg.force_cost + g * b.dot(&pb)));
        let closed = a - b * gain;
        let next = c + gain.transpose() * gain * cfg.force_cost + g * closed.transpose() * p * closed;
        let next = (next + next.transpose()) * 0.5;
        let delta = (next - p).abs().max();
        p = next;
        if !delta.is_finite() {
            break;
        }
        if delta < 1e-10 * (1.0 + p.abs().max()) {
            return Ok(p);
        }
    }
    Err(Error::NonFinite("Riccati recursion did not converge".into()))
}

pub fn lqr_expert(n_actions: usize, cfg: &LqrConfig) -> Result<super::QModel> {
    if !(0.0..1.0).contains(&cfg.gamma) || cfg.force_cost <= 0.0 || cfg.state_cost.iter().any(|c| *c < 0.0) {
        return Err(Error::Config("LQR needs gamma in [0,1), positive force cost, non-negative state costs".into()));
    }
    let forces = (0..n_actions).map(|i| pendulum_action_map(i, n_actions)).collect::<Result<Vec<_>>>()?;
    let p = riccati(cfg)?;
    Ok(super::QModel::Quadratic(QuadraticQ {
        p: (0..4).map(|i| (0..4).map(|j| p[(i, j)]).collect()).collect(),
        state_cost: cfg.state_cost.to_vec(),
        force_cost: cfg.force_cost,
        gamma: cfg.gamma,
        forces,
    }))
}
