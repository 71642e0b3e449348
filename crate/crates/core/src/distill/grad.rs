//! Full-batch objectives and their exact gradients.
//!
//! With logits `z = W x` and `p = softmax(z)`, the per-row logit gradients are
//! `p_b (A_b - sum_a p_a A_a)` for the expected advantage and
//! `2 p_b (e_b - sum_a e_a p_a)`, `e = p - pi_E`, for the squared policy
//! distance. The weight gradient is their outer product with `x`, averaged
//! over rows.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expert::{advantage_from_row, ExpertPolicyKind, TrajectoryDataset};

use super::SoftmaxLinearPolicy;

/// Standardized inputs (with the trailing 1), advantages and expert
/// probabilities, one matrix column per dataset row.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    inputs: DMatrix<f64>,
    advantages: DMatrix<f64>,
    expert_probs: DMatrix<f64>,
}

impl PreparedDataset {
    /// Greedy expert: one-hot on the recorded action, advantages relative to it.
    pub fn from_dataset(ds: &TrajectoryDataset) -> Result<Self> {
        ds.validate()?;
        let std = &ds.meta.standardizer;
        let mut inputs = Vec::with_capacity(ds.len());
        let mut advantages = Vec::with_capacity(ds.len());
        let mut expert_probs = Vec::with_capacity(ds.len());
        for row in &ds.rows {
            let mut x = std.apply(&row.s);
            x.push(1.0);
            let mut onehot = vec![0.0; ds.meta.n_actions];
            onehot[row.a] = 1.0;
            advantages.push(advantage_from_row(&row.q, ExpertPolicyKind::Stochastic(&onehot)));
            inputs.push(x);
            expert_probs.push(onehot);
        }
        Self::new(inputs, advantages, expert_probs)
    }

    /// Inputs must already end with the constant 1.
    pub fn new(inputs: Vec<Vec<f64>>, advantages: Vec<Vec<f64>>, expert_probs: Vec<Vec<f64>>) -> Result<Self> {
        let n = inputs.len();
        if n == 0 || advantages.len() != n || expert_probs.len() != n {
            return Err(Error::Dataset("prepared dataset needs equally many non-zero rows".into()));
        }
        let (d, k) = (inputs[0].len(), advantages[0].len());
        if d == 0 || k == 0 {
            return Err(Error::Shape("prepared dataset needs inputs and actions".into()));
        }
        if inputs.iter().any(|x| x.len() != d) || advantages.iter().chain(&expert_probs).any(|r| r.len() != k) {
            return Err(Error::Shape("ragged prepared dataset".into()));
        }
        if inputs.iter().chain(&advantages).chain(&expert_probs).flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prepared dataset".into()));
        }
        let columns = |rows: Vec<Vec<f64>>, len| DMatrix::from_vec(len, n, rows.concat());
        Ok(Self {
            inputs: columns(inputs, d),
            advantages: columns(advantages, k),
            expert_probs: columns(expert_probs, k),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_actions(&self) -> usize {
        self.advantages.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.inputs.nrows() - 1
    }

    /// Standardized features of row `i`, without the trailing 1.
    pub fn features(&self, i: usize) -> &[f64] {
        &column(&self.inputs, i)[..self.obs_dim()]
    }

    pub fn advantages(&self, i: usize) -> &[f64] {
        column(&self.advantages, i)
    }

    pub fn expert_probs(&self, i: usize) -> &[f64] {
        column(&self.expert_probs, i)
    }

    /// Rewrites every advantage row in place.
    pub fn map_advantages(&mut self, mut f: impl FnMut(&mut [f64])) {
        for mut col in self.advantages.column_iter_mut() {
            f(col.as_mut_slice());
        }
    }

    fn check(&self, policy: &SoftmaxLinearPolicy) {
        assert_eq!((policy.n_actions(), policy.obs_dim()), (self.n_actions(), self.obs_dim()), "policy/dataset shape");
    }
}

fn column(m: &DMatrix<f64>, i: usize) -> &[f64] {
    let rows = m.nrows();
    &m.as_slice()[i * rows..(i + 1) * rows]
}

/// Gradient and value of a scalar objective in `W`'s layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub grad: Vec<f64>,
    pub value: f64,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Both objectives from a single softmax pass:
/// `(J_hat and its gradient, L_hat and its gradient)`.
pub fn grad_both(policy: &SoftmaxLinearPolicy, data: &PreparedDataset) -> (Gradient, Gradient) {
    data.check(policy);
    let k = policy.n_actions();
    let w = DMatrix::from_row_slice(k, policy.obs_dim() + 1, policy.weights());
    // Logits become probabilities, then the advantage logit gradient.
    let mut g_adv = &w * &data.inputs;
    let mut g_bc = DMatrix::zeros(k, data.len());
    let (mut j_hat, mut l_hat) = (0.0, 0.0);
    let rows_adv = g_adv.as_mut_slice().chunks_mut(k);
    let rows_bc = g_bc.as_mut_slice().chunks_mut(k);
    for (i, (p, bc)) in rows_adv.zip(rows_bc).enumerate() {
        softmax_in_place(p);
        let adv = data.advantages(i);
        let target = data.expert_probs(i);
        let mean: f64 = p.iter().zip(adv).map(|(p, a)| p * a).sum();
        let mut weighted = 0.0;
        for (pa, ta) in p.iter().zip(target) {
            let e = pa - ta;
            l_hat += e * e;
            weighted += e * pa;
        }
        j_hat += mean;
        for b in 0..k {
            bc[b] = 2.0 * p[b] * ((p[b] - target[b]) - weighted);
            p[b] *= adv[b] - mean;
        }
    }
    let n = data.len() as f64;
    let flatten = |g: DMatrix<f64>| -> Vec<f64> {
        let grad = g * data.inputs.transpose() / n;
        grad.transpose().as_slice().to_vec()
    };
    (Gradient { grad: flatten(g_adv), value: j_hat / n }, Gradient { grad: flatten(g_bc), value: l_hat / n })
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// `J_hat = mean_s sum_a pi(a|s) A(s, a)` and its gradient.
pub fn grad_advantage(policy: &SoftmaxLinearPolicy, data: &PreparedDataset) -> Gradient {
    grad_both(policy, data).0
}

/// `L_hat = mean_s sum_a (pi(a|s) - pi_E(a|s))^2` and its gradient.
pub fn grad_bc(policy: &SoftmaxLinearPolicy, data: &PreparedDataset) -> Gradient {
    grad_both(policy, data).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_state(adv: Vec<f64>, expert: Vec<f64>) -> PreparedDataset {
        PreparedDataset::new(vec![vec![1.0]], vec![adv], vec![expert]).unwrap()
    }

    #[test]
    fn two_action_advantage_gradient() {
        let data = one_state(vec![1.0, -1.0], vec![1.0, 0.0]);
        let g = grad_advantage(&SoftmaxLinearPolicy::zeros(2, 0), &data);
        assert!((g.grad[0] - 0.5).abs() < 1e-15 && (g.grad[1] + 0.5).abs() < 1e-15);
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn zero_advantages_give_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs = (0..5).map(|_| vec![rng.random::<f64>(), 1.0]).collect();
        let data = PreparedDataset::new(inputs, vec![vec![0.0; 3]; 5], vec![vec![1.0, 0.0, 0.0]; 5]).unwrap();
        let policy = SoftmaxLinearPolicy::from_rows(vec![vec![0.3, 0.1], vec![-1.0, 0.2], vec![0.5, 0.0]]).unwrap();
        let g = grad_advantage(&policy, &data);
        assert!(g.grad.iter().all(|x| *x == 0.0));
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn matched_expert_gives_zero_bc() {
        let policy = SoftmaxLinearPolicy::from_rows(vec![vec![0.3, 0.1], vec![-1.0, 0.2]]).unwrap();
        let inputs: Vec<Vec<f64>> = vec![vec![0.4, 1.0], vec![-2.0, 1.0]];
        let expert: Vec<Vec<f64>> = inputs.iter().map(|x| policy.policy_probs(&x[..1]).unwrap()).collect();
        let data = PreparedDataset::new(inputs, vec![vec![0.0; 2]; 2], expert).unwrap();
        let g = grad_bc(&policy, &data);
        assert!(g.grad.iter().all(|x| *x == 0.0));
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn uniform_policy_bc_loss() {
        let g = grad_bc(&SoftmaxLinearPolicy::zeros(2, 0), &one_state(vec![0.0, -1.0], vec![1.0, 0.0]));
        assert_eq!(g.value, 0.5);
    }

    #[test]
    fn constant_shift_of_advantages_leaves_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20;
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 1.0]).collect();
        let adv: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random_range(-3.0..0.0)).collect()).collect();
        let shifted: Vec<Vec<f64>> = adv.iter().map(|r| r.iter().map(|a| a + 12.5).collect()).collect();
        let expert = vec![vec![1.0, 0.0, 0.0, 0.0]; n];
        let rows = (0..4).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let policy = SoftmaxLinearPolicy::from_rows(rows).unwrap();
        let a = grad_advantage(&policy, &PreparedDataset::new(inputs.clone(), adv, expert.clone()).unwrap());
        let b = grad_advantage(&policy, &PreparedDataset::new(inputs, shifted, expert).unwrap());
        for (x, y) in a.grad.iter().zip(&b.grad) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
