//! Fitted Q-Iteration with one regressor per action.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{GridAxes, GridRegressor};
use super::trees::{Forest, TreeConfig};
use super::QModel;
use crate::env::{Environment, Standardizer};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// True termination only; time-limit truncation still bootstraps.
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegressorConfig {
    Trees(TreeConfig),
    /// Interpolation grid spanning the batch states.
    Grid { points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Forest(Forest),
    Grid(GridRegressor),
}

impl Regressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Regressor::Forest(f) => f.predict(x),
            Regressor::Grid(g) => g.predict(x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regressor::Forest(_) => "extra_trees",
            Regressor::Grid(_) => "grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FqiConfig {
    pub iterations: usize,
    pub gamma: f64,
    pub regressor: RegressorConfig,
}

/// Rolls out `n_episodes` episodes of at most `max_steps` transitions each.
///
/// Actions are uniform at random unless `behaviour` supplies a Q-model, in
/// which case the greedy action is taken with probability `1 - epsilon`.
pub fn collect_batch<R: Rng + ?Sized>(
    env: &mut dyn Environment,
    n_episodes: usize,
    max_steps: usize,
    exploring_starts: bool,
    behaviour: Option<(&QModel, f64)>,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    let n_actions = env.spec().n_actions;
    let mut batch = Vec::new();
    for _ in 0..n_episodes {
        let mut s = if exploring_starts { env.reset_exploring() } else { env.reset() };
        for _ in 0..max_steps {
            let a = match behaviour {
                Some((model, eps)) if rng.random::<f64>() >= eps => model.greedy(&s),
                _ => rng.random_range(0..n_actions),
            };
            let step = env.step(a)?;
            let done = step.done();
            batch.push(Transition {
                s,
                a,
                r: step.reward,
                s_next: step.next_obs.clone(),
                terminal: step.terminated,
            });
            if done {
                break;
            }
            s = step.next_obs;
        }
    }
    Ok(batch)
}

/// One transition per grid node and action, each starting from the node.
/// Requires `state_bounds` and `reset_to`.
pub fn collect_grid_batch(env: &mut dyn Environment, points: usize) -> Result<Vec<Transition>> {
    let (lows, highs) = env
        .state_bounds()
        .ok_or_else(|| Error::Env(format!("{} has no state bounds", env.spec().id)))?;
    let axes = GridAxes::new(lows, highs, points)?;
    let n_actions = env.spec().n_actions;
    let mut batch = Vec::with_capacity(axes.n_nodes() * n_actions);
    for node in 0..axes.n_nodes() {
        let start = axes.node(node);
        for a in 0..n_actions {
            let s = env.reset_to(&start)?;
            let step = env.step(a)?;
            batch.push(Transition { s, a, r: step.reward, s_next: step.next_obs, terminal: step.terminated });
        }
    }
    Ok(batch)
}

/// Iteration 1 regresses rewards; iteration `k + 1` regresses
/// `r + gamma * max_a' Q_k(s', a')`. Actions absent from the batch predict
/// the global mean reward.
pub fn fitted_q_iteration(batch: &[Transition], n_actions: usize, cfg: &FqiConfig) -> Result<QModel> {
    if batch.is_empty() {
        return Err(Error::Dataset("FQI needs a non-empty batch".into()));
    }
    if cfg.iterations == 0 {
        return Err(Error::Config("FQI needs iterations >= 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.gamma) {
        return Err(Error::Config(format!("FQI gamma must be in [0, 1), got {}", cfg.gamma)));
    }
    if let Some(t) = batch.iter().find(|t| t.a >= n_actions) {
        return Err(Error::Dataset(format!("transition action {} out of range", t.a)));
    }
    let standardizer = Standardizer::fit(batch.iter().map(|t| t.s.as_slice()))?;
    let states: Vec<Vec<f64>> = batch.iter().map(|t| standardizer.apply(&t.s)).collect();
    let next_states: Vec<Vec<f64>> = batch.iter().map(|t| standardizer.apply(&t.s_next)).collect();
    let mean_reward = batch.iter().map(|t| t.r).sum::<f64>() / batch.len() as f64;

    let by_action: Vec<Vec<usize>> =
        (0..n_actions).map(|a| (0..batch.len()).filter(|&i| batch[i].a == a).collect()).collect();

    let axes = match &cfg.regressor {
        RegressorConfig::Grid { points } => Some(GridAxes::enclosing(states.iter().map(Vec::as_slice), *points)?),
        RegressorConfig::Trees(_) => None,
    };

    let inputs: Vec<Vec<Vec<f64>>> =
        by_action.iter().map(|idx| idx.iter().map(|&i| states[i].clone()).collect()).collect();
    let mut targets: Vec<f64> = batch.iter().map(|t| t.r).collect();
    let mut regressors = Vec::new();
    for k in 0..cfg.iterations {
        regressors = by_action
            .iter()
            .zip(&inputs)
            .enumerate()
            .map(|(a, (idx, x))| {
                let x = x.as_slice();
                let y: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
                Ok(match (&cfg.regressor, &axes) {
                    _ if idx.is_empty() => Regressor::Forest(Forest::constant(mean_reward)),
                    (RegressorConfig::Grid { .. }, Some(axes)) => Regressor::Grid(GridRegressor::fit(axes.clone(), x, &y)?),
                    (RegressorConfig::Trees(trees), _) => {
                        let trees = TreeConfig { seed: derive_seed(trees.seed, (k * n_actions + a) as u64), ..trees.clone() };
                        Regressor::Forest(Forest::fit(x, &y, &trees))
                    }
                    (RegressorConfig::Grid { .. }, None) => unreachable!(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if k + 1 == cfg.iterations || cfg.gamma == 0.0 {
            break;
        }
        targets = batch
            .iter()
            .zip(&next_states)
            .map(|(t, z)| {
                if t.terminal {
                    return t.r;
                }
                t.r + cfg.gamma * max_prediction(&regressors, axes.as_ref(), z)
            })
            .collect();
    }
    Ok(QModel::Fitted { standardizer, regressors, fqi_iterations: cfg.iterations, gamma: cfg.gamma })
}

/// `max_a Q(z, a)`; grid regressors share their axes, so corners are found once.
fn max_prediction(regressors: &[Regressor], axes: Option<&GridAxes>, z: &[f64]) -> f64 {
    let corners = axes.map(|axes| axes.corners(z));
    regressors
        .iter()
        .map(|r| match (r, &corners) {
            (Regressor::Grid(g), Some(c)) => c.iter().map(|(n, w)| w * g.values[*n]).sum(),
            _ => r.predict(z),
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::value_iteration;
    use crate::mdp::TabularMdp;

    /// Two states, two actions; action 1 switches state. Features are one-hot.
    fn two_state_batch() -> (TabularMdp, Vec<Transition>) {
        let transition = vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        ];
        let reward = vec![vec![0.0, 1.0], vec![2.0, 0.5]];
        let mdp = TabularMdp::new(0.5, vec![1.0, 0.0], transition, reward).unwrap();
        let onehot = |s: usize| if s == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
        let mut batch = Vec::new();
        for s in 0..2 {
            for a in 0..2 {
                let next = if a == 1 { 1 - s } else { s };
                for _ in 0..5 {
                    batch.push(Transition {
                        s: onehot(s),
                        a,
                        r: mdp.reward(s, a),
                        s_next: onehot(next),
                        terminal: false,
                    });
                }
            }
        }
        (mdp, batch)
    }

    #[test]
    fn matches_value_iteration_on_a_tabular_batch() {
        let (mdp, batch) = two_state_batch();
        let cfg = FqiConfig { iterations: 60, gamma: 0.5, regressor: RegressorConfig::Trees(TreeConfig { n_trees: 5, ..TreeConfig::default() }) };
        let model = fitted_q_iteration(&batch, 2, &cfg).unwrap();
        let exact = value_iteration(&mdp, 1e-12).unwrap().q;
        for (s, features) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
            let q = model.q_values(features);
            for a in 0..2 {
                assert!((q[a] - exact[s][a]).abs() < 1e-9, "s={s} a={a}: {} vs {}", q[a], exact[s][a]);
            }
        }
    }

    #[test]
    fn grid_regressor_matches_value_iteration_on_a_tabular_batch() {
        let (mdp, batch) = two_state_batch();
        let cfg = FqiConfig { iterations: 80, gamma: 0.5, regressor: RegressorConfig::Grid { points: 2 } };
        let model = fitted_q_iteration(&batch, 2, &cfg).unwrap();
        let exact = value_iteration(&mdp, 1e-12).unwrap().q;
        for (s, features) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
            let q = model.q_values(features);
            for a in 0..2 {
                assert!((q[a] - exact[s][a]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn grid_batch_starts_every_action_at_every_node() {
        let mut env = crate::env::MountainCar::new(3, 0).unwrap();
        let batch = collect_grid_batch(&mut env, 4).unwrap();
        assert_eq!(batch.len(), 16 * 3);
        assert_eq!(batch[0].s, vec![-1.2, -0.07]);
        assert_eq!((batch[0].a, batch[1].a, batch[3].a), (0, 1, 0));
        let mut lob = crate::env::LobEnv::new(Default::default(), 0).unwrap();
        assert!(collect_grid_batch(&mut lob, 4).is_err());
    }

    #[test]
    fn zero_discount_is_reward_regression() {
        let (_, batch) = two_state_batch();
        let one = FqiConfig { iterations: 1, gamma: 0.0, regressor: RegressorConfig::Trees(TreeConfig::default()) };
        let many = FqiConfig { iterations: 7, ..one.clone() };
        let a = fitted_q_iteration(&batch, 2, &one).unwrap();
        let b = fitted_q_iteration(&batch, 2, &many).unwrap();
        match (a, b) {
            (QModel::Fitted { regressors: fa, .. }, QModel::Fitted { regressors: fb, .. }) => assert_eq!(fa, fb),
            _ => unreachable!(),
        }
    }

    #[test]
    fn unseen_action_predicts_mean_reward() {
        let (_, batch) = two_state_batch();
        let cfg = FqiConfig { iterations: 1, gamma: 0.9, regressor: RegressorConfig::Trees(TreeConfig::default()) };
        let model = fitted_q_iteration(&batch, 3, &cfg).unwrap();
        let mean = batch.iter().map(|t| t.r).sum::<f64>() / batch.len() as f64;
        assert!((model.q_values(&[1.0, 0.0])[2] - mean).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = FqiConfig { iterations: 1, gamma: 0.9, regressor: RegressorConfig::Trees(TreeConfig::default()) };
        assert!(fitted_q_iteration(&[], 2, &cfg).is_err());
        let (_, batch) = two_state_batch();
        assert!(fitted_q_iteration(&batch, 2, &FqiConfig { iterations: 0, ..cfg.clone() }).is_err());
        assert!(fitted_q_iteration(&batch, 1, &cfg).is_err());
    }
}
