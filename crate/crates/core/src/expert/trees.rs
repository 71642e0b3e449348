//! Extremely randomized regression trees.
//!
//! At every node each feature gets one threshold drawn uniformly between its
//! node-local min and max; the split with the largest variance reduction
//! wins. No bootstrap: every tree sees the full training set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::seeding::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { n_trees: 50, max_depth: 6, min_samples_split: 2, seed: 0 }
    }
}

const LEAF: i32 = -1;

/// `(feature, value, left, right)`; feature `-1` marks a leaf and `value`
/// is then the prediction, otherwise the split threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Node(i32, f64, u32, u32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self.nodes[0];
        while node.0 != LEAF {
            let next = if x[node.0 as usize] < node.1 { node.2 } else { node.3 };
            node = self.nodes[next as usize];
        }
        node.1
    }

    fn push(&mut self, feature: i32, value: f64) -> usize {
        self.nodes.push(Node(feature, value, 0, 0));
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: &'a TreeConfig,
    rng: ChaCha8Rng,
    tree: Tree,
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let node_mean = mean(self.y, idx);
        if depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split.max(2) {
            return self.tree.push(LEAF, node_mean);
        }
        let first = self.y[idx[0]];
        if idx.iter().all(|&i| self.y[i] == first) {
            return self.tree.push(LEAF, node_mean);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.tree.push(LEAF, node_mean);
        };
        let split = partition(idx, |i| self.x[i][feature] < threshold);
        let node = self.tree.push(feature as i32, threshold);
        let (lo, hi) = idx.split_at_mut(split);
        let left = self.build(lo, depth + 1);
        let right = self.build(hi, depth + 1);
        self.tree.nodes[node].2 = left as u32;
        self.tree.nodes[node].3 = right as u32;
        node
    }

    /// Random threshold per feature, scored by the sum-of-squares reduction.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let n_features = self.x[idx[0]].len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let n = idx.len() as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..n_features {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in idx {
                lo = lo.min(self.x[i][f]);
                hi = hi.max(self.x[i][f]);
            }
            if hi <= lo {
                continue;
            }
            let mut threshold = self.rng.random_range(lo..hi);
            if threshold <= lo {
                // Keep at least one sample on each side.
                threshold = lo + (hi - lo) * 0.5;
            }
            let (mut left_sum, mut left_n) = (0.0, 0.0);
            for &i in idx {
                if self.x[i][f] < threshold {
                    left_sum += self.y[i];
                    left_n += 1.0;
                }
            }
            let right_n = n - left_n;
            if left_n == 0.0 || right_n == 0.0 {
                continue;
            }
            let right_sum = total - left_sum;
            // Between-group sum of squares; larger means lower child variance.
            let score = left_sum * left_sum / left_n + right_sum * right_sum / right_n;
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((f, threshold, score));
            }
        }
        best.map(|(f, t, _)| (f, t))
    }
}

fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut k = 0;
    for j in 0..idx.len() {
        if pred(idx[j]) {
            idx.swap(k, j);
            k += 1;
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &TreeConfig) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty(), "cannot fit a forest on no samples");
        let trees = (0..cfg.n_trees.max(1))
            .map(|t| {
                let mut builder = Builder {
                    x,
                    y,
                    cfg,
                    rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, t as u64)),
                    tree: Tree { nodes: Vec::new() },
                };
                let mut idx: Vec<usize> = (0..x.len()).collect();
                builder.build(&mut idx, 0);
                builder.tree
            })
            .collect();
        Self { trees }
    }

    /// A forest that always predicts `value`.
    pub fn constant(value: f64) -> Self {
        Self { trees: vec![Tree { nodes: vec![Node(LEAF, value, 0, 0)] }] }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        let y = x.iter().map(|v| if v[0] < 0.5 { -1.0 } else { 2.0 }).collect();
        (x, y)
    }

    #[test]
    fn fits_a_step_function() {
        let (x, y) = grid(200);
        let f = Forest::fit(&x, &y, &TreeConfig { max_depth: 8, ..TreeConfig::default() });
        assert!((f.predict(&[0.1]) + 1.0).abs() < 1e-9);
        assert!((f.predict(&[0.9]) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_targets_give_single_leaf() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let f = Forest::fit(&x, &[3.0; 10], &TreeConfig::default());
        assert_eq!(f.trees[0].n_nodes(), 1);
        assert_eq!(f.predict(&[100.0]), 3.0);
    }

    #[test]
    fn depth_is_bounded() {
        let (x, y): (Vec<Vec<f64>>, Vec<f64>) =
            (0..500).map(|i| (vec![(i as f64).sin(), (i as f64).cos()], i as f64)).unzip();
        let cfg = TreeConfig { n_trees: 3, max_depth: 4, ..TreeConfig::default() };
        let f = Forest::fit(&x, &y, &cfg);
        for t in &f.trees {
            assert!(t.n_nodes() <= (1 << 5) - 1);
        }
    }

    #[test]
    fn seeded_fit_is_deterministic() {
        let (x, y) = grid(100);
        let cfg = TreeConfig { seed: 5, ..TreeConfig::default() };
        assert_eq!(Forest::fit(&x, &y, &cfg), Forest::fit(&x, &y, &cfg));
    }
}
