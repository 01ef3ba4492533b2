//! Bagged CART regression forest.
//!
//! Trees split on squared-error reduction over a random feature subset and
//! keep their bootstrap targets in the leaves, so the same forest answers
//! mean, probability (0/1 targets) and quantile queries. Each tree's stream
//! is `derive_seed(seed, tree_index)`, which makes the fit independent of
//! how trees are scheduled across workers.

use crate::data::Matrix;
use crate::par;
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mtry: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        mean: f64,
        start: usize,
        len: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
    leaf_targets: Vec<f64>,
}

impl Tree {
    fn leaf(&self, row: &[f64]) -> (f64, &[f64]) {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
                Node::Leaf { mean, start, len } => {
                    return (mean, &self.leaf_targets[start..start + len])
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: &'a ForestParams,
    rng: SplitMix64,
    nodes: Vec<Node>,
    leaf_targets: Vec<f64>,
    features: Vec<usize>,
}

impl Builder<'_> {
    fn make_leaf(&mut self, idx: &[usize]) -> usize {
        let start = self.leaf_targets.len();
        let mut sum = 0.0;
        for &i in idx {
            self.leaf_targets.push(self.y[i]);
            sum += self.y[i];
        }
        self.nodes.push(Node::Leaf {
            mean: sum / idx.len() as f64,
            start,
            len: idx.len(),
        });
        self.nodes.len() - 1
    }

    /// Best `(feature, threshold, gain)` over a random feature subset.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let k = self.features.len();
        let mtry = self.params.mtry.min(k);
        for j in 0..mtry {
            let pick = j + self.rng.below(k - j);
            self.features.swap(j, pick);
        }
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let parent = total * total / n as f64;
        let min_leaf = self.params.min_leaf;

        let mut best: Option<(usize, f64, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for &f in &self.features[..mtry] {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for s in 0..n - 1 {
                left_sum += pairs[s].1;
                let n_left = s + 1;
                if n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                if pairs[s].0 == pairs[s + 1].0 {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / (n - n_left) as f64;
                let gain = score - parent;
                if gain > 1e-12 * parent.abs().max(1.0) && best.is_none_or(|(_, _, g)| gain > g) {
                    let threshold = 0.5 * (pairs[s].0 + pairs[s + 1].0);
                    best = Some((f, threshold, gain));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let n = idx.len();
        let constant = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf || constant {
            return self.make_leaf(&idx);
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return self.make_leaf(&idx);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x.get(i, feature) <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[at]
        {
            *l = left;
            *r = right;
        }
        at
    }
}

impl Forest {
    pub fn fit(x: &Matrix, y: &[f64], params: &ForestParams) -> Self {
        let n = y.len();
        let trees = par::map_indexed(params.n_trees, |t| {
            let mut rng = SplitMix64::new(derive_seed(params.seed, t as u64));
            let sample = rng.bootstrap(n);
            let mut builder = Builder {
                x,
                y,
                params,
                rng,
                nodes: Vec::new(),
                leaf_targets: Vec::with_capacity(n),
                features: (0..x.cols()).collect(),
            };
            builder.grow(sample, 0);
            Tree {
                nodes: builder.nodes,
                leaf_targets: builder.leaf_targets,
            }
        });
        Self { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict_mean(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.leaf(row).0).sum::<f64>() / self.trees.len() as f64
    }

    /// Quantiles of the leaf-pooled weighted sample: each tree spreads unit
    /// mass evenly over the bootstrap targets in the leaf `row` falls into.
    pub fn predict_quantiles(&self, row: &[f64], lo: f64, hi: f64) -> (f64, f64) {
        let mut pooled: Vec<(f64, f64)> = Vec::new();
        for tree in &self.trees {
            let (_, targets) = tree.leaf(row);
            let w = 1.0 / targets.len() as f64;
            pooled.extend(targets.iter().map(|&t| (t, w)));
        }
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = self.trees.len() as f64;
        let pick = |level: f64| {
            let target = level * total - 1e-12 * total;
            let mut cum = 0.0;
            for &(v, w) in &pooled {
                cum += w;
                if cum >= target {
                    return v;
                }
            }
            pooled.last().map(|p| p.0).unwrap_or(f64::NAN)
        };
        (pick(lo), pick(hi))
    }
}
