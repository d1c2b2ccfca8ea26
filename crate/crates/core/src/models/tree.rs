//! CART classification tree with Gini impurity.

use serde::{Deserialize, Serialize};

use super::{ModelError, Samples};
use crate::dataset::Label;
use crate::rng::SplitMix64;

/// `1 - Σ p_i²` over the two class counts.
pub fn gini_impurity(class_counts: [u64; 2]) -> Result<f64, ModelError> {
    let n = class_counts[0] + class_counts[1];
    if n == 0 {
        return Err(ModelError::EmptyCounts);
    }
    Ok(gini(class_counts[0] as f64, class_counts[1] as f64))
}

fn gini(a: f64, b: f64) -> f64 {
    let n = a + b;
    if n == 0.0 {
        return 0.0;
    }
    let (pa, pb) = (a / n, b / n);
    1.0 - pa * pa - pb * pb
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// `[incident, serious]` training counts reaching this leaf.
        counts: [u32; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

pub(crate) struct TreeConfig {
    pub max_depth: usize,
    /// Features examined per split; fewer only if the rest are constant.
    pub max_features: usize,
}

impl DecisionTree {
    /// Single-leaf tree.
    pub fn leaf(counts: [u32; 2]) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { counts }],
        }
    }

    /// Grows a tree on `rows` (indices into `data`, repeats allowed).
    pub(crate) fn fit(
        data: &Samples,
        rows: &[usize],
        cfg: &TreeConfig,
        rng: &mut SplitMix64,
    ) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        let mut rows = rows.to_vec();
        tree.grow(data, &mut rows, 0, cfg, rng);
        tree
    }

    fn grow(
        &mut self,
        data: &Samples,
        rows: &mut [usize],
        depth: usize,
        cfg: &TreeConfig,
        rng: &mut SplitMix64,
    ) -> usize {
        let counts = count(data, rows);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { counts });
        let pure = counts[0] == 0 || counts[1] == 0;
        if depth >= cfg.max_depth || pure || rows.len() < 2 {
            return id;
        }
        let Some((feature, threshold)) = best_split(data, rows, counts, cfg.max_features, rng)
        else {
            return id;
        };

        // Partition in place: left block first.
        let mut boundary = 0;
        for i in 0..rows.len() {
            if data.row(rows[i])[feature] <= threshold {
                rows.swap(i, boundary);
                boundary += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(boundary);
        let left = self.grow(data, left_rows, depth + 1, cfg, rng);
        let right = self.grow(data, right_rows, depth + 1, cfg, rng);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn leaf_counts(&self, x: &[f64]) -> [u32; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Majority class of the leaf reached by `x`; even leaves vote Incident.
    pub fn predict(&self, x: &[f64]) -> Label {
        let [i, s] = self.leaf_counts(x);
        if s > i {
            Label::SeriousIncident
        } else {
            Label::Incident
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

fn count(data: &Samples, rows: &[usize]) -> [u32; 2] {
    let mut c = [0u32; 2];
    for &r in rows {
        c[data.label(r).index()] += 1;
    }
    c
}

/// Lowest weighted child Gini over candidate thresholds at midpoints between
/// distinct sorted values. Features are visited in a random order until
/// `max_features` non-constant ones have been examined. Ties keep the first
/// candidate found.
fn best_split(
    data: &Samples,
    rows: &[usize],
    counts: [u32; 2],
    max_features: usize,
    rng: &mut SplitMix64,
) -> Option<(usize, f64)> {
    let n_features = data.n_features();
    let mut order: Vec<usize> = (0..n_features).collect();
    let total = [counts[0] as f64, counts[1] as f64];
    let n = rows.len() as f64;

    let mut best: Option<(f64, usize, f64)> = None;
    let mut examined = 0;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    for pos in 0..n_features {
        if examined >= max_features {
            break;
        }
        // Lazy Fisher–Yates: draw the next feature from the unvisited tail.
        let j = pos + rng.below(n_features - pos);
        order.swap(pos, j);
        let f = order[pos];

        column.clear();
        column.extend(
            rows.iter()
                .map(|&r| (data.row(r)[f], data.label(r).index())),
        );
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        if column[0].0 == column[column.len() - 1].0 {
            continue;
        }
        examined += 1;

        let mut left = [0.0f64; 2];
        for k in 0..column.len() - 1 {
            left[column[k].1] += 1.0;
            let (v, next) = (column[k].0, column[k + 1].0);
            if v == next {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nl = left[0] + left[1];
            let score = (nl * gini(left[0], left[1]) + (n - nl) * gini(right[0], right[1])) / n;
            if best.is_none_or(|b| score < b.0) {
                best = Some((score, f, v + (next - v) / 2.0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
