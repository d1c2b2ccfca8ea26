//! Second-order gradient boosting on the logistic loss.
//!
//! Each round fits a regression tree to the per-sample gradient `g = p - y`
//! and hessian `h = p (1 - p)` of the current margins. Splits maximise
//!
//! ```text
//! GL² / (HL + λ) + GR² / (HR + λ) - G² / (H + λ)
//! ```
//!
//! and leaves take the Newton step `-G / (H + λ)`, scaled by `eta`. Trees are
//! grown level by level with an exact scan over every feature, using one
//! global sort per feature.

use serde::{Deserialize, Serialize};

use super::{sigmoid, Hyperparams, ModelError, Samples};

#[derive(Debug, Clone, PartialEq)]
pub struct BoostParams {
    pub rounds: usize,
    pub eta: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl BoostParams {
    pub fn from_hyperparams(hp: &Hyperparams) -> Result<Self, ModelError> {
        Ok(Self {
            rounds: hp.count("rounds", 1, None)?,
            eta: hp.real(
                "eta",
                None,
                |v| v > 0.0 && v <= 1.0,
                "expected 0 < eta <= 1",
            )?,
            max_depth: hp.count("max_depth", 0, None)?,
            lambda: hp.real("lambda", Some(1.0), |v| v >= 0.0, "expected lambda >= 0")?,
            min_child_weight: hp.real(
                "min_child_weight",
                Some(1.0),
                |v| v >= 0.0,
                "expected min_child_weight >= 0",
            )?,
        })
    }

    pub fn to_hyperparams(&self) -> Hyperparams {
        Hyperparams::new()
            .with("rounds", self.rounds as f64)
            .with("eta", self.eta)
            .with("max_depth", self.max_depth as f64)
            .with("lambda", self.lambda)
            .with("min_child_weight", self.min_child_weight)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionNode {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Margin contribution, already scaled by the learning rate.
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegressionNode::Leaf { value } => return *value,
                RegressionNode::Split {
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    /// Prior log-odds of the training labels.
    pub base_margin: f64,
    pub trees: Vec<RegressionTree>,
}

/// Mean logistic loss of margins against 0/1 targets.
pub(crate) fn mean_logistic_loss(margins: &[f64], data: &Samples) -> f64 {
    let total: f64 = margins
        .iter()
        .enumerate()
        .map(|(i, &z)| softplus(z) - data.target(i) * z)
        .sum();
    total / margins.len() as f64
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl BoostedTrees {
    pub fn fit(data: &Samples, p: &BoostParams) -> Self {
        Self::fit_traced(data, p).0
    }

    /// Fits and also returns the mean training loss before the first round and
    /// after each round (`rounds + 1` values).
    pub fn fit_traced(data: &Samples, p: &BoostParams) -> (Self, Vec<f64>) {
        let n = data.len();
        let positives = data.class_counts()[1] as f64;
        let prior = (positives / n as f64).clamp(1e-6, 1.0 - 1e-6);
        let base_margin = (prior / (1.0 - prior)).ln();

        let sorted = presort(data);
        let mut margins = vec![base_margin; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut trace = Vec::with_capacity(p.rounds + 1);
        trace.push(mean_logistic_loss(&margins, data));
        let mut trees = Vec::with_capacity(p.rounds);
        for _ in 0..p.rounds {
            for i in 0..n {
                let prob = sigmoid(margins[i]);
                grad[i] = prob - data.target(i);
                hess[i] = prob * (1.0 - prob);
            }
            let (tree, leaf_of) = grow(data, &sorted, &grad, &hess, p);
            for i in 0..n {
                if let RegressionNode::Leaf { value } = tree.nodes[leaf_of[i]] {
                    margins[i] += value;
                }
            }
            trace.push(mean_logistic_loss(&margins, data));
            trees.push(tree);
        }
        (Self { base_margin, trees }, trace)
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.value(x)).sum::<f64>()
    }
}

/// Per feature, sample indices sorted by value.
fn presort(data: &Samples) -> Vec<Vec<usize>> {
    (0..data.n_features())
        .map(|f| {
            let mut idx: Vec<usize> = (0..data.len()).collect();
            idx.sort_by(|&a, &b| data.row(a)[f].total_cmp(&data.row(b)[f]));
            idx
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Copy, Default)]
struct Scan {
    g: f64,
    h: f64,
    last: f64,
    seen: bool,
}

fn newton_score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Grows one tree; returns it with the leaf index of every training sample.
fn grow(
    data: &Samples,
    sorted: &[Vec<usize>],
    grad: &[f64],
    hess: &[f64],
    p: &BoostParams,
) -> (RegressionTree, Vec<usize>) {
    let n = data.len();
    let mut node_of = vec![0usize; n];
    // (G, H) per node, indexed like `nodes`.
    let mut totals = vec![(grad.iter().sum::<f64>(), hess.iter().sum::<f64>())];
    let mut nodes = vec![RegressionNode::Leaf { value: 0.0 }];
    let mut frontier = vec![0usize];

    for _depth in 0..p.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut active = vec![false; nodes.len()];
        for &id in &frontier {
            active[id] = true;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; nodes.len()];
        for (f, order) in sorted.iter().enumerate() {
            let mut scan = vec![Scan::default(); nodes.len()];
            for &i in order {
                let id = node_of[i];
                if !active[id] {
                    continue;
                }
                let x = data.row(i)[f];
                let s = &mut scan[id];
                if s.seen && x != s.last {
                    let (g, h) = totals[id];
                    let (gl, hl) = (s.g, s.h);
                    let (gr, hr) = (g - gl, h - hl);
                    if hl >= p.min_child_weight && hr >= p.min_child_weight {
                        let gain = newton_score(gl, hl, p.lambda) + newton_score(gr, hr, p.lambda)
                            - newton_score(g, h, p.lambda);
                        if gain > 0.0 && best[id].is_none_or(|b| gain > b.gain) {
                            best[id] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: s.last + (x - s.last) / 2.0,
                            });
                        }
                    }
                }
                s.g += grad[i];
                s.h += hess[i];
                s.last = x;
                s.seen = true;
            }
        }

        let mut next = Vec::new();
        let mut children = vec![None; nodes.len()];
        for &id in &frontier {
            let Some(c) = best[id] else { continue };
            let left = nodes.len();
            nodes.push(RegressionNode::Leaf { value: 0.0 });
            nodes.push(RegressionNode::Leaf { value: 0.0 });
            totals.push((0.0, 0.0));
            totals.push((0.0, 0.0));
            nodes[id] = RegressionNode::Split {
                feature: c.feature,
                threshold: c.threshold,
                left,
                right: left + 1,
            };
            children[id] = Some((c.feature, c.threshold, left));
            next.push(left);
            next.push(left + 1);
        }
        for i in 0..n {
            if let Some((f, t, left)) = children[node_of[i]] {
                let child = if data.row(i)[f] <= t { left } else { left + 1 };
                node_of[i] = child;
                totals[child].0 += grad[i];
                totals[child].1 += hess[i];
            }
        }
        frontier = next;
    }

    for (id, node) in nodes.iter_mut().enumerate() {
        if let RegressionNode::Leaf { value } = node {
            let (g, h) = totals[id];
            *value = -p.eta * g / (h + p.lambda);
        }
    }
    (RegressionTree { nodes }, node_of)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;
    use crate::rng::SplitMix64;

    fn params(rounds: usize, eta: f64, depth: usize) -> BoostParams {
        BoostParams {
            rounds,
            eta,
            max_depth: depth,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }

    fn planted(n: usize, seed: u64) -> Samples {
        let mut rng = SplitMix64::new(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..8).map(|_| rng.below(2) as f64).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|r| Label::from_index(usize::from(r[0] + r[1] + r[2] >= 2.0)))
            .collect();
        Samples::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn depth_zero_rounds_move_toward_prior() {
        let s = planted(100, 1);
        let (m, trace) = BoostedTrees::fit_traced(&s, &params(5, 0.3, 0));
        assert_eq!(m.trees.len(), 5);
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn learns_planted_majority_rule() {
        let s = planted(300, 2);
        let m = BoostedTrees::fit(&s, &params(50, 0.3, 3));
        let correct = (0..s.len())
            .filter(|&i| (sigmoid(m.margin(s.row(i))) > 0.5) == s.label(i).is_positive())
            .count();
        assert_eq!(correct, s.len());
    }

    #[test]
    fn training_loss_never_increases() {
        let s = planted(200, 3);
        for eta in [0.1, 0.3] {
            let (_, trace) = BoostedTrees::fit_traced(&s, &params(60, eta, 4));
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn traced_margins_match_prediction_path() {
        let s = planted(120, 4);
        let (m, trace) = BoostedTrees::fit_traced(&s, &params(10, 0.3, 2));
        let margins: Vec<f64> = (0..s.len()).map(|i| m.margin(s.row(i))).collect();
        let loss = mean_logistic_loss(&margins, &s);
        assert!((loss - trace[10]).abs() < 1e-12);
    }
}
