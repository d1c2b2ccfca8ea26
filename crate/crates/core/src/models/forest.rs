//! Random forest of CART trees.

use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeConfig};
use super::{Hyperparams, ModelError, Samples};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_features: usize,
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn from_hyperparams(hp: &Hyperparams, n_features: usize) -> Result<Self, ModelError> {
        let default_features = (n_features as f64).sqrt().ceil() as usize;
        let max_features = hp.count("max_features", 1, Some(default_features.max(1)))?;
        let bootstrap = hp.real(
            "bootstrap",
            Some(1.0),
            |v| v == 0.0 || v == 1.0,
            "expected 0 or 1",
        )?;
        Ok(Self {
            n_trees: hp.count("n_trees", 1, None)?,
            max_depth: hp.count("max_depth", 0, None)?,
            max_features: max_features.min(n_features.max(1)),
            bootstrap: bootstrap == 1.0,
        })
    }

    pub fn to_hyperparams(&self) -> Hyperparams {
        Hyperparams::new()
            .with("n_trees", self.n_trees as f64)
            .with("max_depth", self.max_depth as f64)
            .with("max_features", self.max_features as f64)
            .with("bootstrap", if self.bootstrap { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn from_trees(trees: Vec<DecisionTree>) -> Self {
        Self { trees }
    }

    /// Tree `t` draws its bootstrap sample and split features from its own
    /// stream `derive_seed(seed, t)`.
    pub fn fit(data: &Samples, p: &ForestParams, seed: u64) -> Self {
        let n = data.len();
        let cfg = TreeConfig {
            max_depth: p.max_depth,
            max_features: p.max_features,
        };
        let trees = (0..p.n_trees)
            .map(|t| {
                let mut rng = SplitMix64::new(derive_seed(seed, t as u64));
                let rows: Vec<usize> = if p.bootstrap {
                    (0..n).map(|_| rng.below(n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(data, &rows, &cfg, &mut rng)
            })
            .collect();
        Self { trees }
    }

    /// Fraction of trees voting SeriousIncident.
    pub fn score(&self, x: &[f64]) -> f64 {
        let votes = self
            .trees
            .iter()
            .filter(|t| t.predict(x).is_positive())
            .count();
        votes as f64 / self.trees.len() as f64
    }
}
