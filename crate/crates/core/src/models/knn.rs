//! Euclidean k-nearest neighbours.

use serde::{Deserialize, Serialize};

use super::{Hyperparams, ModelError, Samples};
use crate::dataset::Label;
use crate::resample::squared_distance;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnParams {
    pub k: usize,
}

impl KnnParams {
    pub fn from_hyperparams(hp: &Hyperparams) -> Result<Self, ModelError> {
        Ok(Self {
            k: hp.count("k", 1, None)?,
        })
    }

    pub fn to_hyperparams(&self) -> Hyperparams {
        Hyperparams::new().with("k", self.k as f64)
    }
}

/// Stores the training set verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl KnnModel {
    pub fn fit(data: &Samples, p: &KnnParams) -> Self {
        Self {
            k: p.k,
            rows: data.rows().map(<[f64]>::to_vec).collect(),
            labels: data.labels().to_vec(),
        }
    }

    /// Indices of the `min(k, n)` nearest stored rows; equal distances are
    /// ordered by lower index.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (squared_distance(x, r), i))
            .collect();
        let k = self.k.min(d.len());
        let by_distance =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k, by_distance);
            d.truncate(k);
        }
        d.sort_by(by_distance);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Fraction of the neighbours labelled SeriousIncident.
    pub fn score(&self, x: &[f64]) -> f64 {
        let nn = self.neighbours(x);
        if nn.is_empty() {
            return 0.0;
        }
        let serious = nn.iter().filter(|&&i| self.labels[i].is_positive()).count();
        serious as f64 / nn.len() as f64
    }
}
