//! SMOTE over-sampling of the minority class.
//!
//! Only ever applied to training data. Each synthetic sample is
//! `x + g * (n - x)` for a minority record `x`, one of its `k` nearest minority
//! neighbours `n` (Euclidean), and a single gap `g ~ U[0, 1)` shared by all
//! coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{class_counts, Dataset, Label, LabeledRecord};
use crate::rng::SplitMix64;
use crate::schema::FeatureVector;

pub const SYNTHETIC_PREFIX: &str = "synthetic:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} needs at least {} minority records, found {minority}", k + 1)]
    TooFewMinority { k: usize, minority: usize },
    #[error("SMOTE needs both classes present")]
    SingleClass,
}

/// Indices into `candidates` of the `k` points nearest to `x`, nearest first.
///
/// `exclude` removes one candidate (the query itself when `x` is a member).
/// Distance ties go to the lower index.
pub fn k_nearest_minority(
    x: &[f64],
    candidates: &[&[f64]],
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<usize>, ResampleError> {
    if k == 0 {
        return Err(ResampleError::ZeroK);
    }
    if candidates.len() < k + 1 {
        return Err(ResampleError::TooFewMinority {
            k,
            minority: candidates.len(),
        });
    }
    let mut dist: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, c)| (squared_distance(x, c), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(dist.into_iter().take(k).map(|(_, i)| i).collect())
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Balances `train` to parity by appending synthetic minority records.
///
/// Already-balanced input is returned unchanged. Parents are taken by cycling
/// through the minority records in a seeded shuffled order.
pub fn smote(train: &Dataset, cfg: &SmoteConfig) -> Result<Dataset, ResampleError> {
    let (n_incident, n_serious) = class_counts(train);
    if n_incident == n_serious {
        return Ok(train.clone());
    }
    if n_incident == 0 || n_serious == 0 {
        return Err(ResampleError::SingleClass);
    }
    let (minority_label, deficit) = if n_serious < n_incident {
        (Label::SeriousIncident, n_incident - n_serious)
    } else {
        (Label::Incident, n_serious - n_incident)
    };
    let minority: Vec<&LabeledRecord> = train
        .records
        .iter()
        .filter(|r| r.label == minority_label)
        .collect();
    if cfg.k == 0 {
        return Err(ResampleError::ZeroK);
    }
    if minority.len() <= cfg.k {
        return Err(ResampleError::TooFewMinority {
            k: cfg.k,
            minority: minority.len(),
        });
    }

    let points: Vec<&[f64]> = minority.iter().map(|r| r.features.as_slice()).collect();
    let neighbours: Vec<Vec<usize>> = (0..points.len())
        .map(|i| k_nearest_minority(points[i], &points, cfg.k, Some(i)))
        .collect::<Result<_, _>>()?;

    let mut rng = SplitMix64::new(cfg.seed);
    let mut order: Vec<usize> = (0..points.len()).collect();
    rng.shuffle(&mut order);

    let mut out = train.clone();
    out.records.reserve(deficit);
    for s in 0..deficit {
        let parent = order[s % order.len()];
        let nn = neighbours[parent][rng.below(cfg.k)];
        let gap = rng.next_f64();
        let values: Vec<f64> = points[parent]
            .iter()
            .zip(points[nn])
            .map(|(x, n)| x + gap * (n - x))
            .collect();
        out.records.push(LabeledRecord {
            record_id: format!("{SYNTHETIC_PREFIX}{s}"),
            // Convex combination of two valid vectors stays in [0, 1].
            features: FeatureVector::new(values).expect("interpolated vector in range"),
            label: minority_label,
        });
    }
    Ok(out)
}
