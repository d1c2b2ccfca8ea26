//! Planted-rule dataset generator: a stand-in with a known labelling rule.
//!
//! Features are independent Bernoulli draws, more frequent on twelve
//! "severity" features. The clean label is SeriousIncident when a fixed
//! weighted sum of the severity features exceeds a threshold placed so the
//! classes land at the requested ratio after noise. Noise then flips exactly
//! `round(noise × size)` labels in each clean class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Label, LabeledRecord};
use crate::rng::{derive_seed, SplitMix64};
use crate::schema::{canonical_schema, FeatureVector};

/// Severity features and their rule weights.
pub const SEVERITY_FEATURES: [(&str, f64); 12] = [
    ("runway_overrun", 3.0),
    ("loss_of_control_inflight", 2.6),
    ("collision", 2.3),
    ("engine_fire", 2.1),
    ("incapacitation", 1.9),
    ("minimum_safe_altitude_breached", 1.7),
    ("excursion", 1.5),
    ("loss_of_separation", 1.35),
    ("injuries", 1.2),
    ("engine_failure_or_not_usable", 1.1),
    ("tcas_resolution_advisory", 1.0),
    ("egpws", 0.9),
];

const SEVERITY_RATE: f64 = 0.25;
const BACKGROUND_RATE: f64 = 0.08;

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("n must be at least 1")]
    Empty,
    #[error("imbalance must lie in (0, 1), got {0}")]
    Imbalance(f64),
    #[error("noise must lie in [0, 0.5), got {0}")]
    Noise(f64),
}

/// `score(x) = Σ w_i x[index_i]`; clean label SeriousIncident iff
/// `score > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    pub weights: Vec<(usize, f64)>,
    pub threshold: f64,
}

impl PlantedRule {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().map(|&(i, w)| w * x[i]).sum()
    }

    pub fn label(&self, x: &[f64]) -> Label {
        if self.score(x) > self.threshold {
            Label::SeriousIncident
        } else {
            Label::Incident
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDataset {
    pub dataset: Dataset,
    pub rule: PlantedRule,
    /// Indices of records whose label was flipped by noise.
    pub flipped: Vec<usize>,
}

/// `n` records where `imbalance` is the Incident fraction.
pub fn generate_synthetic_dataset(
    n: usize,
    imbalance: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset, SyntheticError> {
    generate_planted_dataset(n, imbalance, noise, seed).map(|p| p.dataset)
}

/// As [`generate_synthetic_dataset`], also returning the rule and flips.
pub fn generate_planted_dataset(
    n: usize,
    imbalance: f64,
    noise: f64,
    seed: u64,
) -> Result<PlantedDataset, SyntheticError> {
    if n == 0 {
        return Err(SyntheticError::Empty);
    }
    if !(imbalance > 0.0 && imbalance < 1.0) {
        return Err(SyntheticError::Imbalance(imbalance));
    }
    if !(0.0..0.5).contains(&noise) {
        return Err(SyntheticError::Noise(noise));
    }
    let schema = canonical_schema();
    let weights: Vec<(usize, f64)> = SEVERITY_FEATURES
        .iter()
        .map(|&(id, w)| (schema.index_of(id).expect("severity feature in schema"), w))
        .collect();
    let mut severe = vec![false; schema.feature_count()];
    for &(i, _) in &weights {
        severe[i] = true;
    }

    let mut rng = SplitMix64::new(derive_seed(seed, 0));
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            severe
                .iter()
                .map(|&s| {
                    let rate = if s { SEVERITY_RATE } else { BACKGROUND_RATE };
                    if rng.next_f64() < rate {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    // Clean serious fraction q such that q(1 - noise) + (1 - q) noise = 1 - imbalance.
    let q = ((1.0 - imbalance - noise) / (1.0 - 2.0 * noise)).clamp(0.0, 1.0);
    let target = (q * n as f64).round() as usize;
    let mut rule = PlantedRule {
        weights,
        threshold: 0.0,
    };
    let mut scores: Vec<f64> = rows.iter().map(|r| rule.score(r)).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    rule.threshold = threshold_for(&scores, target);

    let clean: Vec<Label> = rows.iter().map(|r| rule.label(r)).collect();
    let mut labels = clean.clone();
    let mut flipped = Vec::new();
    let mut flip_rng = SplitMix64::new(derive_seed(seed, 1));
    for class in Label::ALL {
        let members: Vec<usize> = (0..n).filter(|&i| clean[i] == class).collect();
        let k = (noise * members.len() as f64).round() as usize;
        for j in flip_rng.sample_indices(members.len(), k) {
            let i = members[j];
            labels[i] = class.other();
            flipped.push(i);
        }
    }
    flipped.sort_unstable();

    let records = rows
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (row, label))| LabeledRecord {
            record_id: format!("syn-{i:04}"),
            features: FeatureVector::new(row).expect("0/1 vector"),
            label,
        })
        .collect();
    Ok(PlantedDataset {
        dataset: Dataset::new(schema.version.clone(), records),
        rule,
        flipped,
    })
}

/// Threshold between distinct descending `scores` so that the number of scores
/// above it is as close as possible to `target` (fewer on ties).
fn threshold_for(scores: &[f64], target: usize) -> f64 {
    let n = scores.len();
    // Candidate cut positions c: scores[..c] above, scores[c..] at or below.
    let mut best: Option<(usize, usize)> = None;
    for c in 0..=n {
        let valid = c == 0 || c == n || scores[c - 1] != scores[c];
        if !valid {
            continue;
        }
        let dist = c.abs_diff(target);
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, c));
        }
    }
    let c = best.map_or(0, |(_, c)| c);
    if c == 0 {
        scores[0] + 1.0
    } else if c == n {
        scores[n - 1] - 1.0
    } else {
        scores[c] + (scores[c - 1] - scores[c]) / 2.0
    }
}
