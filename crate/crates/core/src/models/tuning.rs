//! Grid search with stratified k-fold cross-validation.

use rayon::prelude::*;

use super::{fit, Family, Hyperparams, ModelError, ModelSpec, Samples};
use crate::dataset::Label;
use crate::metrics::{accuracy, confusion, mcc};
use crate::rng::{derive_seed, SplitMix64};

pub const CV_FOLDS: usize = 3;

/// Assigns every sample a fold in `0..n_folds`. Each class is shuffled and
/// dealt round-robin, so per-class fold sizes differ by at most one.
pub fn stratified_folds(
    labels: &[Label],
    n_folds: usize,
    seed: u64,
) -> Result<Vec<usize>, ModelError> {
    let mut rng = SplitMix64::new(seed);
    let mut fold = vec![0usize; labels.len()];
    for class in Label::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < n_folds {
            return Err(ModelError::TooFewForFolds {
                needed: n_folds,
                found: members.len(),
            });
        }
        rng.shuffle(&mut members);
        for (j, &i) in members.iter().enumerate() {
            fold[i] = j % n_folds;
        }
    }
    Ok(fold)
}

/// Mean validation accuracy and MCC over the folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvScore {
    pub accuracy: f64,
    pub mcc: f64,
}

/// Fits on all folds but one and scores the held-out fold, for each fold.
/// Fold `f` is fitted with seed `derive_seed(seed, f)`.
pub fn cross_validate(
    family: Family,
    hp: &Hyperparams,
    data: &Samples,
    folds: &[usize],
    seed: u64,
    schema_version: &str,
) -> Result<CvScore, ModelError> {
    let n_folds = folds.iter().max().map_or(0, |m| m + 1);
    let mut acc = 0.0;
    let mut m = 0.0;
    for f in 0..n_folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| folds[i] == f);
        let model = fit(
            family,
            hp,
            &data.subset(&train),
            derive_seed(seed, f as u64),
            schema_version,
        )?;
        let truth: Vec<Label> = test.iter().map(|&i| data.label(i)).collect();
        let pred: Vec<Label> = test
            .iter()
            .map(|&i| model.predict_unchecked(data.row(i)))
            .collect();
        let cm = confusion(&truth, &pred).map_err(|e| ModelError::Document(e.to_string()))?;
        acc += accuracy(&cm).map_err(|e| ModelError::Document(e.to_string()))?;
        m += mcc(&cm);
    }
    Ok(CvScore {
        accuracy: acc / n_folds as f64,
        mcc: m / n_folds as f64,
    })
}

/// Picks the grid point with the highest mean CV accuracy; ties go to the
/// higher mean MCC, then to the earlier grid point.
pub fn tune(spec: &ModelSpec, data: &Samples, seed: u64) -> Result<Hyperparams, ModelError> {
    let points = spec.grid.points();
    if points.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    if points.len() == 1 {
        // Still validate the point against the family.
        fit_check(spec.family, &points[0], data)?;
        return Ok(points.into_iter().next().unwrap_or_default());
    }
    let folds = stratified_folds(data.labels(), CV_FOLDS, seed)?;
    let scores: Vec<CvScore> = points
        .par_iter()
        .map(|hp| cross_validate(spec.family, hp, data, &folds, seed, ""))
        .collect::<Result<_, _>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let b = scores[best];
        if s.accuracy > b.accuracy || (s.accuracy == b.accuracy && s.mcc > b.mcc) {
            best = i;
        }
    }
    Ok(points.into_iter().nth(best).unwrap_or_default())
}

fn fit_check(family: Family, hp: &Hyperparams, data: &Samples) -> Result<(), ModelError> {
    hp.check_keys(family)?;
    if data.is_empty() {
        return Err(ModelError::Empty);
    }
    Ok(())
}
