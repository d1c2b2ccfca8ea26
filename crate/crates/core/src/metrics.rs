//! Confusion matrix, classification metrics and two-sample t-tests.
//!
//! The positive class is `SeriousIncident`. Zero denominators yield 0 for
//! precision, recall, F1 and MCC so metrics stay total on degenerate test
//! splits.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::dataset::Label;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("truth has {truth} labels but predictions have {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no label pairs to evaluate")]
    Empty,
    #[error("each sample needs at least 2 values (got {0} and {1})")]
    TooFewSamples(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same matrix with the positive class swapped.
    pub fn swapped(&self) -> Self {
        Self::new(self.tn, self.fn_, self.tp, self.fp)
    }
}

pub fn confusion(truth: &[Label], pred: &[Label]) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(pred) {
        match (t.is_positive(), p.is_positive()) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    Ok((cm.tp + cm.tn) as f64 / total as f64)
}

fn ratio_or_zero(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(cm: &ConfusionMatrix) -> f64 {
    ratio_or_zero(cm.tp, cm.tp + cm.fp)
}

pub fn recall(cm: &ConfusionMatrix) -> f64 {
    ratio_or_zero(cm.tp, cm.tp + cm.fn_)
}

/// `TP / (TP + 0.5 (FP + FN))`.
pub fn f1(cm: &ConfusionMatrix) -> f64 {
    let den = 2 * cm.tp + cm.fp + cm.fn_;
    ratio_or_zero(2 * cm.tp, den)
}

/// Harmonic mean of precision and recall; agrees with [`f1`].
pub fn f1_harmonic(cm: &ConfusionMatrix) -> f64 {
    let p = precision(cm);
    let r = recall(cm);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
///
/// The radicand is formed in 128-bit integers so large counts do not overflow
/// or lose precision before the square root.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, fp, tn, fn_) = (cm.tp as u128, cm.fp as u128, cm.tn as u128, cm.fn_ as u128);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0) {
        return 0.0;
    }
    let num = (tp * tn) as f64 - (fp * fn_) as f64;
    let radicand = (factors[0] * factors[1]) as f64 * (factors[2] * factors[3]) as f64;
    (num / radicand.sqrt()).clamp(-1.0, 1.0)
}

/// One evaluation of a fitted model on a test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub accuracy: f64,
    pub f1: f64,
    pub mcc: f64,
}

impl MetricSample {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self, MetricsError> {
        Ok(Self {
            accuracy: accuracy(cm)?,
            f1: f1(cm),
            mcc: mcc(cm),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Welch's unequal-variance t-test of `mean(a) - mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::TooFewSamples(a.len(), b.len()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTestResult {
        t,
        p: two_sided_p(t, df),
        df,
    })
}

/// Paired t-test on per-index differences `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            truth: a.len(),
            pred: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(MetricsError::TooFewSamples(a.len(), b.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (md, vd) = mean_var(&d);
    if vd <= 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let n = d.len() as f64;
    let t = md / (vd / n).sqrt();
    let df = n - 1.0;
    Ok(TTestResult {
        t,
        p: two_sided_p(t, df),
        df,
    })
}
