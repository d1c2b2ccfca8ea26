//! Linear SVM trained with Pegasos (primal stochastic sub-gradient).
//!
//! The bias is learned as the weight of a constant extra feature and is
//! regularised with the rest. The returned model is the average of the
//! iterates from the second half of training.

use super::{Hyperparams, LinearModel, ModelError, Samples};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl SvmParams {
    pub fn from_hyperparams(hp: &Hyperparams) -> Result<Self, ModelError> {
        Ok(Self {
            lambda: hp.real("lambda", None, |v| v > 0.0, "expected lambda > 0")?,
            epochs: hp.count("epochs", 1, Some(200))?,
        })
    }

    pub fn to_hyperparams(&self) -> Hyperparams {
        Hyperparams::new()
            .with("lambda", self.lambda)
            .with("epochs", self.epochs as f64)
    }
}

pub(crate) fn fit(data: &Samples, p: &SvmParams, seed: u64) -> LinearModel {
    let n = data.len();
    let d = data.n_features();
    let lambda = p.lambda;
    let radius = 1.0 / lambda.sqrt();
    let total = p.epochs * n;
    let average_from = total / 2;

    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    // Weights with the bias in the last slot.
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut averaged = 0usize;
    let mut t = 0usize;
    for _ in 0..p.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = data.row(i);
            let y = if data.label(i).is_positive() {
                1.0
            } else {
                -1.0
            };
            let margin = y * (dot(&w[..d], x) + w[d]);
            let shrink = 1.0 - eta * lambda;
            for wj in &mut w {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w[..d].iter_mut().zip(x) {
                    *wj += eta * y * xj;
                }
                w[d] += eta * y;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                for wj in &mut w {
                    *wj *= s;
                }
            }
            if t > average_from {
                for (a, wj) in avg.iter_mut().zip(&w) {
                    *a += wj;
                }
                averaged += 1;
            }
        }
    }
    if averaged > 0 {
        for a in &mut avg {
            *a /= averaged as f64;
        }
    }
    let intercept = avg.pop().unwrap_or(0.0);
    LinearModel {
        weights: avg,
        intercept,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
