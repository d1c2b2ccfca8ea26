//! L2-regularised logistic regression, full-batch gradient descent with
//! Armijo backtracking.

use super::boost::softplus;
use super::{sigmoid, Hyperparams, LinearModel, ModelError, Samples};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl LogisticParams {
    pub fn from_hyperparams(hp: &Hyperparams) -> Result<Self, ModelError> {
        Ok(Self {
            l2: hp.real("l2", None, |v| v >= 0.0, "expected l2 >= 0")?,
            max_iter: hp.count("max_iter", 1, Some(5000))?,
            tol: hp.real("tol", Some(1e-6), |v| v > 0.0, "expected tol > 0")?,
        })
    }

    pub fn to_hyperparams(&self) -> Hyperparams {
        Hyperparams::new()
            .with("l2", self.l2)
            .with("max_iter", self.max_iter as f64)
            .with("tol", self.tol)
    }
}

/// Mean negative log-likelihood plus `l2 / 2 · ‖w‖²` and its exact gradient.
///
/// `weights` holds one coefficient per feature followed by the intercept; the
/// intercept is not regularised.
pub fn logistic_loss_and_gradient(weights: &[f64], data: &Samples, l2: f64) -> (f64, Vec<f64>) {
    let d = data.n_features();
    assert_eq!(
        weights.len(),
        d + 1,
        "weights must have n_features + 1 entries"
    );
    let (w, b) = weights.split_at(d);
    let b = b[0];
    let n = data.len() as f64;

    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (i, x) in data.rows().enumerate() {
        let z = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
        let y = data.target(i);
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, xi) in grad[..d].iter_mut().zip(x) {
            *g += r * xi;
        }
        grad[d] += r;
    }
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    let mut penalty = 0.0;
    for (g, wi) in grad[..d].iter_mut().zip(w) {
        *g += l2 * wi;
        penalty += wi * wi;
    }
    (loss + 0.5 * l2 * penalty, grad)
}

pub(crate) fn fit(data: &Samples, p: &LogisticParams) -> LinearModel {
    let d = data.n_features();
    let mut w = vec![0.0; d + 1];
    let (mut loss, mut grad) = logistic_loss_and_gradient(&w, data, p.l2);
    let mut step = 1.0;
    let mut candidate = vec![0.0; d + 1];
    for _ in 0..p.max_iter {
        let gnorm_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm_inf < p.tol {
            break;
        }
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        let accepted = loop {
            for ((c, wi), gi) in candidate.iter_mut().zip(&w).zip(&grad) {
                *c = wi - step * gi;
            }
            let (l, g) = logistic_loss_and_gradient(&candidate, data, p.l2);
            if l <= loss - 0.5 * step * gnorm2 {
                break Some((l, g));
            }
            step *= 0.5;
            if step < 1e-16 {
                break None;
            }
        };
        let Some((l, g)) = accepted else { break };
        w.copy_from_slice(&candidate);
        loss = l;
        grad = g;
        // Let the step grow back so flat regions are not crossed at a crawl.
        step *= 2.0;
    }
    let intercept = w.pop().unwrap_or(0.0);
    LinearModel {
        weights: w,
        intercept,
    }
}
