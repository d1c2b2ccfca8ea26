//! The five classifier families behind one fit / predict contract.
//!
//! | family | model                                             | grid                                                   |
//! |--------|---------------------------------------------------|--------------------------------------------------------|
//! | `rfc`  | CART forest, Gini, bootstrap, ⌈√d⌉ features/split | `n_trees` {50,100,200} × `max_depth` {4,8,16}          |
//! | `xgb`  | Newton-boosted trees on logistic loss             | `rounds` {50,100} × `eta` {0.1,0.3} × `max_depth` {2,3,4} × `lambda` {1} |
//! | `logr` | L2 logistic regression, backtracking GD           | `l2` {0.001,0.01,0.1,1}                                |
//! | `svm`  | linear SVM, averaged Pegasos                      | `lambda` {1e-4,1e-3,1e-2}                              |
//! | `knn`  | Euclidean k-nearest neighbours                    | `k` {1,3,5,7,9}                                        |
//!
//! Every model exposes a score in `[0, 1]`; the predicted label is
//! `SeriousIncident` iff the score is strictly above 0.5. An exact 0.5 (an even
//! forest vote split, a tied neighbour vote, a zero margin) resolves to
//! `Incident`, the majority class of the source data.

mod boost;
mod forest;
mod knn;
mod logistic;
mod svm;
mod tree;
mod tuning;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Label};

pub use boost::{BoostParams, BoostedTrees, RegressionNode, RegressionTree};
pub use forest::{ForestParams, RandomForest};
pub use knn::{KnnModel, KnnParams};
pub use logistic::{logistic_loss_and_gradient, LogisticParams};
pub use svm::SvmParams;
pub use tree::{gini_impurity, DecisionTree, TreeNode};
pub use tuning::{cross_validate, stratified_folds, tune, CvScore, CV_FOLDS};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown model family {0:?}")]
    UnknownFamily(String),
    #[error("hyperparameter {0:?} is not used by {1}")]
    UnknownHyperparam(String, Family),
    #[error("hyperparameter {key:?} = {value}: {reason}")]
    InvalidHyperparam {
        key: String,
        value: f64,
        reason: &'static str,
    },
    #[error("hyperparameter {0:?} is required")]
    MissingHyperparam(String),
    #[error("training data is empty")]
    Empty,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("expected {expected} features, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("model schema version {model:?} does not match {schema:?}")]
    SchemaMismatch { model: String, schema: String },
    #[error("class counts must not both be zero")]
    EmptyCounts,
    #[error("cross-validation needs at least {needed} records per class, found {found}")]
    TooFewForFolds { needed: usize, found: usize },
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("model document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Rfc,
    Xgb,
    Logr,
    Svm,
    Knn,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Rfc,
        Family::Xgb,
        Family::Logr,
        Family::Svm,
        Family::Knn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Rfc => "rfc",
            Family::Xgb => "xgb",
            Family::Logr => "logr",
            Family::Svm => "svm",
            Family::Knn => "knn",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Family::Rfc => "RFC",
            Family::Xgb => "XGB",
            Family::Logr => "Log R",
            Family::Svm => "SVM",
            Family::Knn => "KNN",
        }
    }

    pub fn default_grid(self) -> HyperparamGrid {
        let axes: Vec<(&str, Vec<f64>)> = match self {
            Family::Rfc => vec![
                ("n_trees", vec![50.0, 100.0, 200.0]),
                ("max_depth", vec![4.0, 8.0, 16.0]),
            ],
            Family::Xgb => vec![
                ("rounds", vec![50.0, 100.0]),
                ("eta", vec![0.1, 0.3]),
                ("max_depth", vec![2.0, 3.0, 4.0]),
                ("lambda", vec![1.0]),
            ],
            Family::Logr => vec![("l2", vec![0.001, 0.01, 0.1, 1.0])],
            Family::Svm => vec![("lambda", vec![1e-4, 1e-3, 1e-2])],
            Family::Knn => vec![("k", vec![1.0, 3.0, 5.0, 7.0, 9.0])],
        };
        HyperparamGrid::new(axes.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    fn allowed_keys(self) -> &'static [&'static str] {
        match self {
            Family::Rfc => &["n_trees", "max_depth", "max_features", "bootstrap"],
            Family::Xgb => &["rounds", "eta", "max_depth", "lambda", "min_child_weight"],
            Family::Logr => &["l2", "max_iter", "tol"],
            Family::Svm => &["lambda", "epochs"],
            Family::Knn => &["k"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownFamily(s.to_string()))
    }
}

/// Named numeric hyperparameters, ordered by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperparams(BTreeMap<String, f64>);

impl Hyperparams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_keys(&self, family: Family) -> Result<(), ModelError> {
        let allowed = family.allowed_keys();
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ModelError::UnknownHyperparam(k.clone(), family)),
            None => Ok(()),
        }
    }

    fn required(&self, key: &str) -> Result<f64, ModelError> {
        self.get(key)
            .ok_or_else(|| ModelError::MissingHyperparam(key.to_string()))
    }

    fn count(&self, key: &str, min: usize, default: Option<usize>) -> Result<usize, ModelError> {
        let value = match (self.get(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) => return Ok(d),
            (None, None) => return Err(ModelError::MissingHyperparam(key.to_string())),
        };
        if !(value.is_finite() && value.fract() == 0.0 && value >= min as f64) {
            return Err(ModelError::InvalidHyperparam {
                key: key.to_string(),
                value,
                reason: if min == 0 {
                    "expected a non-negative integer"
                } else {
                    "expected a positive integer"
                },
            });
        }
        Ok(value as usize)
    }

    fn real(
        &self,
        key: &str,
        default: Option<f64>,
        valid: impl Fn(f64) -> bool,
        reason: &'static str,
    ) -> Result<f64, ModelError> {
        let value = match (self.get(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) => d,
            (None, None) => self.required(key)?,
        };
        if !(value.is_finite() && valid(value)) {
            return Err(ModelError::InvalidHyperparam {
                key: key.to_string(),
                value,
                reason,
            });
        }
        Ok(value)
    }
}

/// Cartesian grid of hyperparameter values. Points are enumerated with the
/// first axis varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamGrid {
    pub axes: Vec<(String, Vec<f64>)>,
}

impl HyperparamGrid {
    pub fn new(axes: Vec<(String, Vec<f64>)>) -> Self {
        Self { axes }
    }

    pub fn single(hp: &Hyperparams) -> Self {
        Self::new(hp.iter().map(|(k, v)| (k.to_string(), vec![v])).collect())
    }

    pub fn points(&self) -> Vec<Hyperparams> {
        let mut points = vec![Hyperparams::new()];
        for (key, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| values.iter().map(move |&v| p.clone().with(key, v)))
                .collect();
        }
        if self.axes.iter().any(|(_, v)| v.is_empty()) {
            points.clear();
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub grid: HyperparamGrid,
}

impl ModelSpec {
    pub fn new(family: Family, grid: HyperparamGrid) -> Self {
        Self { family, grid }
    }

    pub fn default_for(family: Family) -> Self {
        Self::new(family, family.default_grid())
    }
}

/// Row-major feature matrix with labels; the models' training input.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    n_features: usize,
    data: Vec<f64>,
    labels: Vec<Label>,
}

impl Samples {
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self, ModelError> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(ModelError::Dimension {
                expected: n_features,
                found: bad.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(ModelError::Dimension {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        Ok(Self {
            n_features,
            data: rows.concat(),
            labels,
        })
    }

    pub fn from_dataset(d: &Dataset) -> Self {
        Self {
            n_features: crate::schema::FEATURE_COUNT,
            data: d
                .records
                .iter()
                .flat_map(|r| r.features.iter().copied())
                .collect(),
            labels: d.labels(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data
            .chunks_exact(self.n_features.max(1))
            .take(self.len())
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    /// `1.0` for SeriousIncident, `0.0` for Incident.
    pub fn target(&self, i: usize) -> f64 {
        self.labels[i].index() as f64
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let serious = self.labels.iter().filter(|l| l.is_positive()).count();
        [self.len() - serious, serious]
    }

    pub fn majority(&self) -> Label {
        let [i, s] = self.class_counts();
        if s > i {
            Label::SeriousIncident
        } else {
            Label::Incident
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Samples {
        Samples {
            n_features: self.n_features,
            data: indices
                .iter()
                .flat_map(|&i| self.row(i).iter().copied())
                .collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Label for a model score: `SeriousIncident` iff `score > 0.5`.
pub fn label_for_score(score: f64) -> Label {
    if score > 0.5 {
        Label::SeriousIncident
    } else {
        Label::Incident
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnedParams {
    Forest(RandomForest),
    Boosted(BoostedTrees),
    Logistic(LinearModel),
    Svm(LinearModel),
    Knn(KnnModel),
}

/// Linear decision function `w · x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }
}

/// A fitted classifier plus the metadata needed to reproduce and serve it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub family: Family,
    pub schema_version: String,
    pub hyperparams: Hyperparams,
    pub n_features: usize,
    pub trained_on: usize,
    pub seed: u64,
    pub params: LearnedParams,
}

/// Fits one family with fixed hyperparameters. Deterministic in all inputs.
pub fn fit(
    family: Family,
    hp: &Hyperparams,
    train: &Samples,
    seed: u64,
    schema_version: &str,
) -> Result<TrainedModel, ModelError> {
    hp.check_keys(family)?;
    if train.is_empty() {
        return Err(ModelError::Empty);
    }
    let [n_incident, n_serious] = train.class_counts();
    if family != Family::Knn && (n_incident == 0 || n_serious == 0) {
        return Err(ModelError::SingleClass);
    }
    let (resolved, params) = match family {
        Family::Rfc => {
            let p = ForestParams::from_hyperparams(hp, train.n_features())?;
            (
                p.to_hyperparams(),
                LearnedParams::Forest(RandomForest::fit(train, &p, seed)),
            )
        }
        Family::Xgb => {
            let p = BoostParams::from_hyperparams(hp)?;
            (
                p.to_hyperparams(),
                LearnedParams::Boosted(BoostedTrees::fit(train, &p)),
            )
        }
        Family::Logr => {
            let p = LogisticParams::from_hyperparams(hp)?;
            (
                p.to_hyperparams(),
                LearnedParams::Logistic(logistic::fit(train, &p)),
            )
        }
        Family::Svm => {
            let p = SvmParams::from_hyperparams(hp)?;
            (
                p.to_hyperparams(),
                LearnedParams::Svm(svm::fit(train, &p, seed)),
            )
        }
        Family::Knn => {
            let p = KnnParams::from_hyperparams(hp)?;
            (
                p.to_hyperparams(),
                LearnedParams::Knn(KnnModel::fit(train, &p)),
            )
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        family,
        schema_version: schema_version.to_string(),
        hyperparams: resolved,
        n_features: train.n_features(),
        trained_on: train.len(),
        seed,
        params,
    })
}

/// [`fit`] on a dataset's records.
pub fn fit_dataset(
    family: Family,
    hp: &Hyperparams,
    train: &Dataset,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    fit(
        family,
        hp,
        &Samples::from_dataset(train),
        seed,
        &train.schema_version,
    )
}

impl TrainedModel {
    fn check_dim(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.n_features {
            return Err(ModelError::Dimension {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Score in `[0, 1]`: forest vote share, sigmoid of the boosted, logistic or
    /// SVM margin, or the neighbour vote share.
    pub fn predict_score(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        Ok(self.score_unchecked(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label, ModelError> {
        self.predict_score(x).map(label_for_score)
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        match &self.params {
            LearnedParams::Forest(f) => f.score(x),
            LearnedParams::Boosted(b) => sigmoid(b.margin(x)),
            LearnedParams::Logistic(m) | LearnedParams::Svm(m) => sigmoid(m.margin(x)),
            LearnedParams::Knn(k) => k.score(x),
        }
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        label_for_score(self.score_unchecked(x))
    }

    pub fn check_schema(&self, schema_version: &str) -> Result<(), ModelError> {
        if self.schema_version != schema_version {
            return Err(ModelError::SchemaMismatch {
                model: self.schema_version.clone(),
                schema: schema_version.to_string(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: TrainedModel =
            serde_json::from_str(text).map_err(|e| ModelError::Document(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Document(format!(
                "unsupported format_version {}",
                m.format_version
            )));
        }
        Ok(m)
    }
}
