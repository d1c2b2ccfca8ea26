//! Repeated-split benchmark: for every run, one stratified split shared by all
//! families and variants, optional SMOTE on the training side, per-run grid
//! search, and evaluation on the untouched test side.

mod report;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{class_counts, load_dataset, random_split, stratified_split, Dataset, Label};
use crate::metrics::{confusion, paired_t_test, welch_t_test, MetricSample, MetricsError};
use crate::models::{fit, tune, Family, HyperparamGrid, Hyperparams, ModelSpec, Samples};
use crate::resample::{smote, SmoteConfig};
use crate::rng::derive_seed;
use crate::schema::canonical_schema;

pub use report::{emit_report, ReportFormat};
pub use synthetic::{
    generate_planted_dataset, generate_synthetic_dataset, PlantedDataset, PlantedRule,
    SyntheticError, SEVERITY_FEATURES,
};

/// Stream ids for [`derive_seed`] within a run.
const SMOTE_STREAM: u64 = 1;
const FAMILY_STREAM: u64 = 16;

/// A training-set treatment. `smote_k = None` trains on the split as is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VariantInput")]
pub struct VariantSpec {
    pub name: String,
    pub smote_k: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VariantInput {
    Short(String),
    Full {
        name: String,
        smote_k: Option<usize>,
    },
}

impl TryFrom<VariantInput> for VariantSpec {
    type Error = String;

    fn try_from(v: VariantInput) -> Result<Self, String> {
        match v {
            VariantInput::Short(s) => VariantSpec::parse(&s),
            VariantInput::Full { name, smote_k } => {
                if smote_k == Some(0) {
                    return Err(format!("variant {name:?}: smote_k must be at least 1"));
                }
                Ok(VariantSpec { name, smote_k })
            }
        }
    }
}

impl VariantSpec {
    pub fn original() -> Self {
        Self {
            name: "original".into(),
            smote_k: None,
        }
    }

    pub fn smote(k: usize) -> Self {
        Self {
            name: format!("smote_k{k}"),
            smote_k: Some(k),
        }
    }

    /// `original` or `smote_k<k>`.
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "original" {
            return Ok(Self::original());
        }
        match s
            .strip_prefix("smote_k")
            .and_then(|k| k.parse::<usize>().ok())
        {
            Some(k) if k >= 1 => Ok(Self::smote(k)),
            _ => Err(format!(
                "unknown variant {s:?}; expected original or smote_k<k>"
            )),
        }
    }

    /// Row label suffix used in the table report.
    pub fn display_name(&self) -> String {
        match self.smote_k {
            None if self.name == "original" => "(orig)".into(),
            None => format!("({})", self.name),
            Some(k) if self.name == format!("smote_k{k}") => format!("SMOTE k={k}"),
            Some(k) => format!("{} (SMOTE k={k})", self.name),
        }
    }
}

fn default_runs() -> usize {
    100
}
fn default_ratio() -> f64 {
    0.8
}
fn default_alpha() -> f64 {
    0.005
}
fn default_true() -> bool {
    true
}
fn default_families() -> Vec<Family> {
    Family::ALL.to_vec()
}
fn default_variants() -> Vec<VariantSpec> {
    vec![
        VariantSpec::original(),
        VariantSpec::smote(1),
        VariantSpec::smote(5),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    /// Training fraction of each split.
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    /// The first variant is the reference for significance tests.
    #[serde(default = "default_variants")]
    pub variants: Vec<VariantSpec>,
    /// CSV dataset path. Relative paths in a config file are resolved against
    /// the file's directory by [`load_config`].
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_alpha")]
    pub significance_alpha: f64,
    /// Stratified (default) or plain random splits.
    #[serde(default = "default_true")]
    pub stratified: bool,
    /// Paired instead of Welch t-tests.
    #[serde(default)]
    pub paired: bool,
    /// Per-family grid overrides; families not listed use their default grid.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub grids: BTreeMap<Family, HyperparamGrid>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_runs: default_runs(),
            ratio: default_ratio(),
            base_seed: 0,
            families: default_families(),
            variants: default_variants(),
            dataset: None,
            significance_alpha: default_alpha(),
            stratified: true,
            paired: false,
            grids: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.n_runs < 2 {
            return bad(format!("n_runs must be at least 2, got {}", self.n_runs));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad(format!("ratio must lie in (0, 1), got {}", self.ratio));
        }
        if !(self.significance_alpha > 0.0 && self.significance_alpha < 1.0) {
            return bad(format!(
                "significance_alpha must lie in (0, 1), got {}",
                self.significance_alpha
            ));
        }
        if self.families.is_empty() {
            return bad("no families selected".into());
        }
        if self.variants.is_empty() {
            return bad("no variants selected".into());
        }
        for (i, f) in self.families.iter().enumerate() {
            if self.families[..i].contains(f) {
                return bad(format!("family {f} listed twice"));
            }
        }
        for (i, v) in self.variants.iter().enumerate() {
            if self.variants[..i].iter().any(|w| w.name == v.name) {
                return bad(format!("variant {:?} listed twice", v.name));
            }
        }
        Ok(())
    }

    fn spec(&self, family: Family) -> ModelSpec {
        match self.grids.get(&family) {
            Some(g) => ModelSpec::new(family, g.clone()),
            None => ModelSpec::default_for(family),
        }
    }
}

/// Reads a JSON config, resolving a relative `dataset` against the file's
/// directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExperimentError::Io(path.display().to_string(), e.to_string()))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| ExperimentError::Config(e.to_string()))?;
    if let Some(d) = &cfg.dataset {
        if d.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            cfg.dataset = Some(base.join(d));
        }
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Split,
    Smote,
    Tune,
    Fit,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Split => "split",
            Stage::Smote => "smote",
            Stage::Tune => "tune",
            Stage::Fit => "fit",
            Stage::Evaluate => "evaluate",
        })
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("run {run} ({family}, {variant}) failed at {stage}: {message}")]
    Run {
        run: usize,
        family: String,
        variant: String,
        stage: Stage,
        message: String,
    },
    #[error("test split changed between variants in run {0}")]
    TestSplitChanged(usize),
    #[error("significance test: {0}")]
    Stats(#[from] MetricsError),
}

/// Significance of `reference - variant` for one metric. `t` and `df` are
/// `None` when both sample sets have zero variance but different means; the
/// difference is then treated as certain (`p = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub t: Option<f64>,
    pub p: f64,
    pub df: Option<f64>,
    /// Sign of the mean difference, for rendering an undefined `t`.
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub accuracy: Comparison,
    pub f1: Comparison,
    pub mcc: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub family: Family,
    pub variant: VariantSpec,
    /// One per run, in run order.
    pub samples: Vec<MetricSample>,
    pub average: MetricSample,
    /// Tuned hyperparameters per run.
    pub hyperparams: Vec<Hyperparams>,
    /// Against the same family's reference variant; absent on reference rows.
    pub comparison: Option<MetricComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub schema_version: String,
    pub records: usize,
    pub incident: usize,
    pub serious_incident: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    /// Split seed of each run (`base_seed + run`).
    pub run_seeds: Vec<u64>,
    /// Ordered by family, then variant, as listed in the config.
    pub results: Vec<CellResult>,
}

impl BenchmarkReport {
    pub fn cell(&self, family: Family, variant: &str) -> Option<&CellResult> {
        self.results
            .iter()
            .find(|c| c.family == family && c.variant.name == variant)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

/// Loads `cfg.dataset` against the canonical schema and runs the benchmark.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkReport, ExperimentError> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("no dataset path given".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExperimentError::Io(path.display().to_string(), e.to_string()))?;
    let schema = canonical_schema();
    let data = load_dataset(&text, &schema).map_err(|e| ExperimentError::Dataset(e.to_string()))?;
    run_benchmark_on(&data, cfg)
}

struct RunOutput {
    /// `[family][variant]`.
    cells: Vec<Vec<(MetricSample, Hyperparams)>>,
}

/// Runs the benchmark on an in-memory dataset; `cfg.dataset` is only echoed.
pub fn run_benchmark_on(
    data: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<BenchmarkReport, ExperimentError> {
    cfg.validate()?;
    let runs: Vec<RunOutput> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| run_once(data, cfg, r))
        .collect::<Result<_, _>>()?;

    let mut results = Vec::new();
    for (fi, &family) in cfg.families.iter().enumerate() {
        let mut reference: Option<Vec<MetricSample>> = None;
        for (vi, variant) in cfg.variants.iter().enumerate() {
            let samples: Vec<MetricSample> = runs.iter().map(|o| o.cells[fi][vi].0).collect();
            let hyperparams = runs.iter().map(|o| o.cells[fi][vi].1.clone()).collect();
            let comparison = match &reference {
                None => None,
                Some(refs) => Some(compare_samples(refs, &samples, cfg.paired)?),
            };
            if reference.is_none() {
                reference = Some(samples.clone());
            }
            results.push(CellResult {
                family,
                variant: variant.clone(),
                average: average(&samples),
                samples,
                hyperparams,
                comparison,
            });
        }
    }
    let (incident, serious) = class_counts(data);
    Ok(BenchmarkReport {
        config: cfg.clone(),
        dataset: DatasetSummary {
            schema_version: data.schema_version.clone(),
            records: data.len(),
            incident,
            serious_incident: serious,
        },
        run_seeds: (0..cfg.n_runs).map(|r| run_seed(cfg, r)).collect(),
        results,
    })
}

fn run_seed(cfg: &ExperimentConfig, run: usize) -> u64 {
    cfg.base_seed.wrapping_add(run as u64)
}

fn run_once(
    data: &Dataset,
    cfg: &ExperimentConfig,
    run: usize,
) -> Result<RunOutput, ExperimentError> {
    let seed = run_seed(cfg, run);
    let fail = |family: Option<Family>, variant: &str, stage: Stage, message: String| {
        ExperimentError::Run {
            run,
            family: family.map_or_else(|| "-".into(), |f| f.to_string()),
            variant: variant.to_string(),
            stage,
            message,
        }
    };
    let split = if cfg.stratified {
        stratified_split(data, cfg.ratio, seed)
    } else {
        random_split(data, cfg.ratio, seed)
    }
    .map_err(|e| fail(None, "-", Stage::Split, e.to_string()))?;
    let test = &split.test;
    let test_before = test.clone();
    let test_samples = Samples::from_dataset(test);
    let truth: Vec<Label> = test.labels();

    let mut trains = Vec::with_capacity(cfg.variants.len());
    for v in &cfg.variants {
        let train = match v.smote_k {
            None => split.train.clone(),
            Some(k) => smote(
                &split.train,
                &SmoteConfig {
                    k,
                    seed: derive_seed(seed, SMOTE_STREAM),
                },
            )
            .map_err(|e| fail(None, &v.name, Stage::Smote, e.to_string()))?,
        };
        trains.push(Samples::from_dataset(&train));
    }
    if *test != test_before {
        return Err(ExperimentError::TestSplitChanged(run));
    }

    let mut cells = Vec::with_capacity(cfg.families.len());
    for &family in &cfg.families {
        // Seeds depend on the run and family only, so identical variants
        // produce identical models.
        let fam_seed = derive_seed(seed, FAMILY_STREAM + family as u64);
        let spec = cfg.spec(family);
        let mut row = Vec::with_capacity(cfg.variants.len());
        for (v, train) in cfg.variants.iter().zip(&trains) {
            let hp = tune(&spec, train, fam_seed)
                .map_err(|e| fail(Some(family), &v.name, Stage::Tune, e.to_string()))?;
            let model = fit(family, &hp, train, fam_seed, &data.schema_version)
                .map_err(|e| fail(Some(family), &v.name, Stage::Fit, e.to_string()))?;
            let pred: Vec<Label> = test_samples
                .rows()
                .map(|x| model.predict_unchecked(x))
                .collect();
            let sample = confusion(&truth, &pred)
                .and_then(|cm| MetricSample::from_confusion(&cm))
                .map_err(|e| fail(Some(family), &v.name, Stage::Evaluate, e.to_string()))?;
            row.push((sample, hp));
        }
        cells.push(row);
    }
    Ok(RunOutput { cells })
}

/// Arithmetic mean of each metric.
pub fn average(samples: &[MetricSample]) -> MetricSample {
    let n = samples.len() as f64;
    let mean = |f: fn(&MetricSample) -> f64| samples.iter().map(f).sum::<f64>() / n;
    MetricSample {
        accuracy: mean(|s| s.accuracy),
        f1: mean(|s| s.f1),
        mcc: mean(|s| s.mcc),
    }
}

/// t-test of `reference - other` that also covers zero-variance samples:
/// equal means give `t = 0, p = 1`; different means give an undefined `t`
/// and `p = 0`.
pub fn compare(reference: &[f64], other: &[f64], paired: bool) -> Result<Comparison, MetricsError> {
    let test = if paired {
        paired_t_test(reference, other)
    } else {
        welch_t_test(reference, other)
    };
    match test {
        Ok(r) => Ok(Comparison {
            t: Some(r.t),
            p: r.p,
            df: Some(r.df),
            direction: sign(r.t),
        }),
        Err(MetricsError::ZeroVariance) => {
            let n = |xs: &[f64]| xs.len() as f64;
            let diff =
                reference.iter().sum::<f64>() / n(reference) - other.iter().sum::<f64>() / n(other);
            if diff == 0.0 {
                Ok(Comparison {
                    t: Some(0.0),
                    p: 1.0,
                    df: None,
                    direction: 0,
                })
            } else {
                Ok(Comparison {
                    t: None,
                    p: 0.0,
                    df: None,
                    direction: sign(diff),
                })
            }
        }
        Err(e) => Err(e),
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn compare_samples(
    reference: &[MetricSample],
    other: &[MetricSample],
    paired: bool,
) -> Result<MetricComparison, MetricsError> {
    let col =
        |xs: &[MetricSample], f: fn(&MetricSample) -> f64| xs.iter().map(f).collect::<Vec<f64>>();
    let cmp = |f: fn(&MetricSample) -> f64| compare(&col(reference, f), &col(other, f), paired);
    Ok(MetricComparison {
        accuracy: cmp(|s| s.accuracy)?,
        f1: cmp(|s| s.f1)?,
        mcc: cmp(|s| s.mcc)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::test_support::toy_dataset;

    fn knn_only(n_runs: usize) -> ExperimentConfig {
        ExperimentConfig {
            n_runs,
            families: vec![Family::Knn],
            variants: vec![VariantSpec::original()],
            ..Default::default()
        }
    }

    #[test]
    fn two_run_toy_report_structure() {
        let d = toy_dataset(10, 10, 3);
        let rep = run_benchmark_on(&d, &knn_only(2)).unwrap();
        assert_eq!(rep.results.len(), 1);
        let cell = &rep.results[0];
        assert_eq!(cell.samples.len(), 2);
        let mean = (cell.samples[0].accuracy + cell.samples[1].accuracy) / 2.0;
        assert!((cell.average.accuracy - mean).abs() < 1e-12);
        assert!(cell.comparison.is_none());
        assert_eq!(rep.run_seeds, vec![0, 1]);
    }

    #[test]
    fn variant_parsing_and_serde() {
        assert_eq!(
            VariantSpec::parse("smote_k5").unwrap(),
            VariantSpec::smote(5)
        );
        assert!(VariantSpec::parse("smote_k0").is_err());
        assert!(VariantSpec::parse("smote").is_err());
        let v: Vec<VariantSpec> =
            serde_json::from_str(r#"["original", {"name": "again", "smote_k": null}, "smote_k1"]"#)
                .unwrap();
        assert_eq!(
            v[1],
            VariantSpec {
                name: "again".into(),
                smote_k: None
            }
        );
        assert_eq!(v[2].display_name(), "SMOTE k=1");
        assert_eq!(v[0].display_name(), "(orig)");
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.n_runs, 100);
        assert_eq!(cfg.ratio, 0.8);
        assert_eq!(cfg.significance_alpha, 0.005);
        assert!(ExperimentConfig {
            n_runs: 1,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"runs": 3}"#).is_err());
    }

    #[test]
    fn zero_variance_comparisons() {
        let c = compare(&[0.5, 0.5], &[0.5, 0.5], false).unwrap();
        assert_eq!((c.t, c.p), (Some(0.0), 1.0));
        let c = compare(&[0.6, 0.6], &[0.5, 0.5], false).unwrap();
        assert_eq!((c.t, c.p, c.direction), (None, 0.0, 1));
    }

    #[test]
    fn stage_failure_names_run_and_stage() {
        // Four serious records cannot feed SMOTE with k = 5.
        let d = toy_dataset(16, 4, 1);
        let cfg = ExperimentConfig {
            n_runs: 2,
            families: vec![Family::Knn],
            variants: vec![VariantSpec::original(), VariantSpec::smote(5)],
            ..Default::default()
        };
        match run_benchmark_on(&d, &cfg) {
            Err(ExperimentError::Run { stage, .. }) => assert_eq!(stage, Stage::Smote),
            other => panic!("{other:?}"),
        }
    }
}
