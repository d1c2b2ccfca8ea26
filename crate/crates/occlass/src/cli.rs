//! Command-line interface.
//!
//! Exit status: 0 on success, 1 when an input fails validation or a command
//! fails, 2 on usage errors.

use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use occlass_core::dataset::{class_counts, load_dataset, write_dataset, Dataset};
use occlass_core::experiment::{
    emit_report, generate_synthetic_dataset, load_config, run_benchmark, BenchmarkReport,
    ExperimentConfig, ReportFormat, VariantSpec,
};
use occlass_core::models::Family;
use occlass_core::schema::{canonical_schema, load_schema, FeatureSchema};

use crate::service::{self, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "occlass",
    version,
    about = "Aviation occurrence classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check or print a feature schema document.
    #[command(subcommand)]
    Schema(SchemaCommand),
    /// Check a labelled dataset file.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Write a planted-rule synthetic dataset as CSV.
    GenerateSynthetic(GenerateArgs),
    /// Run the repeated-split benchmark.
    Benchmark(BenchmarkArgs),
    /// Render a saved machine report.
    Report(ReportArgs),
    /// Tune and fit one family on a whole dataset and write the model file.
    TrainFinal(TrainArgs),
    /// Predict one selection of feature ids with a model file.
    Predict(PredictArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum SchemaCommand {
    /// Validate a schema file (the built-in schema when no file is given).
    Validate { file: Option<PathBuf> },
    /// Print the built-in schema.
    Export,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Validate a CSV dataset against a schema.
    Validate {
        file: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 475)]
    pub n: usize,
    /// Incident fraction.
    #[arg(long, default_value_t = 0.6)]
    pub imbalance: f64,
    /// Fraction of labels flipped per class.
    #[arg(long, default_value_t = 0.15)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// JSON config file; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Comma-separated families, e.g. rfc,knn.
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    /// Comma-separated variants, e.g. original,smote_k1.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Write the machine report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format printed to stdout.
    #[arg(long, default_value = "table")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Machine report produced by `benchmark --out`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "table")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub family: Family,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated feature ids.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Static files served at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Schema(SchemaCommand::Validate { file }) => {
            let schema = schema_from(file.as_deref())?;
            println!(
                "ok: schema {} with {} classes and {} features",
                schema.version,
                schema.classes.len(),
                schema.feature_count()
            );
        }
        Command::Schema(SchemaCommand::Export) => {
            println!("{}", serde_json::to_string_pretty(&canonical_schema())?);
        }
        Command::Dataset(DatasetCommand::Validate { file, schema }) => {
            let schema = schema_from(schema.as_deref())?;
            let d = dataset_from(&file, &schema)?;
            let (i, s) = class_counts(&d);
            println!(
                "ok: {} records ({i} incident, {s} serious incident)",
                d.len()
            );
        }
        Command::GenerateSynthetic(a) => {
            let d = generate_synthetic_dataset(a.n, a.imbalance, a.noise, a.seed)?;
            let schema = canonical_schema();
            match a.out {
                Some(path) => {
                    let f =
                        std::fs::File::create(&path).with_context(|| path.display().to_string())?;
                    write_dataset(&d, &schema, f)?;
                }
                None => write_dataset(&d, &schema, io::stdout().lock())?,
            }
        }
        Command::Benchmark(a) => benchmark(a)?,
        Command::Report(a) => {
            let text =
                std::fs::read_to_string(&a.input).with_context(|| a.input.display().to_string())?;
            let rep: BenchmarkReport = serde_json::from_str(&text).context("machine report")?;
            print!("{}", emit_report(&rep, a.format));
        }
        Command::TrainFinal(a) => {
            let schema = schema_from(a.schema.as_deref())?;
            let d = dataset_from(&a.dataset, &schema)?;
            let model = service::train_final(&d, a.family, a.seed)?;
            std::fs::write(&a.out, model.to_json()).with_context(|| a.out.display().to_string())?;
            eprintln!("wrote {} model to {}", a.family, a.out.display());
        }
        Command::Predict(a) => {
            let state = AppState::load(&a.model, a.schema.as_deref())?;
            let resp = state
                .predict(&a.features)
                .map_err(|e| anyhow::anyhow!(e.message))?;
            println!("{}", serde_json::to_string(&resp)?);
        }
        Command::Serve(a) => {
            let state = AppState::load(&a.model, a.schema.as_deref())?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(state, a.addr, a.ui_dir, |bound| {
                println!("listening on http://{bound}");
                let _ = io::stdout().flush();
            }))?;
        }
    }
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = a.dataset {
        cfg.dataset = Some(d);
    }
    if let Some(n) = a.runs {
        cfg.n_runs = n;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = a.ratio {
        cfg.ratio = r;
    }
    if let Some(alpha) = a.alpha {
        cfg.significance_alpha = alpha;
    }
    if let Some(f) = a.families {
        cfg.families = f.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(v) = a.variants {
        cfg.variants = v
            .iter()
            .map(|s| VariantSpec::parse(s))
            .collect::<Result<_, _>>()
            .map_err(anyhow::Error::msg)?;
    }
    if cfg.dataset.is_none() {
        bail!("no dataset: pass --dataset or set \"dataset\" in the config");
    }
    let rep = run_benchmark(&cfg)?;
    if let Some(out) = &a.out {
        std::fs::write(out, rep.to_json()).with_context(|| out.display().to_string())?;
    }
    print!("{}", emit_report(&rep, a.format));
    Ok(())
}

fn schema_from(path: Option<&Path>) -> Result<FeatureSchema> {
    match path {
        None => Ok(canonical_schema()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| p.display().to_string())?;
            load_schema(&text).with_context(|| p.display().to_string())
        }
    }
}

fn dataset_from(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    load_dataset(&text, schema).with_context(|| path.display().to_string())
}
