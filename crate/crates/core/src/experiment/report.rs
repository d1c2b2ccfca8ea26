//! Text renderings of a [`BenchmarkReport`].

use std::fmt::Write;
use std::str::FromStr;

use super::{BenchmarkReport, Comparison};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Fixed-width comparison table.
    Table,
    /// The full report as JSON.
    Machine,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Self::Table),
            "machine" => Ok(Self::Machine),
            _ => Err(format!(
                "unknown report format {s:?}; expected table or machine"
            )),
        }
    }
}

pub fn emit_report(rep: &BenchmarkReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Machine => rep.to_json(),
        ReportFormat::Table => table(rep),
    }
}

const METRIC_WIDTH: usize = 28;

fn t_cell(c: &Comparison) -> String {
    match c.t {
        Some(t) => format!("{t:.4}"),
        None if c.direction < 0 => "-inf".into(),
        None => "inf".into(),
    }
}

fn p_cell(c: &Comparison, alpha: f64) -> String {
    if c.p < alpha {
        "*".into()
    } else {
        format!("{:.4}", c.p)
    }
}

fn metric_block(avg: f64, cmp: Option<&Comparison>, alpha: f64) -> String {
    let (t, p) = match cmp {
        Some(c) => (t_cell(c), p_cell(c, alpha)),
        None => (String::new(), String::new()),
    };
    format!("{:<8}  {:>8}  {:<6}", format!("{avg:.4}"), t, p)
}

fn table(rep: &BenchmarkReport) -> String {
    let alpha = rep.config.significance_alpha;
    let label_width = rep
        .results
        .iter()
        .map(|c| row_label(c).chars().count())
        .max()
        .unwrap_or(0)
        .max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<label_width$}  {:<METRIC_WIDTH$}{:<METRIC_WIDTH$}MCC",
        "Model", "Accuracy", "F1"
    );
    let sub = format!("{:<8}  {:>8}  {:<6}", "Average", "t", "p");
    let header = format!(
        "{:<label_width$}  {sub:<METRIC_WIDTH$}{sub:<METRIC_WIDTH$}{sub}",
        ""
    );
    let _ = writeln!(out, "{}", header.trim_end());
    let mut previous = None;
    for cell in &rep.results {
        if previous.is_some_and(|f| f != cell.family) {
            out.push('\n');
        }
        previous = Some(cell.family);
        let cmp = cell.comparison.as_ref();
        let line = format!(
            "{:<label_width$}  {:<METRIC_WIDTH$}{:<METRIC_WIDTH$}{}",
            row_label(cell),
            metric_block(cell.average.accuracy, cmp.map(|c| &c.accuracy), alpha),
            metric_block(cell.average.f1, cmp.map(|c| &c.f1), alpha),
            metric_block(cell.average.mcc, cmp.map(|c| &c.mcc), alpha),
        );
        out.push_str(line.trim_end());
        out.push('\n');
    }
    let test = if rep.config.paired { "paired" } else { "Welch" };
    let _ = writeln!(
        out,
        "\n{} runs; t and p from two-sided {test} t-tests against the first variant; * p < {alpha}",
        rep.config.n_runs
    );
    out
}

fn row_label(cell: &super::CellResult) -> String {
    format!(
        "{} {}",
        cell.family.display_name(),
        cell.variant.display_name()
    )
}
