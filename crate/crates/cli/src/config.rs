use std::path::PathBuf;

use arctax_core::gap::Metric;
use arctax_core::Category;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum MetricArg {
    Cell,
    #[default]
    Grid,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cell => Metric::Cell,
            MetricArg::Grid => Metric::Grid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Classify every generator in --input and export the traces
    Classify,
    /// Compare predictions (generators or exported traces in --input) with --mapping
    Score,
    /// Category counts and percentages of --mapping
    Distribution,
    /// Share of --mapping in Low or VeryLow affinity categories
    Bias,
    /// Tasks in --results with high cell but low grid accuracy
    Gap,
    /// Gap fraction over a grid of cell and grid thresholds
    Sensitivity,
    /// Zero-grid-accuracy tasks per category
    Ceilings,
    /// Where zero-grid-accuracy failures concentrate, with seed intervals
    Failures,
    /// Two-group comparison (--group-a, --group-b)
    Compare,
    /// Solve rates by affinity level (--solve-rates)
    ExternalValidate,
    /// Every analysis the supplied inputs allow, as one document
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Score => "score",
            Command::Distribution => "distribution",
            Command::Bias => "bias",
            Command::Gap => "gap",
            Command::Sensitivity => "sensitivity",
            Command::Ceilings => "ceilings",
            Command::Failures => "failures",
            Command::Compare => "compare",
            Command::ExternalValidate => "external-validate",
            Command::Report => "report",
        }
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_category(s: &str) -> Result<Category, String> {
    s.parse().map_err(|e| format!("{e}"))
}

/// Comma-separated thresholds in [0, 1], ascending.
pub fn parse_axis(s: &str) -> Result<Vec<f64>, String> {
    let values = s
        .split(',')
        .map(|t| parse_fraction(t.trim()))
        .collect::<Result<Vec<f64>, String>>()?;
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(format!("axis {s:?} is not ascending"));
    }
    Ok(values)
}

#[derive(Debug, Clone, Parser)]
#[command(name = "arctax", version, about = "Taxonomy classification and diagnostics for re-arc tasks")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Generator source file (or exported traces JSON for `score`)
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Task-to-category JSON; the bundled 400-task mapping when omitted
    #[arg(long, global = true)]
    pub mapping: Option<PathBuf>,
    /// Per-task results JSON
    #[arg(long, global = true)]
    pub results: Option<PathBuf>,
    /// Multi-seed out-of-distribution results JSON (`failures`, `report`)
    #[arg(long, global = true)]
    pub ood_results: Option<PathBuf>,
    /// CSV with header task_id,solve_rate
    #[arg(long, global = true)]
    pub solve_rates: Option<PathBuf>,
    /// JSON object of task id to subgroup label
    #[arg(long, global = true)]
    pub subgroups: Option<PathBuf>,
    /// JSON object of category code to affinity level
    #[arg(long, global = true)]
    pub affinity_overrides: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_category)]
    pub category: Option<Category>,
    #[arg(long, global = true, value_parser = parse_fraction)]
    pub cell_min: Option<f64>,
    #[arg(long, global = true, value_parser = parse_fraction)]
    pub grid_max: Option<f64>,
    /// Comma-separated cell thresholds for `sensitivity`
    #[arg(long, global = true, value_parser = parse_axis)]
    pub cell_axis: Option<Vec<f64>>,
    /// Comma-separated grid thresholds for `sensitivity`
    #[arg(long, global = true, value_parser = parse_axis)]
    pub grid_axis: Option<Vec<f64>>,
    /// Group selector: subgroup labels, category codes or an affinity level, comma-separated
    #[arg(long, global = true)]
    pub group_a: Option<String>,
    #[arg(long, global = true)]
    pub group_b: Option<String>,
    /// Accuracy used by `compare` when values come from --results
    #[arg(long, global = true, value_enum, default_value_t = MetricArg::Grid)]
    pub metric: MetricArg,
    /// Count subgrid() as a cropping primitive
    #[arg(long, global = true)]
    pub crop_includes_subgrid: bool,
    /// Add published reference figures next to computed ones in `report`
    #[arg(long, global = true)]
    pub reference_values: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    /// Output file; standard output when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write the confusion matrix CSV here (`score`)
    #[arg(long, global = true)]
    pub confusion_out: Option<PathBuf>,
}

impl RunConfig {
    /// Configuration for `command` with every option at its default.
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input: None,
            mapping: None,
            results: None,
            ood_results: None,
            solve_rates: None,
            subgroups: None,
            affinity_overrides: None,
            category: None,
            cell_min: None,
            grid_max: None,
            cell_axis: None,
            grid_axis: None,
            group_a: None,
            group_b: None,
            metric: MetricArg::Grid,
            crop_includes_subgrid: false,
            reference_values: false,
            format: Format::Markdown,
            out: None,
            confusion_out: None,
        }
    }
}
