//! Command-line front end: each subcommand builds a [`ReportBundle`] that is
//! rendered as JSON, CSV or Markdown.

pub mod bundle;
pub mod config;
mod sections;

use std::io::Write;

use anyhow::{Context, Result};
use arctax_core::score::score_against_mapping;
use serde_json::{json, Value};

use crate::bundle::{emit, write_output, ReportBundle, Section};
use crate::config::{Command, RunConfig};
use crate::sections::Loader;

pub use crate::bundle::payload_json;

/// Published reference figures, shown only with `--reference-values`.
const REFERENCE_VALUES: [(&str, &str); 8] = [
    (
        "distribution",
        "S3 108, C1 99, S1 52, S2 38, A2 28, C2 28, L1 21, K1 7, A1 5, ambiguous 14; 386 classifiable (96.5%)",
    ),
    ("bias", "141/400 = 35.3%"),
    ("classifier", "97.5% agreement on classifiable tasks"),
    (
        "gap",
        "210/302 = 69.5% at 80%/10%; majority at 43 of 66 threshold pairs; 56.3% at 85%/5%; 73.2% at 75%/15%",
    ),
    ("ceilings", "A2: 9/21 = 42.9% at zero grid accuracy"),
    ("failures", "81/118 = 68.6%; grid mean 0.34% (95% CI [0.18%, 0.49%])"),
    (
        "subgroups",
        "S3-A 5.68% (SD 23.54%) vs S3-B 0.10% (SD 0.22%); t-test p = 0.6076, Mann-Whitney p = 0.9550",
    ),
    (
        "external",
        "VeryLow 51.9% vs High 77.7% (25.8pp); Cohen's d = 0.726; Spearman rho = 0.100 (p = 0.045)",
    ),
];

fn reference(key: &str) -> &'static str {
    REFERENCE_VALUES
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .expect("known reference key")
}

/// Runs one subcommand and returns its bundle without writing anything,
/// except the confusion matrix when `--confusion-out` is set.
pub fn execute(cfg: &RunConfig) -> Result<ReportBundle> {
    let mut ld = Loader::new(cfg);
    let section = match cfg.command {
        Command::Classify => sections::classify(&mut ld)?.0,
        Command::Score => {
            let s = sections::score(&mut ld)?;
            if let (Some(path), Some(csv)) = (&cfg.confusion_out, &s.csv) {
                write_output(path, csv.as_bytes())?;
            }
            s
        }
        Command::Distribution => sections::distribution_section(&mut ld)?,
        Command::Bias => sections::bias_section(&mut ld)?,
        Command::Gap => {
            let r = ld.results("gap")?;
            sections::gap_section(&mut ld, &r)?
        }
        Command::Sensitivity => {
            let r = ld.results("sensitivity")?;
            sections::sensitivity_section(&mut ld, &r)?
        }
        Command::Ceilings => {
            let r = ld.results("ceilings")?;
            sections::ceilings_section(&mut ld, &r)?
        }
        Command::Failures => {
            let r = ld.ood_results("failures")?;
            sections::failures_section(&mut ld, &r)?
        }
        Command::Compare => sections::compare(&mut ld)?,
        Command::ExternalValidate => sections::external_validate(&mut ld)?,
        Command::Report => dossier(&mut ld)?,
    };
    Ok(ReportBundle {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: cfg.command.name().to_string(),
        inputs: ld.inputs.digests,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        warnings: ld.warnings,
        payload: section.payload,
        csv: section.csv,
        markdown: section.markdown,
    })
}

/// Executes, then writes the rendering to `--out` or stdout. Warnings go to stderr.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let bundle = execute(cfg)?;
    for w in &bundle.warnings {
        eprintln!("warning: {w}");
    }
    let bytes = emit(&bundle, cfg.format)?;
    match &cfg.out {
        Some(path) => write_output(path, &bytes),
        None => std::io::stdout().write_all(&bytes).context("cannot write to stdout"),
    }
}

struct Dossier {
    payload: serde_json::Map<String, Value>,
    markdown: String,
    references: serde_json::Map<String, Value>,
    show_reference: bool,
}

impl Dossier {
    fn add(&mut self, key: &str, section: Section, reference_key: Option<&str>) {
        self.payload.insert(key.to_string(), section.payload);
        self.markdown.push('\n');
        self.markdown.push_str(&section.markdown);
        if let (true, Some(r)) = (self.show_reference, reference_key) {
            let text = reference(r);
            self.markdown.push_str(&format!("\nReference: {text}\n"));
            self.references.insert(r.to_string(), json!(text));
        }
    }
}

/// Every analysis the supplied inputs allow, in a fixed order.
fn dossier(ld: &mut Loader) -> Result<Section> {
    let cfg = ld.cfg;
    let mut d = Dossier {
        payload: serde_json::Map::new(),
        markdown: String::from("# Taxonomy and diagnostics report\n"),
        references: serde_json::Map::new(),
        show_reference: cfg.reference_values,
    };

    d.add("distribution", sections::distribution_section(ld)?, Some("distribution"));
    d.add("bias", sections::bias_section(ld)?, Some("bias"));

    if cfg.input.is_some() {
        let (section, traces) = sections::classify(ld)?;
        d.add("classification", section, None);
        let mapping = ld.mapping()?;
        let known: Vec<_> = traces.values().filter(|t| mapping.contains_key(&t.task_id)).collect();
        if known.len() < traces.len() {
            ld.warnings.push(format!(
                "{} classified task(s) have no reference category and are not scored",
                traces.len() - known.len()
            ));
        }
        if !known.is_empty() {
            let report = score_against_mapping(known, &mapping)?;
            d.add("agreement", sections::score_report(&report), Some("classifier"));
        }
    }

    if cfg.results.is_some() {
        let results = ld.results("report")?;
        d.add("gap", sections::gap_section(ld, &results)?, Some("gap"));
        d.add("sensitivity", sections::sensitivity_section(ld, &results)?, None);
        d.add("ceilings", sections::ceilings_section(ld, &results)?, Some("ceilings"));
        if let Some(bands) = sections::bands_section(&results) {
            d.add("empirical_bands", bands, None);
        }
    }

    if cfg.ood_results.is_some() {
        let results = ld.ood_results("report")?;
        d.add("failures", sections::failures_section(ld, &results)?, Some("failures"));
    }

    if cfg.subgroups.is_some() && (cfg.results.is_some() || cfg.solve_rates.is_some()) {
        let a = cfg.group_a.clone().unwrap_or_else(|| "S3-A".to_string());
        let b = cfg.group_b.clone().unwrap_or_else(|| "S3-B".to_string());
        d.add(
            "subgroups",
            sections::compare_with(ld, &a, &b, "Subgroup comparison")?,
            Some("subgroups"),
        );
    }

    if cfg.solve_rates.is_some() {
        d.add("external_validation", sections::external_validate(ld)?, Some("external"));
    }

    if d.show_reference {
        d.payload.insert("reference_values".to_string(), Value::Object(d.references));
    }
    Ok(Section {
        payload: Value::Object(d.payload),
        csv: None,
        markdown: d.markdown,
    })
}
