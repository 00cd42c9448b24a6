use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use arctax_core::affinity::{empirical_band, AffinityLevel, AffinityMap, EmpiricalBand};
use arctax_core::gap::{
    aggregate_by_seed, aggregate_by_task, attach_categories, ceiling_report, compare_groups, default_cell_axis,
    default_grid_axis, failure_concentration, CeilingReport, GroupComparison, Metric, SeedSummary,
};
use arctax_core::ingest::{
    located, parse_generator_corpus, parse_mapping, parse_predictions, parse_results, parse_solve_rates, Mapping,
};
use arctax_core::rules::traces_to_json;
use arctax_core::score::{score_predictions, AccuracyReport};
use arctax_core::stats::spearman;
use arctax_core::{
    bundled, classify_corpus, compositional_gap, curriculum_bias, distribution, sensitivity, Category,
    ClassificationTrace, ClassifierConfig, GapThresholds, Ratio, Rounding, TaskId, TaskResult,
};
use serde_json::{json, Value};

use crate::bundle::{to_value, Inputs, Section};
use crate::config::RunConfig;

/// Lazily loaded inputs for one run.
pub struct Loader<'a> {
    pub cfg: &'a RunConfig,
    pub inputs: Inputs,
    pub warnings: Vec<String>,
    mapping: Option<Mapping>,
    affinity: Option<AffinityMap>,
}

fn require<'p>(path: &'p Option<std::path::PathBuf>, flag: &str, command: &str) -> Result<&'p Path> {
    path.as_deref()
        .ok_or_else(|| anyhow!("`{command}` needs --{flag}"))
}

impl<'a> Loader<'a> {
    pub fn new(cfg: &'a RunConfig) -> Self {
        Loader {
            cfg,
            inputs: Inputs::default(),
            warnings: Vec::new(),
            mapping: None,
            affinity: None,
        }
    }

    pub fn mapping(&mut self) -> Result<Mapping> {
        if let Some(m) = &self.mapping {
            return Ok(m.clone());
        }
        let m = match &self.cfg.mapping {
            Some(path) => {
                let text = self.inputs.read("mapping", path)?;
                let m = located(path, parse_mapping(&text))?;
                if m.is_empty() {
                    bail!("{}: mapping is empty", path.display());
                }
                m
            }
            None => {
                self.inputs.record("mapping", "<bundled>", bundled::TASK_CATEGORIES_JSON);
                bundled::task_categories()
            }
        };
        self.mapping = Some(m.clone());
        Ok(m)
    }

    pub fn affinity(&mut self) -> Result<AffinityMap> {
        if let Some(a) = &self.affinity {
            return Ok(a.clone());
        }
        let a = match &self.cfg.affinity_overrides {
            Some(path) => {
                let text = self.inputs.read("affinity_overrides", path)?;
                AffinityMap::with_overrides_json(&text).with_context(|| format!("{}", path.display()))?
            }
            None => AffinityMap::default(),
        };
        self.affinity = Some(a.clone());
        Ok(a)
    }

    fn results_file(&mut self, role: &str, path: &Path) -> Result<Vec<TaskResult>> {
        let text = self.inputs.read(role, path)?;
        let results = located(path, parse_results(&text))?;
        if results.is_empty() {
            bail!("{}: no result records", path.display());
        }
        Ok(results)
    }

    pub fn results(&mut self, command: &str) -> Result<Vec<TaskResult>> {
        let path = require(&self.cfg.results, "results", command)?;
        self.results_file("results", path)
    }

    pub fn ood_results(&mut self, command: &str) -> Result<Vec<TaskResult>> {
        match (&self.cfg.ood_results, &self.cfg.results) {
            (Some(path), _) => self.results_file("ood_results", path),
            (None, Some(path)) => self.results_file("results", path),
            (None, None) => bail!("`{command}` needs --ood-results or --results"),
        }
    }

    pub fn solve_rates(&mut self, command: &str) -> Result<BTreeMap<TaskId, f64>> {
        let path = require(&self.cfg.solve_rates, "solve-rates", command)?;
        let text = self.inputs.read("solve_rates", path)?;
        let records = located(path, parse_solve_rates(&text))?;
        if records.is_empty() {
            bail!("{}: no solve-rate rows", path.display());
        }
        Ok(records.into_iter().map(|r| (r.task_id, r.solve_rate)).collect())
    }

    pub fn subgroups(&mut self) -> Result<Option<BTreeMap<TaskId, String>>> {
        let Some(path) = &self.cfg.subgroups else {
            return Ok(None);
        };
        let text = self.inputs.read("subgroups", path)?;
        let raw: BTreeMap<String, String> =
            serde_json::from_str(&text).with_context(|| format!("{}: expected an object of task id to label", path.display()))?;
        let mut out = BTreeMap::new();
        for (k, v) in raw {
            let id: TaskId = k.parse().with_context(|| format!("{}", path.display()))?;
            out.insert(id, v);
        }
        Ok(Some(out))
    }

    fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            crop_includes_subgrid: self.cfg.crop_includes_subgrid,
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

fn pct2(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

/// A threshold as a percentage without trailing zeros, e.g. `80` or `2.5`.
fn threshold(x: f64) -> String {
    format!("{}", (x * 10_000.0).round() / 100.0)
}

fn ratio_line(r: &Ratio, rounding: Rounding) -> String {
    format!("{} = {}%", r, r.percent(rounding))
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

pub fn classify(ld: &mut Loader) -> Result<(Section, BTreeMap<TaskId, ClassificationTrace>)> {
    let path = require(&ld.cfg.input, "input", "classify")?;
    let text = ld.inputs.read("input", path)?;
    let corpus = parse_generator_corpus(&text);
    if corpus.units.is_empty() {
        bail!("{}: no generator functions with a task id found", path.display());
    }
    ld.warnings.extend(corpus.warnings.iter().map(|w| format!("{}: {w}", path.display())));
    for s in &corpus.skipped {
        ld.warnings
            .push(format!("{}:{}: skipped {}: {}", path.display(), s.line, s.name, s.reason));
    }
    let traces = classify_corpus(&corpus.units, &ld.classifier_config());
    for t in traces.values() {
        if let Some(e) = &t.error {
            ld.warnings.push(format!("{}: {e}", path.display()));
        }
    }

    let mut counts = [0u64; 10];
    for t in traces.values() {
        counts[t.category.index()] += 1;
    }
    let skipped: Vec<Value> = corpus
        .skipped
        .iter()
        .map(|s| json!({"name": s.name, "line": s.line, "reason": s.reason.to_string()}))
        .collect();
    let payload = json!({
        "function_count": corpus.function_count,
        "classified": traces.len(),
        "skipped": skipped,
        "counts": Category::ALL.iter().map(|c| (c.code().to_string(), json!(counts[c.index()]))).collect::<serde_json::Map<_, _>>(),
        "traces": traces_to_json(traces.values()),
    });

    let mut csv = String::from("task_id,category,fired_rule,edge_cases\n");
    let mut md = format!(
        "## Classification\n\n{} generators classified, {} function(s) skipped.\n\n| Category | Count |\n|---|---:|\n",
        traces.len(),
        corpus.skipped.len()
    );
    for c in Category::ALL {
        let _ = writeln!(md, "| {} | {} |", c.code(), counts[c.index()]);
    }
    md.push_str("\n| Task | Category | Rule | Edge cases |\n|---|---|---|---|\n");
    for t in traces.values() {
        let edges = t.edge_cases_applied.join(";");
        let _ = writeln!(csv, "{},{},{},{}", t.task_id, t.category.code(), t.fired_rule, edges);
        let _ = writeln!(md, "| {} | {} | {} | {} |", t.task_id, t.category.code(), t.fired_rule, edges);
    }
    Ok((
        Section {
            payload,
            csv: Some(csv),
            markdown: md,
        },
        traces,
    ))
}

fn confusion_markdown(r: &AccuracyReport) -> String {
    let mut md = String::from("| reference \\ predicted |");
    for c in Category::ALL {
        let _ = write!(md, " {} |", c.code());
    }
    md.push_str("\n|---|");
    md.push_str(&"---:|".repeat(Category::ALL.len()));
    md.push('\n');
    for t in Category::ALL {
        let _ = write!(md, "| {} |", t.code());
        for p in Category::ALL {
            let _ = write!(md, " {} |", r.confusion.get(t, p));
        }
        md.push('\n');
    }
    md
}

pub fn score_report(report: &AccuracyReport) -> Section {
    let mut payload = to_value(report);
    payload["percent"] = json!(report.agreement.percent(Rounding::HalfUp));
    let mut md = format!(
        "## Classifier agreement\n\nAgreement on classifiable tasks: {} ({} tasks scored).\n\n### Confusion matrix\n\n",
        ratio_line(&report.agreement, Rounding::HalfUp),
        report.n_total
    );
    md.push_str(&confusion_markdown(report));
    if !report.disagreements.is_empty() {
        md.push_str("\n### Disagreements\n\n| Task | Reference | Predicted |\n|---|---|---|\n");
        for d in &report.disagreements {
            let _ = writeln!(md, "| {} | {} | {} |", d.task_id, d.truth.code(), d.predicted.code());
        }
    }
    Section {
        payload,
        csv: Some(report.confusion.to_csv()),
        markdown: md,
    }
}

pub fn score(ld: &mut Loader) -> Result<Section> {
    let path = require(&ld.cfg.input, "input", "score")?;
    let text = ld.inputs.read("input", path)?;
    let predicted: BTreeMap<TaskId, Category> = if text.trim_start().starts_with('[') {
        located(path, parse_predictions(&text))?
    } else {
        let corpus = parse_generator_corpus(&text);
        if corpus.units.is_empty() {
            bail!("{}: no generator functions with a task id found", path.display());
        }
        classify_corpus(&corpus.units, &ld.classifier_config())
            .into_iter()
            .map(|(k, t)| (k, t.category))
            .collect()
    };
    let mapping = ld.mapping()?;
    let report = score_predictions(&predicted, &mapping).with_context(|| format!("scoring {}", path.display()))?;
    Ok(score_report(&report))
}

pub fn distribution_section(ld: &mut Loader) -> Result<Section> {
    let d = distribution(&ld.mapping()?);
    Ok(Section {
        payload: to_value(&d),
        csv: Some(d.to_csv()),
        markdown: format!("## Curriculum distribution\n\n{}", d.to_markdown()),
    })
}

pub fn bias_section(ld: &mut Loader) -> Result<Section> {
    let b = curriculum_bias(&ld.mapping()?, &ld.affinity()?);
    let cats: Vec<&str> = b.low_categories.iter().map(|c| c.code()).collect();
    Ok(Section {
        payload: to_value(&b),
        csv: Some(format!(
            "numerator,denominator,fraction,percent\n{},{},{},{}\n",
            b.numerator,
            b.denominator,
            fmt_opt(b.fraction, 6),
            b.percent
        )),
        markdown: format!(
            "## Curriculum bias\n\nTasks in Low or VeryLow affinity categories ({}): {}\n",
            cats.join(", "),
            b.summary()
        ),
    })
}

fn thresholds(cfg: &RunConfig) -> Result<GapThresholds> {
    Ok(GapThresholds::new(
        cfg.cell_min.unwrap_or(GapThresholds::REFERENCE.cell_min),
        cfg.grid_max.unwrap_or(GapThresholds::REFERENCE.grid_max),
    )?)
}

pub fn gap_section(ld: &mut Loader, results: &[TaskResult]) -> Result<Section> {
    let th = thresholds(ld.cfg)?;
    let g = compositional_gap(results, th)?;
    let mut md = format!(
        "## Compositional gap\n\nTasks with cell accuracy > {}% and grid accuracy < {}%: {}\n",
        threshold(th.cell_min),
        threshold(th.grid_max),
        ratio_line(&g.fraction, Rounding::HalfUp)
    );
    if !g.gap_task_ids.is_empty() {
        let ids: Vec<String> = g.gap_task_ids.iter().map(TaskId::to_string).collect();
        let _ = write!(md, "\nGap tasks: {}\n", ids.join(", "));
    }
    Ok(Section {
        payload: to_value(&g),
        csv: Some(format!(
            "cell_min,grid_max,n_gap,n_total,percent\n{},{},{},{},{}\n",
            th.cell_min, th.grid_max, g.n_gap, g.n_total, g.percent
        )),
        markdown: md,
    })
}

pub fn sensitivity_section(ld: &mut Loader, results: &[TaskResult]) -> Result<Section> {
    let cells = ld.cfg.cell_axis.clone().unwrap_or_else(default_cell_axis);
    let grids = ld.cfg.grid_axis.clone().unwrap_or_else(default_grid_axis);
    let s = sensitivity(results, &cells, &grids)?;
    let majority = s.count_majority();
    let mut payload = to_value(&s);
    payload["majority_pairs"] = json!(majority);
    payload["n_pairs"] = json!(s.n_pairs());
    Ok(Section {
        payload,
        csv: Some(s.to_csv()),
        markdown: format!(
            "## Threshold sensitivity\n\nShare of {} tasks in the gap (rows: cell threshold, columns: grid threshold).\n\n{}\nMore than half of the tasks show the gap at {} of {} threshold pairs.\n",
            s.n_total,
            s.to_markdown(),
            majority,
            s.n_pairs()
        ),
    })
}

pub fn ceilings_section(ld: &mut Loader, results: &[TaskResult]) -> Result<Section> {
    let mapping = ld.mapping()?;
    let mut tasks = aggregate_by_task(results);
    attach_categories(&mut tasks, &mapping);
    let categories: Vec<Category> = match ld.cfg.category {
        Some(c) => vec![c],
        None => {
            let present: BTreeSet<Category> = tasks.iter().filter_map(|r| r.category).collect();
            Category::ALL.into_iter().filter(|c| present.contains(c)).collect()
        }
    };
    let reports = categories
        .iter()
        .map(|&c| ceiling_report(&tasks, &mapping, c))
        .collect::<Result<Vec<CeilingReport>, _>>()
        .context("ceiling report")?;
    let mut csv = String::from("category,n_tasks,n_zero_grid,percent,exemplars\n");
    let mut md = String::from(
        "## Affinity ceilings\n\nTasks at exactly 0% grid accuracy.\n\n| Category | Tasks | Zero grid | Share | Examples |\n|---|---:|---:|---:|---|\n",
    );
    for r in &reports {
        let ids: Vec<String> = r.exemplar_ids.iter().map(TaskId::to_string).collect();
        let _ = writeln!(csv, "{},{},{},{},{}", r.category.code(), r.n_tasks, r.n_zero_grid, r.percent, ids.join(";"));
        let share = if r.zero_fraction.is_undefined() { "n/a".to_string() } else { format!("{}%", r.percent) };
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            r.category.code(),
            r.n_tasks,
            r.n_zero_grid,
            share,
            ids.join(", ")
        );
    }
    Ok(Section {
        payload: to_value(&reports),
        csv: Some(csv),
        markdown: md,
    })
}

fn seed_line(label: &str, s: &SeedSummary) -> String {
    format!(
        "{label} across {} seed(s): mean {} ({:.0}% CI [{}, {}])",
        s.n,
        pct2(s.mean),
        s.confidence * 100.0,
        pct2(s.ci_low),
        pct2(s.ci_high)
    )
}

pub fn failures_section(ld: &mut Loader, results: &[TaskResult]) -> Result<Section> {
    let mapping = ld.mapping()?;
    let affinity = ld.affinity()?;
    let mut records = results.to_vec();
    attach_categories(&mut records, &mapping);
    let f = failure_concentration(&records, &affinity).context("failure concentration")?;

    let seeded = records.iter().any(|r| r.seed.is_some());
    let mut seeds = serde_json::Map::new();
    let mut seed_lines = Vec::new();
    if seeded {
        for (key, label, metric) in [("grid", "Grid accuracy", Metric::Grid), ("cell", "Cell accuracy", Metric::Cell)] {
            let s = aggregate_by_seed(&records, metric, 0.95)?;
            if let Some(w) = &s.warning {
                ld.warnings.push(format!("{key} accuracy: {w}"));
            }
            seed_lines.push(seed_line(label, &s));
            seeds.insert(key.to_string(), to_value(&s));
        }
    }

    let low: Vec<&str> = f.low_categories.iter().map(|c| c.code()).collect();
    let mut md = format!(
        "## Failure concentration\n\nFailures (grid accuracy exactly 0 after averaging seeds): {} of {} tasks.\n\nFailures in Low or VeryLow affinity categories ({}): {}\n\n| Category | Tasks | Failures | Failure rate |\n|---|---:|---:|---:|\n",
        f.n_failures,
        f.n_tasks,
        low.join(", "),
        f.summary()
    );
    let mut csv = String::from("scope,numerator,denominator,percent\n");
    let _ = writeln!(csv, "low_affinity_share,{},{},{}", f.n_failures_low, f.n_failures, f.percent);
    for (c, r) in &f.per_category {
        let _ = writeln!(md, "| {} | {} | {} | {}% |", c.code(), r.n_tasks, r.n_failures, r.percent);
        let _ = writeln!(csv, "{},{},{},{}", c.code(), r.n_failures, r.n_tasks, r.percent);
    }
    for l in &seed_lines {
        let _ = write!(md, "\n{l}\n");
    }
    Ok(Section {
        payload: json!({"concentration": to_value(&f), "seeds": Value::Object(seeds)}),
        csv: Some(csv),
        markdown: md,
    })
}

enum Selector {
    Labels(BTreeSet<String>),
    Categories(BTreeSet<Category>),
}

fn parse_selector(query: &str, subgroups: bool, affinity: &AffinityMap) -> Result<Selector> {
    let tokens: Vec<&str> = query.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if tokens.is_empty() {
        bail!("empty group selector");
    }
    if subgroups {
        return Ok(Selector::Labels(tokens.iter().map(|t| t.to_string()).collect()));
    }
    let mut cats = BTreeSet::new();
    for t in tokens {
        if let Ok(level) = t.parse::<AffinityLevel>() {
            cats.extend(affinity.categories_at(level));
        } else {
            cats.insert(
                t.parse::<Category>()
                    .map_err(|_| anyhow!("group selector {t:?} is neither a category code nor an affinity level"))?,
            );
        }
    }
    Ok(Selector::Categories(cats))
}

pub fn comparison_markdown(title: &str, c: &GroupComparison) -> String {
    format!(
        "## {title}\n\n| Group | n | Mean | SD |\n|---|---:|---:|---:|\n| {} | {} | {} | {} |\n| {} | {} | {} | {} |\n\nWelch t = {:.4}, p = {:.4}; Mann-Whitney U = {}, p = {:.4} ({}); Cohen's d = {}\n",
        c.group_a_label,
        c.n_a,
        pct2(c.mean_a),
        pct2(c.sd_a),
        c.group_b_label,
        c.n_b,
        pct2(c.mean_b),
        pct2(c.sd_b),
        c.t_statistic,
        c.t_p,
        c.u_statistic,
        c.u_p,
        c.u_method,
        fmt_opt(c.cohens_d, 3)
    )
}

fn comparison_csv(c: &GroupComparison) -> String {
    let mut csv = String::from("field,value\n");
    let rows: [(&str, String); 14] = [
        ("group_a", c.group_a_label.clone()),
        ("group_b", c.group_b_label.clone()),
        ("n_a", c.n_a.to_string()),
        ("n_b", c.n_b.to_string()),
        ("mean_a", c.mean_a.to_string()),
        ("mean_b", c.mean_b.to_string()),
        ("sd_a", c.sd_a.to_string()),
        ("sd_b", c.sd_b.to_string()),
        ("t_statistic", c.t_statistic.to_string()),
        ("t_p", c.t_p.to_string()),
        ("u_statistic", c.u_statistic.to_string()),
        ("u_p", c.u_p.to_string()),
        ("u_method", c.u_method.to_string()),
        ("cohens_d", fmt_opt(c.cohens_d, 6)),
    ];
    for (k, v) in rows {
        let _ = writeln!(csv, "{k},{v}");
    }
    csv
}

/// Per-task values for `compare`: the chosen accuracy from --results, else solve rates.
fn comparison_values(ld: &mut Loader) -> Result<(BTreeMap<TaskId, f64>, BTreeMap<TaskId, Category>)> {
    let mapping = ld.mapping()?;
    if ld.cfg.results.is_none() {
        if ld.cfg.solve_rates.is_none() {
            bail!("`compare` needs --results or --solve-rates");
        }
        let rates = ld.solve_rates("compare")?;
        return Ok((rates, mapping));
    }
    let results = ld.results("compare")?;
    let metric: Metric = ld.cfg.metric.into();
    let mut tasks = aggregate_by_task(&results);
    attach_categories(&mut tasks, &mapping);
    let cats = tasks.iter().filter_map(|r| r.category.map(|c| (r.task_id, c))).collect();
    Ok((tasks.iter().map(|r| (r.task_id, metric.of(r))).collect(), cats))
}

pub fn compare_with(ld: &mut Loader, query_a: &str, query_b: &str, title: &str) -> Result<Section> {
    let affinity = ld.affinity()?;
    let subgroups = ld.subgroups()?;
    let (values, categories) = comparison_values(ld)?;
    let sel_a = parse_selector(query_a, subgroups.is_some(), &affinity)?;
    let sel_b = parse_selector(query_b, subgroups.is_some(), &affinity)?;
    let member = |sel: &Selector, id: &TaskId| match sel {
        Selector::Labels(l) => subgroups.as_ref().and_then(|s| s.get(id)).is_some_and(|lab| l.contains(lab)),
        Selector::Categories(cs) => categories.get(id).is_some_and(|c| cs.contains(c)),
    };
    let a: Vec<f64> = values.iter().filter(|(id, _)| member(&sel_a, id)).map(|(_, &v)| v).collect();
    let b: Vec<f64> = values.iter().filter(|(id, _)| member(&sel_b, id)).map(|(_, &v)| v).collect();
    let c = compare_groups(query_a, &a, query_b, &b)?;
    Ok(Section {
        payload: to_value(&c),
        csv: Some(comparison_csv(&c)),
        markdown: comparison_markdown(title, &c),
    })
}

pub fn compare(ld: &mut Loader) -> Result<Section> {
    let a = ld.cfg.group_a.clone().ok_or_else(|| anyhow!("`compare` needs --group-a"))?;
    let b = ld.cfg.group_b.clone().ok_or_else(|| anyhow!("`compare` needs --group-b"))?;
    compare_with(ld, &a, &b, "Group comparison")
}

pub fn external_validate(ld: &mut Loader) -> Result<Section> {
    let rates = ld.solve_rates("external-validate")?;
    let mapping = ld.mapping()?;
    let affinity = ld.affinity()?;

    let mut by_level: BTreeMap<AffinityLevel, Vec<f64>> = BTreeMap::new();
    let (mut ordinals, mut values) = (Vec::new(), Vec::new());
    let (mut unmapped, mut ambiguous) = (0usize, 0usize);
    for (id, &rate) in &rates {
        match mapping.get(id).map(|&c| (c, affinity.level(c))) {
            None => unmapped += 1,
            Some((_, None)) => ambiguous += 1,
            Some((_, Some(level))) => {
                by_level.entry(level).or_default().push(rate);
                ordinals.push(f64::from(level.ordinal()));
                values.push(rate);
            }
        }
    }
    if unmapped > 0 {
        ld.warnings.push(format!("{unmapped} solve-rate row(s) have no category in the mapping"));
    }

    let mut levels = Vec::new();
    let mut md = String::from("## External validation\n\n| Affinity | Categories | Tasks | Mean solve rate |\n|---|---|---:|---:|\n");
    let mut csv = String::from("level,n,mean,sd\n");
    for level in AffinityLevel::ALL {
        let vals = by_level.get(&level).map(Vec::as_slice).unwrap_or(&[]);
        let mean = (!vals.is_empty()).then(|| arctax_core::stats::mean(vals));
        let sd = (vals.len() >= 2).then(|| arctax_core::stats::sample_sd(vals));
        let cats: Vec<&str> = affinity.categories_at(level).iter().map(|c| c.code()).collect();
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} |",
            level,
            cats.join(", "),
            vals.len(),
            mean.map_or_else(|| "n/a".to_string(), pct)
        );
        let _ = writeln!(csv, "{},{},{},{}", level, vals.len(), fmt_opt(mean, 6), fmt_opt(sd, 6));
        levels.push(json!({"level": level.label(), "categories": cats, "n": vals.len(), "mean": mean, "sd": sd}));
    }

    let low = by_level.get(&AffinityLevel::VeryLow).cloned().unwrap_or_default();
    let high = by_level.get(&AffinityLevel::High).cloned().unwrap_or_default();
    let comparison = compare_groups("VeryLow", &low, "High", &high).context("VeryLow vs High comparison")?;
    let gap_pp = (comparison.mean_b - comparison.mean_a) * 100.0;
    let _ = write!(
        md,
        "\nVeryLow vs High: {} vs {}, a {:.1}pp gap (Mann-Whitney p = {:.4}, Welch p = {:.4}, Cohen's d = {}).\n",
        pct(comparison.mean_a),
        pct(comparison.mean_b),
        gap_pp,
        comparison.u_p,
        comparison.t_p,
        fmt_opt(comparison.cohens_d.map(f64::abs), 3)
    );
    let rho = spearman(&ordinals, &values).ok();
    match &rho {
        Some(r) => {
            let _ = writeln!(
                md,
                "\nSpearman correlation of affinity level with solve rate over {} tasks: rho = {:.3} (p = {:.4}).",
                r.n_a, r.statistic, r.p_value
            );
        }
        None => md.push_str("\nSpearman correlation undefined (constant input).\n"),
    }
    Ok(Section {
        payload: json!({
            "levels": levels,
            "very_low_vs_high": to_value(&comparison),
            "gap_pp": gap_pp,
            "spearman": rho.as_ref().map(to_value),
            "n_rated": values.len(),
            "n_unmapped": unmapped,
            "n_ambiguous": ambiguous,
        }),
        csv: Some(csv),
        markdown: md,
    })
}

pub fn bands_section(results: &[TaskResult]) -> Option<Section> {
    let tasks = aggregate_by_task(results);
    let mut counts: BTreeMap<EmpiricalBand, u64> = BTreeMap::new();
    for v in tasks.iter().filter_map(|r| r.base_cell_acc) {
        let band = empirical_band(v).ok()?.band;
        *counts.entry(band).or_default() += 1;
    }
    if counts.is_empty() {
        return None;
    }
    let mut md = String::from("## Empirical affinity bands\n\n| Band | Tasks |\n|---|---:|\n");
    let mut csv = String::from("band,n\n");
    for band in [EmpiricalBand::High, EmpiricalBand::Medium, EmpiricalBand::Low] {
        let n = counts.get(&band).copied().unwrap_or(0);
        let _ = writeln!(md, "| {band:?} | {n} |");
        let _ = writeln!(csv, "{band:?},{n}");
    }
    Some(Section {
        payload: to_value(&counts.iter().map(|(b, n)| (format!("{b:?}"), *n)).collect::<BTreeMap<_, _>>()),
        csv: Some(csv),
        markdown: md,
    })
}
