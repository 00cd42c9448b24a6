//! Diagnostics over per-task results: the cell/grid gap tally and its
//! threshold sweep, zero-grid ceilings, failure concentration, seed
//! aggregation and two-group comparisons.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::affinity::AffinityMap;
use crate::ingest::Mapping;
use crate::model::{Category, TaskId, TaskResult};
use crate::ratio::{Ratio, Rounding};
use crate::stats::{self, StatResult, StatsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error("no results")]
    Empty,
    #[error("threshold {name} = {value} is outside [0, 1]")]
    ThresholdOutOfRange { name: &'static str, value: f64 },
    #[error("{0} axis is empty")]
    EmptyAxis(&'static str),
    #[error("{0} axis is not sorted ascending")]
    UnsortedAxis(&'static str),
    #[error("task {0} has no category")]
    MissingCategory(TaskId),
    #[error("group {0:?} is empty")]
    EmptyGroup(String),
    #[error("group {label:?} has {n} value(s); at least 2 are needed")]
    GroupTooSmall { label: String, n: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn check_unit(name: &'static str, value: f64) -> Result<(), GapError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(GapError::ThresholdOutOfRange { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapThresholds {
    pub cell_min: f64,
    pub grid_max: f64,
}

impl GapThresholds {
    pub const REFERENCE: GapThresholds = GapThresholds {
        cell_min: 0.80,
        grid_max: 0.10,
    };

    pub fn new(cell_min: f64, grid_max: f64) -> Result<Self, GapError> {
        check_unit("cell_min", cell_min)?;
        check_unit("grid_max", grid_max)?;
        Ok(GapThresholds { cell_min, grid_max })
    }

    /// High cell accuracy together with low grid accuracy, both strict.
    pub fn is_gap(&self, cell_acc: f64, grid_acc: f64) -> bool {
        cell_acc > self.cell_min && grid_acc < self.grid_max
    }
}

impl Default for GapThresholds {
    fn default() -> Self {
        Self::REFERENCE
    }
}

fn sorted_mean(values: &mut [f64]) -> f64 {
    // sorting first makes the sum independent of record order
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Collapses repeated records of one task into their mean, ordered by task id.
/// A task keeps the first category found among its records.
pub fn aggregate_by_task(results: &[TaskResult]) -> Vec<TaskResult> {
    let mut groups: BTreeMap<TaskId, Vec<&TaskResult>> = BTreeMap::new();
    for r in results {
        groups.entry(r.task_id).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(task_id, recs)| {
            if let [single] = recs.as_slice() {
                return TaskResult {
                    seed: None,
                    ..(*single).clone()
                };
            }
            let mut cells: Vec<f64> = recs.iter().map(|r| r.cell_acc).collect();
            let mut grids: Vec<f64> = recs.iter().map(|r| r.grid_acc).collect();
            let mut bases: Vec<f64> = recs.iter().filter_map(|r| r.base_cell_acc).collect();
            TaskResult {
                task_id,
                cell_acc: sorted_mean(&mut cells),
                grid_acc: sorted_mean(&mut grids),
                base_cell_acc: (!bases.is_empty()).then(|| sorted_mean(&mut bases)),
                seed: None,
                category: recs.iter().find_map(|r| r.category),
            }
        })
        .collect()
}

/// Fills missing record categories from a mapping; records already carrying a
/// category keep it.
pub fn attach_categories(results: &mut [TaskResult], mapping: &Mapping) {
    for r in results.iter_mut().filter(|r| r.category.is_none()) {
        r.category = mapping.get(&r.task_id).copied();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub thresholds: GapThresholds,
    pub n_total: u64,
    pub n_gap: u64,
    pub fraction: Ratio,
    pub percent: String,
    pub gap_task_ids: Vec<TaskId>,
}

/// Tally of tasks showing the gap. Repeated task records are averaged first.
pub fn compositional_gap(results: &[TaskResult], th: GapThresholds) -> Result<GapReport, GapError> {
    if results.is_empty() {
        return Err(GapError::Empty);
    }
    check_unit("cell_min", th.cell_min)?;
    check_unit("grid_max", th.grid_max)?;
    let tasks = aggregate_by_task(results);
    let gap_task_ids: Vec<TaskId> = tasks
        .iter()
        .filter(|r| th.is_gap(r.cell_acc, r.grid_acc))
        .map(|r| r.task_id)
        .collect();
    let fraction = Ratio::new(gap_task_ids.len() as u64, tasks.len() as u64);
    Ok(GapReport {
        thresholds: th,
        n_total: fraction.denominator,
        n_gap: fraction.numerator,
        fraction,
        percent: fraction.percent(Rounding::HalfUp),
        gap_task_ids,
    })
}

/// Cell thresholds 0.70, 0.75, ..., 0.95.
pub fn default_cell_axis() -> Vec<f64> {
    (0..6).map(|i| f64::from(70 + 5 * i) / 100.0).collect()
}

/// Grid thresholds 0.00, 0.02, ..., 0.20.
pub fn default_grid_axis() -> Vec<f64> {
    (0..11).map(|j| f64::from(2 * j) / 100.0).collect()
}

fn check_axis(name: &'static str, axis: &[f64]) -> Result<(), GapError> {
    if axis.is_empty() {
        return Err(GapError::EmptyAxis(name));
    }
    for &v in axis {
        check_unit(name, v)?;
    }
    if axis.windows(2).any(|w| w[0] > w[1]) {
        return Err(GapError::UnsortedAxis(name));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityGrid {
    pub cell_axis: Vec<f64>,
    pub grid_axis: Vec<f64>,
    pub n_total: u64,
    /// Gap counts, rows by cell threshold, columns by grid threshold.
    pub counts: Vec<Vec<u64>>,
    pub cells: Vec<Vec<f64>>,
}

impl SensitivityGrid {
    pub fn ratio(&self, i: usize, j: usize) -> Ratio {
        Ratio::new(self.counts[i][j], self.n_total)
    }

    pub fn n_pairs(&self) -> usize {
        self.cell_axis.len() * self.grid_axis.len()
    }

    /// Number of threshold pairs where strictly more than half of the tasks show the gap.
    pub fn count_majority(&self) -> usize {
        self.counts
            .iter()
            .flatten()
            .filter(|&&c| 2 * c > self.n_total)
            .count()
    }

    /// First row holds grid thresholds, first column cell thresholds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell\\grid");
        for g in &self.grid_axis {
            out.push_str(&format!(",{g}"));
        }
        out.push('\n');
        for (c, row) in self.cell_axis.iter().zip(&self.cells) {
            out.push_str(&c.to_string());
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| cell \\ grid |");
        for g in &self.grid_axis {
            out.push_str(&format!(" {:.0}% |", g * 100.0));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.grid_axis.len()));
        out.push('\n');
        for (i, c) in self.cell_axis.iter().enumerate() {
            out.push_str(&format!("| {:.0}% |", c * 100.0));
            for j in 0..self.grid_axis.len() {
                out.push_str(&format!(" {} |", self.ratio(i, j).percent(Rounding::HalfUp)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn sensitivity(results: &[TaskResult], cell_axis: &[f64], grid_axis: &[f64]) -> Result<SensitivityGrid, GapError> {
    if results.is_empty() {
        return Err(GapError::Empty);
    }
    check_axis("cell", cell_axis)?;
    check_axis("grid", grid_axis)?;
    let tasks = aggregate_by_task(results);
    let n_total = tasks.len() as u64;
    let counts: Vec<Vec<u64>> = cell_axis
        .iter()
        .map(|&cell_min| {
            grid_axis
                .iter()
                .map(|&grid_max| {
                    let th = GapThresholds { cell_min, grid_max };
                    tasks.iter().filter(|r| th.is_gap(r.cell_acc, r.grid_acc)).count() as u64
                })
                .collect()
        })
        .collect();
    let cells = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / n_total as f64).collect())
        .collect();
    Ok(SensitivityGrid {
        cell_axis: cell_axis.to_vec(),
        grid_axis: grid_axis.to_vec(),
        n_total,
        counts,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CeilingReport {
    pub category: Category,
    pub n_tasks: u64,
    pub n_zero_grid: u64,
    pub zero_fraction: Ratio,
    pub percent: String,
    pub exemplar_ids: Vec<TaskId>,
}

/// Tasks of one category whose grid accuracy is exactly zero. The record's own
/// category wins over the mapping when both exist.
pub fn ceiling_report(results: &[TaskResult], mapping: &Mapping, category: Category) -> Result<CeilingReport, GapError> {
    let mut tasks = aggregate_by_task(results);
    attach_categories(&mut tasks, mapping);
    let mut n_tasks = 0;
    let mut exemplar_ids = Vec::new();
    for r in &tasks {
        match r.category {
            None => return Err(GapError::MissingCategory(r.task_id)),
            Some(c) if c == category => {
                n_tasks += 1;
                if r.grid_acc == 0.0 {
                    exemplar_ids.push(r.task_id);
                }
            }
            Some(_) => {}
        }
    }
    let zero_fraction = Ratio::new(exemplar_ids.len() as u64, n_tasks);
    Ok(CeilingReport {
        category,
        n_tasks,
        n_zero_grid: zero_fraction.numerator,
        zero_fraction,
        percent: zero_fraction.percent(Rounding::HalfUp),
        exemplar_ids,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryFailures {
    pub n_tasks: u64,
    pub n_failures: u64,
    pub rate: Ratio,
    pub percent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureConcentration {
    pub failure_rule: &'static str,
    pub n_tasks: u64,
    pub n_failures: u64,
    pub n_failures_low: u64,
    pub share: Ratio,
    pub percent: String,
    pub low_categories: Vec<Category>,
    pub per_category: BTreeMap<Category, CategoryFailures>,
}

impl FailureConcentration {
    /// `"81/118 = 68.6%"`.
    pub fn summary(&self) -> String {
        format!("{}/{} = {}%", self.n_failures_low, self.n_failures, self.percent)
    }
}

/// Share of zero-grid tasks that fall in Low or VeryLow categories. Records are
/// averaged per task first, so a task fails only if every seed scored zero.
pub fn failure_concentration(results: &[TaskResult], affinity: &AffinityMap) -> Result<FailureConcentration, GapError> {
    let tasks = aggregate_by_task(results);
    let mut per_category: BTreeMap<Category, (u64, u64)> = BTreeMap::new();
    let (mut n_failures, mut n_failures_low) = (0u64, 0u64);
    for r in &tasks {
        let c = r.category.ok_or(GapError::MissingCategory(r.task_id))?;
        let entry = per_category.entry(c).or_default();
        entry.0 += 1;
        if r.grid_acc == 0.0 {
            entry.1 += 1;
            n_failures += 1;
            if affinity.is_low(c) {
                n_failures_low += 1;
            }
        }
    }
    let share = Ratio::new(n_failures_low, n_failures);
    Ok(FailureConcentration {
        failure_rule: "grid_acc == 0",
        n_tasks: tasks.len() as u64,
        n_failures,
        n_failures_low,
        share,
        percent: share.percent(Rounding::HalfUp),
        low_categories: Category::CLASSIFIABLE.into_iter().filter(|&c| affinity.is_low(c)).collect(),
        per_category: per_category
            .into_iter()
            .map(|(c, (n, f))| {
                let rate = Ratio::new(f, n);
                (
                    c,
                    CategoryFailures {
                        n_tasks: n,
                        n_failures: f,
                        rate,
                        percent: rate.percent(Rounding::HalfUp),
                    },
                )
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub confidence: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Mean with a two-sided t interval. A single value gets a zero-width
/// interval and a warning. The interval is not clamped to `[0, 1]`.
pub fn aggregate_seeds(values: &[f64], confidence: f64) -> Result<SeedSummary, GapError> {
    if values.is_empty() {
        return Err(GapError::Empty);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::OutOfDomain(format!("confidence {confidence} not in (0, 1)")).into());
    }
    let mut sorted = values.to_vec();
    let mean = sorted_mean(&mut sorted);
    if values.len() == 1 {
        return Ok(SeedSummary {
            n: 1,
            mean,
            sd: 0.0,
            confidence,
            ci_low: mean,
            ci_high: mean,
            warning: Some("single value: confidence interval has zero width".to_string()),
        });
    }
    let sd = stats::sample_sd(&sorted);
    let t = stats::t_quantile(0.5 + confidence / 2.0, (values.len() - 1) as f64)?;
    let half = t * sd / (values.len() as f64).sqrt();
    Ok(SeedSummary {
        n: values.len(),
        mean,
        sd,
        confidence,
        ci_low: mean - half,
        ci_high: mean + half,
        warning: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Cell,
    Grid,
}

impl Metric {
    pub fn of(self, r: &TaskResult) -> f64 {
        match self {
            Metric::Cell => r.cell_acc,
            Metric::Grid => r.grid_acc,
        }
    }
}

/// Per-seed means of `metric` across tasks, keyed by seed. Records without a
/// seed are skipped.
pub fn per_seed_means(results: &[TaskResult], metric: Metric) -> BTreeMap<u64, f64> {
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in results {
        if let Some(s) = r.seed {
            groups.entry(s).or_default().push(metric.of(r));
        }
    }
    groups
        .into_iter()
        .map(|(s, mut v)| (s, sorted_mean(&mut v)))
        .collect()
}

/// Run-level summary: one mean per seed, then a t interval across seeds.
pub fn aggregate_by_seed(results: &[TaskResult], metric: Metric, confidence: f64) -> Result<SeedSummary, GapError> {
    let means: Vec<f64> = per_seed_means(results, metric).into_values().collect();
    aggregate_seeds(&means, confidence)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    pub group_a_label: String,
    pub group_b_label: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub t_statistic: f64,
    pub t_p: f64,
    pub u_statistic: f64,
    pub u_p: f64,
    pub u_method: &'static str,
    /// Absent when both groups are constant.
    pub cohens_d: Option<f64>,
    pub welch: StatResult,
    pub mann_whitney: StatResult,
}

pub fn compare_groups(label_a: &str, a: &[f64], label_b: &str, b: &[f64]) -> Result<GroupComparison, GapError> {
    for (label, g) in [(label_a, a), (label_b, b)] {
        if g.is_empty() {
            return Err(GapError::EmptyGroup(label.to_string()));
        }
        if g.len() < 2 {
            return Err(GapError::GroupTooSmall {
                label: label.to_string(),
                n: g.len(),
            });
        }
    }
    let welch = stats::welch_t(a, b)?;
    let mann_whitney = stats::mann_whitney_u(a, b)?;
    let cohens_d = match stats::cohens_d(a, b) {
        Ok(d) => Some(d),
        Err(StatsError::ZeroPooledSd) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(GroupComparison {
        group_a_label: label_a.to_string(),
        group_b_label: label_b.to_string(),
        n_a: a.len(),
        n_b: b.len(),
        mean_a: stats::mean(a),
        mean_b: stats::mean(b),
        sd_a: stats::sample_sd(a),
        sd_b: stats::sample_sd(b),
        t_statistic: welch.statistic,
        t_p: welch.p_value,
        u_statistic: mann_whitney.statistic,
        u_p: mann_whitney.p_value,
        u_method: mann_whitney.method,
        cohens_d,
        welch,
        mann_whitney,
    })
}
