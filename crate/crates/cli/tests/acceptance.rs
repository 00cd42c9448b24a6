//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines appear in plain `cargo test` output.
//!
//! Optional data:
//! - `ARCTAX_GENERATORS`: a re-arc generator file for classifier agreement.
//! - `ARCTAX_RESULTS`: the original 302-task results file for the gap figures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use arctax::bundle::payload_json;
use arctax::config::{Command, Format, RunConfig};
use arctax_core::gap::{aggregate_seeds, default_cell_axis, default_grid_axis};
use arctax_core::stats::{cohens_d, mann_whitney_u, spearman, t_quantile};
use arctax_core::{compositional_gap, sensitivity, GapThresholds, TaskId, TaskResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(cfg: &RunConfig) -> Result<arctax::bundle::ReportBundle, String> {
    arctax::execute(cfg).map_err(|e| format!("{e:#}"))
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took <= limit, format!("took {took:?}, limit {limit:?}"))
}

fn distribution_fidelity() -> Check {
    let t = Instant::now();
    let mut cfg = RunConfig::new(Command::Distribution);
    cfg.format = Format::Csv;
    let b = run(&cfg)?;
    let csv = b.csv.ok_or("no csv")?;
    let expected = [
        ("S3", 108, "27.0"),
        ("C1", 99, "24.8"),
        ("S1", 52, "13.0"),
        ("S2", 38, "9.5"),
        ("A2", 28, "7.0"),
        ("C2", 28, "7.0"),
        ("L1", 21, "5.2"),
        ("K1", 7, "1.8"),
        ("A1", 5, "1.2"),
        ("ambiguous", 14, "3.5"),
    ];
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    ensure(rows.len() == expected.len(), format!("{} rows", rows.len()))?;
    for (row, (code, n, pct)) in rows.iter().zip(expected) {
        let want = format!("{code},{n},{pct}");
        ensure(*row == want, format!("got {row:?}, want {want:?}"))?;
    }
    within(t, Duration::from_secs(1))?;
    Ok("S3=108 ... ambiguous=14, 27.0% ... 3.5%".into())
}

fn curriculum_bias() -> Check {
    let t = Instant::now();
    let b = run(&RunConfig::new(Command::Bias))?;
    ensure(b.markdown.contains("141/400 = 35.3%"), b.markdown.clone())?;
    ensure(b.payload["numerator"] == 141 && b.payload["denominator"] == 400, "wrong rational")?;
    within(t, Duration::from_secs(1))?;
    Ok("141/400 = 35.3%".into())
}

fn classifier_agreement() -> Outcome {
    let Some(path) = std::env::var_os("ARCTAX_GENERATORS") else {
        return Outcome::Skip("set ARCTAX_GENERATORS to a re-arc generator file".into());
    };
    let check = || -> Check {
        let t = Instant::now();
        let mut cfg = RunConfig::new(Command::Score);
        cfg.input = Some(PathBuf::from(&path));
        let b = run(&cfg)?;
        within(t, Duration::from_secs(10))?;
        ensure(b.csv.as_deref().is_some_and(|c| c.starts_with("truth\\predicted")), "no confusion matrix")?;
        let (agree, total) = (
            b.payload["n_agree"].as_u64().unwrap_or(0),
            b.payload["n_classifiable"].as_u64().unwrap_or(0),
        );
        let acc = agree as f64 / total.max(1) as f64;
        let stretch = if acc >= 0.975 { "stretch met" } else { "stretch 97.5% not met" };
        ensure(acc >= 0.90, format!("{agree}/{total} = {:.1}% below 90%", acc * 100.0))?;
        Ok(format!("{agree}/{total} = {:.1}% ({stretch})", acc * 100.0))
    };
    match check() {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}

fn rule_fidelity() -> Check {
    let t = Instant::now();
    let mut cfg = RunConfig::new(Command::Classify);
    cfg.input = Some(fixture("rule_fixtures.py"));
    let b = run(&cfg)?;
    let expected: BTreeMap<String, Value> =
        serde_json::from_str(&std::fs::read_to_string(fixture("rule_expected.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let traces = b.payload["traces"].as_array().ok_or("no traces")?;
    ensure(traces.len() == expected.len(), format!("{} traces for {} fixtures", traces.len(), expected.len()))?;
    ensure(expected.len() >= 12, "fewer than 12 fixtures")?;
    let mut rules = std::collections::BTreeSet::new();
    let mut edges = std::collections::BTreeSet::new();
    for tr in traces {
        let id = tr["task_id"].as_str().ok_or("trace without id")?;
        let want = expected.get(id).ok_or(format!("unexpected {id}"))?;
        for (got_key, want_key) in [("category", "category"), ("fired_rule", "rule"), ("edge_cases_applied", "edge_cases")] {
            ensure(
                tr[got_key] == want[want_key],
                format!("{id}: {got_key} {} != {}", tr[got_key], want[want_key]),
            )?;
        }
        rules.insert(tr["fired_rule"].as_str().unwrap_or_default().to_string());
        for e in tr["edge_cases_applied"].as_array().into_iter().flatten() {
            edges.insert(e.as_str().unwrap_or_default().to_string());
        }
    }
    for r in ["P1", "P2", "P3a", "P3b", "P4", "P5", "P6", "P7", "P8", "P9"] {
        ensure(rules.contains(r), format!("no fixture fires {r}"))?;
    }
    for e in ["iteration-context", "execution-order", "priority-override"] {
        ensure(edges.contains(e), format!("no fixture exercises {e}"))?;
    }
    within(t, Duration::from_secs(1))?;
    Ok(format!("{} fixtures, P1-P9 and 3 edge cases exact", expected.len()))
}

fn random_results(rng: &mut ChaCha8Rng, n: usize) -> Vec<TaskResult> {
    (0..n)
        .map(|i| {
            let id: TaskId = format!("{i:08x}").parse().unwrap();
            // coarse grid so values land on thresholds
            let cell = f64::from(rng.gen_range(0..=100u32)) / 100.0;
            let grid = if rng.gen_bool(0.4) { 0.0 } else { f64::from(rng.gen_range(0..=50u32)) / 100.0 };
            TaskResult::new(id, cell, grid)
        })
        .collect()
}

fn gap_oracle() -> Outcome {
    let t = Instant::now();
    let check = || -> Check {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6a9);
        let (cells, grids) = (default_cell_axis(), default_grid_axis());
        for _ in 0..100 {
            let n = rng.gen_range(1..=1000);
            let results = random_results(&mut rng, n);
            let g = compositional_gap(&results, GapThresholds::REFERENCE).map_err(|e| e.to_string())?;
            let naive: Vec<TaskId> = results
                .iter()
                .filter(|r| r.cell_acc > 0.80 && r.grid_acc < 0.10)
                .map(|r| r.task_id)
                .collect();
            ensure(g.gap_task_ids == naive && g.n_total == n as u64, "gap differs from brute force")?;
            let s = sensitivity(&results, &cells, &grids).map_err(|e| e.to_string())?;
            for i in 0..cells.len() {
                for j in 0..grids.len() {
                    if i + 1 < cells.len() {
                        ensure(s.counts[i + 1][j] <= s.counts[i][j], "not monotone in the cell threshold")?;
                    }
                    if j + 1 < grids.len() {
                        ensure(s.counts[i][j + 1] >= s.counts[i][j], "not monotone in the grid threshold")?;
                    }
                }
            }
        }
        within(t, Duration::from_secs(5))?;
        Ok("100 random sets match brute force; 6x11 grid monotone".into())
    };
    let props = match check() {
        Ok(m) => m,
        Err(m) => return Outcome::Fail(m),
    };
    let Some(path) = std::env::var_os("ARCTAX_RESULTS") else {
        return Outcome::Pass(format!("{props}; 210/302 and 43/66 not checked (set ARCTAX_RESULTS)"));
    };
    let mut cfg = RunConfig::new(Command::Gap);
    cfg.results = Some(PathBuf::from(path));
    let gap = match run(&cfg) {
        Ok(b) => b,
        Err(e) => return Outcome::Fail(e),
    };
    cfg.command = Command::Sensitivity;
    let sens = match run(&cfg) {
        Ok(b) => b,
        Err(e) => return Outcome::Fail(e),
    };
    let (n_gap, n_total, majority) = (&gap.payload["n_gap"], &gap.payload["n_total"], &sens.payload["majority_pairs"]);
    if *n_gap == 210 && *n_total == 302 && *majority == 43 {
        Outcome::Pass(format!("{props}; 210/302 = 69.5% and 43 of 66 reproduced"))
    } else {
        Outcome::Fail(format!("supplied results give {n_gap}/{n_total}, majority at {majority} pairs"))
    }
}

fn stats_oracles() -> Check {
    let t = Instant::now();
    // exhaustive tie-free splits with n_a + n_b <= 10
    let mut splits = 0;
    for n in 2..=10usize {
        let mut u_counts: BTreeMap<usize, BTreeMap<u64, u64>> = BTreeMap::new();
        let masks: Vec<u32> = (1..(1u32 << n) - 1).collect();
        let u_of = |mask: u32| -> (usize, u64) {
            // pairs (a, b) with a < b, counted directly
            let a: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let b: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
            let u = a.iter().map(|&x| b.iter().filter(|&&y| x > y).count() as u64).sum();
            (a.len(), u)
        };
        for &m in &masks {
            let (n_a, u) = u_of(m);
            *u_counts.entry(n_a).or_default().entry(u).or_default() += 1;
        }
        for &m in &masks {
            let (n_a, u) = u_of(m);
            let n_b = n - n_a;
            let u_min = u.min((n_a * n_b) as u64 - u);
            let dist = &u_counts[&n_a];
            let total: u64 = dist.values().sum();
            let at_most = |k: u64| dist.range(..=k).map(|(_, c)| c).sum::<u64>();
            let oracle = (2.0 * at_most(u_min) as f64 / total as f64).min(1.0);
            let a: Vec<f64> = (0..n).filter(|i| m >> i & 1 == 1).map(|i| i as f64).collect();
            let b: Vec<f64> = (0..n).filter(|i| m >> i & 1 == 0).map(|i| i as f64).collect();
            let r = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
            ensure(r.method == "exact", "not exact")?;
            ensure(r.statistic == u_min as f64, format!("U {} != {u_min}", r.statistic))?;
            ensure((r.p_value - oracle).abs() < 1e-12, format!("p {} != {oracle}", r.p_value))?;
            splits += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5ea);
    for _ in 0..1000 {
        let n = rng.gen_range(3..40);
        let xs: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..12u32))).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let Some(oracle) = rank_then_pearson(&xs, &ys) else {
            continue;
        };
        let r = spearman(&xs, &ys).map_err(|e| e.to_string())?;
        ensure((r.statistic - oracle).abs() < 1e-12, format!("rho {} != {oracle}", r.statistic))?;
    }

    let d = cohens_d(&[2.0, 4.0], &[1.0, 3.0]).map_err(|e| e.to_string())?;
    ensure((d - 0.7071).abs() < 1e-4, format!("d = {d}"))?;
    let q = t_quantile(0.975, 4.0).map_err(|e| e.to_string())?;
    ensure((q - 2.7764).abs() < 1e-3, format!("t = {q}"))?;
    within(t, Duration::from_secs(10))?;
    Ok(format!("{splits} exact splits, 1000 spearman cases, d = {d:.4}, t = {q:.4}"))
}

/// Average ranks by counting, then the textbook Pearson formula.
fn rank_then_pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&x| {
                let below = v.iter().filter(|&&y| y < x).count() as f64;
                let equal = v.iter().filter(|&&y| y == x).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn seed_aggregation() -> Check {
    let t = Instant::now();
    let s = aggregate_seeds(&[0.00279, 0.00279, 0.00279, 0.00279, 0.00559], 0.95).map_err(|e| e.to_string())?;
    // the inputs average to exactly 0.335%, on the tolerance edge; allow float noise
    let diff_pp = (s.mean * 100.0 - 0.34).abs();
    ensure(diff_pp <= 0.005 + 1e-12, format!("mean {}% off by {diff_pp}pp", s.mean * 100.0))?;
    let z = aggregate_seeds(&[0.01; 5], 0.95).map_err(|e| e.to_string())?;
    ensure(z.ci_low == z.mean && z.ci_high == z.mean, "constant seeds give a nonzero-width interval")?;
    within(t, Duration::from_secs(1))?;
    Ok(format!("mean {:.3}%, constant input gives zero width", s.mean * 100.0))
}

fn failure_concentration() -> Check {
    let t = Instant::now();
    let mut cfg = RunConfig::new(Command::Failures);
    cfg.ood_results = Some(fixture("ood_results.json"));
    let b = run(&cfg)?;
    let c = &b.payload["concentration"];
    ensure(c["n_failures"] == 118 && c["n_failures_low"] == 81, format!("{c}"))?;
    ensure(b.markdown.contains("81/118 = 68.6%"), "68.6% not printed")?;
    within(t, Duration::from_secs(1))?;
    Ok("81/118 = 68.6%".into())
}

fn determinism() -> Check {
    let t = Instant::now();
    let mut cfg = RunConfig::new(Command::Report);
    cfg.input = Some(fixture("rule_fixtures.py"));
    cfg.results = Some(fixture("results.json"));
    cfg.ood_results = Some(fixture("ood_results.json"));
    cfg.subgroups = Some(fixture("subgroups.json"));
    cfg.solve_rates = Some(fixture("solve_rates.csv"));
    let first = run(&cfg)?;
    let second = run(&cfg)?;
    let (p1, p2) = (payload_json(&first), payload_json(&second));
    ensure(p1 == p2, "payloads differ")?;
    ensure(first.markdown == second.markdown, "markdown differs")?;
    within(t, Duration::from_secs(20))?;
    Ok(format!("two report runs, {} payload bytes identical", p1.len()))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("distribution fidelity", Box::new(|| wrap(distribution_fidelity()))),
        ("curriculum bias", Box::new(|| wrap(curriculum_bias()))),
        ("classifier agreement", Box::new(classifier_agreement)),
        ("rule fixtures", Box::new(|| wrap(rule_fidelity()))),
        ("gap oracle", Box::new(gap_oracle)),
        ("statistics oracles", Box::new(|| wrap(stats_oracles()))),
        ("seed aggregation", Box::new(|| wrap(seed_aggregation()))),
        ("failure concentration", Box::new(|| wrap(failure_concentration()))),
        ("determinism", Box::new(|| wrap(determinism()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (tag, msg) = match check() {
            Outcome::Pass(m) => ("PASS", m),
            Outcome::Fail(m) => {
                failed += 1;
                ("FAIL", m)
            }
            Outcome::Skip(m) => ("SKIP", m),
        };
        println!("criterion {} {name}: {tag} - {msg}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}

fn wrap(c: Check) -> Outcome {
    match c {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}
