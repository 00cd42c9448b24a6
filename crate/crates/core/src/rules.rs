//! Priority-ordered classification of scan reports into categories.
//!
//! Rules are tested in ascending priority; the first match decides. Primitive
//! hits are taken from the transformation window, while loop headers and the
//! asobject ordering flag cover the whole body.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::ingest::GeneratorUnit;
use crate::model::{Category, TaskId};
use crate::scan::{scan, ScanReport};

pub const TOPOLOGICAL_OPS: [&str; 5] = ["shoot", "connect", "frontiers", "neighbors", "box"];
pub const SCALING_OPS: [&str; 3] = ["upscale", "downscale", "crop"];
pub const CONCAT_OPS: [&str; 2] = ["hconcat", "vconcat"];
pub const MIRROR_ROTATE_OPS: [&str; 9] = [
    "hmirror", "vmirror", "dmirror", "cmirror", "mirror", "rot90", "rot180", "rot270", "transpose",
];
pub const COLOR_OPS: [&str; 3] = ["colorfilter", "recolor", "palette"];

pub const EDGE_ITERATION_CONTEXT: &str = "iteration-context";
pub const EDGE_EXECUTION_ORDER: &str = "execution-order";
pub const EDGE_PRIORITY_OVERRIDE: &str = "priority-override";
pub const EDGE_SUBGRID_CROP: &str = "subgrid-as-crop";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    P1,
    P2,
    P3a,
    P3b,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
    None,
}

impl RuleId {
    /// Every real rule in priority order.
    pub const ORDER: [RuleId; 10] = [
        RuleId::P1,
        RuleId::P2,
        RuleId::P3a,
        RuleId::P3b,
        RuleId::P4,
        RuleId::P5,
        RuleId::P6,
        RuleId::P7,
        RuleId::P8,
        RuleId::P9,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RuleId::P1 => "P1",
            RuleId::P2 => "P2",
            RuleId::P3a => "P3a",
            RuleId::P3b => "P3b",
            RuleId::P4 => "P4",
            RuleId::P5 => "P5",
            RuleId::P6 => "P6",
            RuleId::P7 => "P7",
            RuleId::P8 => "P8",
            RuleId::P9 => "P9",
            RuleId::None => "none",
        }
    }

    /// Category a rule yields before the asobject ordering exception.
    pub fn base_category(self) -> Category {
        match self {
            RuleId::P1 | RuleId::P5 => Category::S3,
            RuleId::P2 | RuleId::P9 => Category::C1,
            RuleId::P3a => Category::A1,
            RuleId::P3b => Category::A2,
            RuleId::P4 => Category::L1,
            RuleId::P6 => Category::K1,
            RuleId::P7 => Category::S2,
            RuleId::P8 => Category::S1,
            RuleId::None => Category::Ambiguous,
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for RuleId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleEvidence {
    pub rule: RuleId,
    pub matched: bool,
    pub witness_lines: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassificationTrace {
    pub task_id: TaskId,
    pub category: Category,
    pub fired_rule: RuleId,
    pub evidence: Vec<RuleEvidence>,
    pub edge_cases_applied: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassifierConfig {
    /// Treat `subgrid(` as a cropping primitive for the scaling rule.
    pub crop_includes_subgrid: bool,
}

fn sorted_dedup(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Tests one rule against a report; returns the witness lines when it matches.
pub fn evaluate_rule(rule: RuleId, report: &ScanReport, config: &ClassifierConfig) -> Option<Vec<usize>> {
    let nonempty = |v: Vec<usize>| (!v.is_empty()).then(|| sorted_dedup(v));
    match rule {
        RuleId::P1 => nonempty(
            report
                .window_hits()
                .filter(|h| h.name == "box" && h.in_go_assignment)
                .map(|h| h.line_index)
                .collect(),
        ),
        RuleId::P2 => {
            let go_lines = report.window_go_lines();
            if go_lines.is_empty() || !report.window_hit_lines(&TOPOLOGICAL_OPS).is_empty() {
                return None;
            }
            go_lines
                .iter()
                .all(|&i| report.calls_on_line(i).into_iter().eq(["fill"]))
                .then_some(go_lines)
        }
        RuleId::P3a => nonempty(
            report
                .while_headers
                .iter()
                .filter(|h| h.text.starts_with("while len(") || h.text.starts_with("while frontiers"))
                .map(|h| h.line_index)
                .collect(),
        ),
        RuleId::P3b => {
            let headers: Vec<usize> = report
                .while_headers
                .iter()
                .filter(|h| h.text.starts_with("while succ <"))
                .map(|h| h.line_index)
                .collect();
            let subset = report.body_hit_lines(&["issubset"]);
            (!headers.is_empty() && !subset.is_empty()).then(|| sorted_dedup([headers, subset].concat()))
        }
        RuleId::P4 => {
            let setops = report
                .setop_lines
                .iter()
                .copied()
                .filter(|&i| report.window.contains(i));
            nonempty(setops.chain(report.window_hit_lines(&["merge"])).collect())
        }
        RuleId::P5 => nonempty(report.window_hit_lines(&TOPOLOGICAL_OPS[..4])),
        RuleId::P6 => {
            let mut lines = report.window_hit_lines(&SCALING_OPS);
            if config.crop_includes_subgrid {
                lines.extend(report.window_hit_lines(&["subgrid"]));
            }
            nonempty(lines)
        }
        RuleId::P7 => {
            let mut lines = report.window_hit_lines(&CONCAT_OPS);
            let loops: Vec<usize> = report
                .for_range_headers
                .iter()
                .map(|h| h.line_index)
                .filter(|&i| report.window.contains(i))
                .collect();
            let paints = report.window_hit_lines(&["paint"]);
            if !loops.is_empty() && !paints.is_empty() {
                lines.extend(loops);
                lines.extend(paints);
            }
            nonempty(lines)
        }
        RuleId::P8 => nonempty(report.window_hit_lines(&MIRROR_ROTATE_OPS)),
        RuleId::P9 => nonempty(report.window_hit_lines(&COLOR_OPS)),
        RuleId::None => None,
    }
}

pub fn classify(report: &ScanReport) -> ClassificationTrace {
    classify_with(report, &ClassifierConfig::default())
}

pub fn classify_with(report: &ScanReport, config: &ClassifierConfig) -> ClassificationTrace {
    let mut evidence = Vec::new();
    let mut fired = RuleId::None;
    for rule in RuleId::ORDER {
        let witness = evaluate_rule(rule, report, config);
        let matched = witness.is_some();
        evidence.push(RuleEvidence {
            rule,
            matched,
            witness_lines: witness.unwrap_or_default(),
        });
        if matched {
            fired = rule;
            break;
        }
    }

    let mut category = fired.base_category();
    let mut edge_cases = Vec::new();
    match fired {
        RuleId::P1 => {
            if evaluate_rule(RuleId::P3b, report, config).is_some() {
                edge_cases.push(EDGE_PRIORITY_OVERRIDE.to_string());
            }
        }
        RuleId::P2 => {
            if !report.while_headers.is_empty() {
                edge_cases.push(EDGE_ITERATION_CONTEXT.to_string());
            }
        }
        RuleId::P6 if config.crop_includes_subgrid => {
            let plain = ClassifierConfig {
                crop_includes_subgrid: false,
            };
            if evaluate_rule(RuleId::P6, report, &plain).is_none() {
                edge_cases.push(EDGE_SUBGRID_CROP.to_string());
            }
        }
        RuleId::P7 | RuleId::P8 if report.has_asobject_before_geometric => {
            category = Category::C2;
            edge_cases.push(EDGE_EXECUTION_ORDER.to_string());
        }
        _ => {}
    }

    ClassificationTrace {
        task_id: report.task_id,
        category,
        fired_rule: fired,
        evidence,
        edge_cases_applied: edge_cases,
        error: None,
    }
}

/// Scans and classifies one unit. Units without a usable window come back
/// as Ambiguous with the error recorded.
pub fn classify_unit(unit: &GeneratorUnit, config: &ClassifierConfig) -> ClassificationTrace {
    match scan(unit) {
        Ok(report) => classify_with(&report, config),
        Err(e) => ClassificationTrace {
            task_id: unit.task_id,
            category: Category::Ambiguous,
            fired_rule: RuleId::None,
            evidence: Vec::new(),
            edge_cases_applied: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

pub fn classify_corpus<'a>(
    units: impl IntoIterator<Item = &'a GeneratorUnit>,
    config: &ClassifierConfig,
) -> BTreeMap<TaskId, ClassificationTrace> {
    units
        .into_iter()
        .map(|u| (u.task_id, classify_unit(u, config)))
        .collect()
}

#[derive(Serialize)]
struct TraceRow<'a> {
    task_id: TaskId,
    category: Category,
    fired_rule: RuleId,
    edge_cases_applied: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

/// Trace export: a JSON array of `{task_id, category, fired_rule, edge_cases_applied}`.
pub fn traces_to_json<'a>(traces: impl IntoIterator<Item = &'a ClassificationTrace>) -> serde_json::Value {
    let rows: Vec<TraceRow> = traces
        .into_iter()
        .map(|t| TraceRow {
            task_id: t.task_id,
            category: t.category,
            fired_rule: t.fired_rule,
            edge_cases_applied: &t.edge_cases_applied,
            error: t.error.as_deref(),
        })
        .collect();
    serde_json::to_value(rows).expect("trace rows serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(body: &str) -> ClassificationTrace {
        let unit = GeneratorUnit::from_body("00000001".parse().unwrap(), body);
        classify(&scan(&unit).unwrap())
    }

    #[test]
    fn box_on_go_line_is_topology() {
        let t = run("    obj = f(x)\n    go = paint(go, box(obj))\n    return go\n");
        assert_eq!((t.category, t.fired_rule), (Category::S3, RuleId::P1));
        assert_eq!(t.evidence.len(), 1);
        assert_eq!(t.evidence[0].witness_lines, vec![1]);
    }

    #[test]
    fn fill_only_go_lines_with_setup_loop() {
        let body = "\
    while len(cands) > 0:
        cands = step(cands)
    go = fill(go, 2, ixs)
    go = fill(go, 3, other)
    return go
";
        let t = run(body);
        assert_eq!((t.category, t.fired_rule), (Category::C1, RuleId::P2));
        assert_eq!(t.edge_cases_applied, vec![EDGE_ITERATION_CONTEXT]);
        assert_eq!(t.evidence[1].witness_lines, vec![2, 3]);
    }

    #[test]
    fn fill_rule_is_blocked_by_topology_and_other_calls() {
        let t = run("    x = shoot(a, b)\n    go = fill(go, 2, x)\n    return go\n");
        assert_eq!((t.category, t.fired_rule), (Category::S3, RuleId::P5));
        let t = run("    go = fill(go, 2, x)\n    go = paint(go, obj)\n    return go\n");
        assert_eq!(t.fired_rule, RuleId::None);
        let t = run("    go = fill(paint(go, o), 2, x)\n    return go\n");
        assert_eq!(t.fired_rule, RuleId::None);
    }

    #[test]
    fn loops_select_iterative_and_packing() {
        let t = run("    while len(a) < 3:\n        a = g(a)\n    return go\n");
        assert_eq!((t.category, t.fired_rule), (Category::A1, RuleId::P3a));
        let t = run("    while frontiers(g):\n        g = h(g)\n    return go\n");
        assert_eq!(t.category, Category::A1);
        let body = "    succ = 0\n    while succ < num:\n        if s.issubset(inds):\n            succ += 1\n    return go\n";
        let t = run(body);
        assert_eq!((t.category, t.fired_rule), (Category::A2, RuleId::P3b));
        assert_eq!(t.evidence.last().unwrap().witness_lines, vec![1, 2]);
        let t = run("    while succ < num:\n        succ += 1\n    return go\n");
        assert_eq!(t.category, Category::Ambiguous);
    }

    #[test]
    fn box_beats_packing_loop() {
        let body = "    while succ < num:\n        ok = cand.issubset(inds)\n        succ += 1\n    go = paint(go, box(obj))\n    return go\n";
        let t = run(body);
        assert_eq!((t.category, t.fired_rule), (Category::S3, RuleId::P1));
        assert_eq!(t.edge_cases_applied, vec![EDGE_PRIORITY_OVERRIDE]);
    }

    #[test]
    fn remaining_rules_in_order() {
        let cases = [
            ("    x = set(a) & set(b)\n    return go\n", Category::L1, RuleId::P4),
            ("    x = merge(objs)\n    return go\n", Category::L1, RuleId::P4),
            ("    x = connect(a, b)\n    return go\n", Category::S3, RuleId::P5),
            ("    go = upscale(gi, 2)\n    return go\n", Category::K1, RuleId::P6),
            ("    go = hconcat(gi, gi)\n    return go\n", Category::S2, RuleId::P7),
            ("    for k in range(3):\n        go = paint(go, shift(o, k))\n    return go\n", Category::S2, RuleId::P7),
            ("    go = hmirror(gi)\n    return go\n", Category::S1, RuleId::P8),
            ("    go = rot90(gi)\n    return go\n", Category::S1, RuleId::P8),
            ("    go = recolor(2, obj)\n    return go\n", Category::C1, RuleId::P9),
            ("    x = 1\n    return go\n", Category::Ambiguous, RuleId::None),
        ];
        for (body, cat, rule) in cases {
            let t = run(body);
            assert_eq!((t.category, t.fired_rule), (cat, rule), "{body}");
        }
    }

    #[test]
    fn asobject_before_geometry_gives_color_pattern() {
        let body = "    a = 1\n    obj = asobject(g)\n    b = 2\n    c = 3\n    d = 4\n    go = hconcat(gi, gi)\n    return go\n";
        let t = run(body);
        assert_eq!((t.category, t.fired_rule), (Category::C2, RuleId::P7));
        assert_eq!(t.edge_cases_applied, vec![EDGE_EXECUTION_ORDER]);
        let t = run("    obj = asobject(g)\n    go = vmirror(gi)\n    return go\n");
        assert_eq!((t.category, t.fired_rule), (Category::C2, RuleId::P8));
        let t = run("    go = vmirror(gi)\n    obj = asobject(go)\n    return go\n");
        assert_eq!(t.category, Category::S1);
    }

    #[test]
    fn subgrid_only_counts_when_enabled() {
        let unit = GeneratorUnit::from_body("00000002".parse().unwrap(), "    go = subgrid(obj, gi)\n    return go\n");
        let report = scan(&unit).unwrap();
        assert_eq!(classify(&report).category, Category::Ambiguous);
        let cfg = ClassifierConfig {
            crop_includes_subgrid: true,
        };
        let t = classify_with(&report, &cfg);
        assert_eq!((t.category, t.fired_rule), (Category::K1, RuleId::P6));
        assert_eq!(t.edge_cases_applied, vec![EDGE_SUBGRID_CROP]);
    }

    #[test]
    fn hits_outside_the_window_are_ignored() {
        let mut body = String::from("    go = hmirror(gi)\n");
        for k in 0..15 {
            body.push_str(&format!("    v{k} = {k}\n"));
        }
        body.push_str("    return go\n");
        assert_eq!(run(&body).category, Category::Ambiguous);
    }

    #[test]
    fn invalid_units_become_ambiguous_with_error() {
        let unit = GeneratorUnit::from_body("00000003".parse().unwrap(), "    go = hmirror(gi)\n");
        let t = classify_unit(&unit, &ClassifierConfig::default());
        assert_eq!(t.category, Category::Ambiguous);
        assert_eq!(t.fired_rule, RuleId::None);
        assert!(t.error.is_some());
    }

    #[test]
    fn json_export_shape() {
        let t = run("    go = hmirror(gi)\n    return go\n");
        let v = traces_to_json([&t]);
        assert_eq!(
            v,
            serde_json::json!([{"task_id": "00000001", "category": "S1", "fired_rule": "P8", "edge_cases_applied": []}])
        );
    }
}
