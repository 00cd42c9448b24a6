//! Evidence extraction from generator bodies.
//!
//! A body is lexed once into retained lines (non-blank after comments and
//! string literals are removed). The transformation window is the last
//! [`WINDOW_SIZE`] retained lines strictly before the first return at the
//! body's outermost indentation. Primitive hits, go-assignments, loop
//! headers and set-operator lines are recorded with their body line index.

mod lexer;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{is_return_line, GeneratorUnit};
use crate::model::TaskId;
use lexer::{call_names, has_infix_set_operator, is_go_assignment, leading_ident, strip_line, LexState};

pub const WINDOW_SIZE: usize = 15;

/// Primitives that reflect, rotate, transpose or concatenate a grid.
pub const GEOMETRIC_OPS: [&str; 11] = [
    "hmirror", "vmirror", "dmirror", "cmirror", "mirror", "rot90", "rot180", "rot270", "transpose",
    "hconcat", "vconcat",
];

const SET_CONTEXT_CALLS: [&str; 6] = ["set", "frozenset", "intersection", "union", "difference", "merge"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScanError {
    #[error("task {0}: generator body has no return statement")]
    NoReturn(TaskId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowLine {
    pub line_index: usize,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TransformationWindow {
    pub lines: Vec<WindowLine>,
}

impl TransformationWindow {
    pub fn contains(&self, line_index: usize) -> bool {
        self.lines.iter().any(|l| l.line_index == line_index)
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrimitiveHit {
    pub name: String,
    pub line_index: usize,
    pub in_window: bool,
    pub in_go_assignment: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopHeader {
    pub line_index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanReport {
    pub task_id: TaskId,
    pub window: TransformationWindow,
    pub hits: Vec<PrimitiveHit>,
    pub go_lines: Vec<usize>,
    pub while_headers: Vec<LoopHeader>,
    /// `for` headers iterating over a `range(...)`.
    pub for_range_headers: Vec<LoopHeader>,
    pub setop_lines: Vec<usize>,
    pub has_asobject_before_geometric: bool,
}

impl ScanReport {
    /// A report with no evidence at all.
    pub fn empty(task_id: TaskId) -> Self {
        ScanReport {
            task_id,
            window: TransformationWindow::default(),
            hits: Vec::new(),
            go_lines: Vec::new(),
            while_headers: Vec::new(),
            for_range_headers: Vec::new(),
            setop_lines: Vec::new(),
            has_asobject_before_geometric: false,
        }
    }

    pub fn window_hits(&self) -> impl Iterator<Item = &PrimitiveHit> {
        self.hits.iter().filter(|h| h.in_window)
    }

    /// Lines of in-window hits whose name is in `names`, ascending and deduplicated.
    pub fn window_hit_lines(&self, names: &[&str]) -> Vec<usize> {
        let mut lines: Vec<usize> = self
            .window_hits()
            .filter(|h| names.contains(&h.name.as_str()))
            .map(|h| h.line_index)
            .collect();
        lines.dedup();
        lines
    }

    pub fn body_hit_lines(&self, names: &[&str]) -> Vec<usize> {
        let mut lines: Vec<usize> = self
            .hits
            .iter()
            .filter(|h| names.contains(&h.name.as_str()))
            .map(|h| h.line_index)
            .collect();
        lines.dedup();
        lines
    }

    pub fn window_go_lines(&self) -> Vec<usize> {
        self.go_lines
            .iter()
            .copied()
            .filter(|&i| self.window.contains(i))
            .collect()
    }

    /// Distinct call names on one line.
    pub fn calls_on_line(&self, line_index: usize) -> std::collections::BTreeSet<&str> {
        self.hits
            .iter()
            .filter(|h| h.line_index == line_index)
            .map(|h| h.name.as_str())
            .collect()
    }
}

struct Retained {
    index: usize,
    indent: usize,
    code: String,
}

fn retained_lines(unit: &GeneratorUnit) -> Vec<Retained> {
    let mut state = LexState::default();
    unit.source_lines
        .iter()
        .enumerate()
        .filter_map(|(index, line)| {
            let code = strip_line(&mut state, line);
            (!code.trim().is_empty()).then(|| Retained {
                index,
                indent: code.len() - code.trim_start().len(),
                code,
            })
        })
        .collect()
}

/// Position (into `retained`) of the return that terminates the window.
fn terminating_return(retained: &[Retained]) -> Option<usize> {
    let returns: Vec<usize> = (0..retained.len())
        .filter(|&k| is_return_line(&retained[k].code))
        .collect();
    let base = retained.iter().map(|r| r.indent).min()?;
    returns
        .iter()
        .copied()
        .find(|&k| retained[k].indent == base)
        .or_else(|| {
            // no return at the outermost level: fall back to the shallowest one
            let shallowest = returns.iter().map(|&k| retained[k].indent).min()?;
            returns.iter().copied().find(|&k| retained[k].indent == shallowest)
        })
}

fn window_from(unit: &GeneratorUnit, retained: &[Retained]) -> Result<TransformationWindow, ScanError> {
    let end = terminating_return(retained).ok_or(ScanError::NoReturn(unit.task_id))?;
    let start = end.saturating_sub(WINDOW_SIZE);
    Ok(TransformationWindow {
        lines: retained[start..end]
            .iter()
            .map(|r| WindowLine {
                line_index: r.index,
                text: unit.source_lines[r.index].clone(),
            })
            .collect(),
    })
}

pub fn extract_window(unit: &GeneratorUnit) -> Result<TransformationWindow, ScanError> {
    window_from(unit, &retained_lines(unit))
}

fn header_after<'a>(code: &'a str, keyword: &str) -> Option<&'a str> {
    match leading_ident(code) {
        Some((kw, rest)) if kw == keyword => Some(rest),
        _ => None,
    }
}

pub fn scan(unit: &GeneratorUnit) -> Result<ScanReport, ScanError> {
    let retained = retained_lines(unit);
    let window = window_from(unit, &retained)?;
    let mut report = ScanReport::empty(unit.task_id);

    for r in &retained {
        let in_window = window.contains(r.index);
        let go = is_go_assignment(&r.code);
        if go {
            report.go_lines.push(r.index);
        }
        let names = call_names(&r.code);
        if has_infix_set_operator(&r.code) && names.iter().any(|n| SET_CONTEXT_CALLS.contains(&n.as_str())) {
            report.setop_lines.push(r.index);
        }
        if header_after(&r.code, "while").is_some() {
            report.while_headers.push(LoopHeader {
                line_index: r.index,
                text: unit.source_lines[r.index].trim().to_string(),
            });
        }
        if header_after(&r.code, "for").is_some() && names.iter().any(|n| n == "range") {
            report.for_range_headers.push(LoopHeader {
                line_index: r.index,
                text: unit.source_lines[r.index].trim().to_string(),
            });
        }
        report.hits.extend(names.into_iter().map(|name| PrimitiveHit {
            name,
            line_index: r.index,
            in_window,
            in_go_assignment: go,
        }));
    }

    let first_geometric = report
        .hits
        .iter()
        .find(|h| GEOMETRIC_OPS.contains(&h.name.as_str()))
        .map(|h| h.line_index);
    let first_asobject = report.hits.iter().find(|h| h.name == "asobject").map(|h| h.line_index);
    report.has_asobject_before_geometric = matches!(
        (first_asobject, first_geometric),
        (Some(a), Some(g)) if a < g
    );
    report.window = window;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(body: &str) -> GeneratorUnit {
        GeneratorUnit::from_body("007bbfb7".parse().unwrap(), body)
    }

    fn numbered_body(n: usize) -> String {
        let mut s = String::new();
        for k in 1..=n {
            s.push_str(&format!("    v{k} = step(v{})\n", k - 1));
        }
        s.push_str("    return {'input': gi, 'output': go}\n");
        s
    }

    #[test]
    fn window_keeps_last_fifteen_retained_lines() {
        let w = extract_window(&unit(&numbered_body(20))).unwrap();
        assert_eq!(w.len(), 15);
        // retained lines 6..=20 are body indices 5..=19
        assert_eq!(w.lines.first().unwrap().line_index, 5);
        assert_eq!(w.lines.last().unwrap().line_index, 19);
        assert_eq!(w.lines[0].text, "    v6 = step(v5)");
    }

    #[test]
    fn short_bodies_give_short_windows() {
        let w = extract_window(&unit(&numbered_body(4))).unwrap();
        assert_eq!(w.len(), 4);
    }

    #[test]
    fn blank_and_comment_lines_do_not_count() {
        let mut body = String::new();
        for k in 0..20 {
            body.push_str(&format!("    a{k} = f(x)\n\n    # note {k}\n"));
        }
        body.push_str("    go = paint(go, box(obj))\n    return go\n");
        let u = unit(&body);
        let w = extract_window(&u).unwrap();
        assert_eq!(w.len(), 15);
        let go_idx = u.source_lines.iter().position(|l| l.contains("box(obj)")).unwrap();
        assert!(w.contains(go_idx));
        assert!(w.lines.iter().all(|l| !l.text.trim().is_empty() && !l.text.trim().starts_with('#')));
    }

    #[test]
    fn nested_returns_do_not_end_the_window() {
        let body = "\
    while True:
        if done:
            return None
        x = g(x)
    go = fill(go, 1, x)
    return go
";
        let w = extract_window(&unit(body)).unwrap();
        assert_eq!(w.lines.iter().map(|l| l.line_index).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn missing_return_is_an_error() {
        let u = unit("    go = fill(go, 1, x)\n");
        assert!(matches!(extract_window(&u), Err(ScanError::NoReturn(_))));
        assert!(scan(&u).is_err());
    }

    #[test]
    fn fill_on_go_line_is_flagged() {
        let r = scan(&unit("    go = fill(go, c, ixs)\n    return go\n")).unwrap();
        assert_eq!(r.go_lines, vec![0]);
        assert_eq!(
            r.hits,
            vec![PrimitiveHit {
                name: "fill".into(),
                line_index: 0,
                in_window: true,
                in_go_assignment: true
            }]
        );
    }

    #[test]
    fn while_headers_and_issubset_are_recorded() {
        let body = "\
    succ = 0
    while succ < k:
        if cands.issubset(inds):
            succ += 1
    return go
";
        let r = scan(&unit(body)).unwrap();
        assert_eq!(r.while_headers.len(), 1);
        assert_eq!(r.while_headers[0].text, "while succ < k:");
        assert_eq!(r.while_headers[0].line_index, 1);
        assert!(r.hits.iter().any(|h| h.name == "issubset" && h.line_index == 2));
    }

    #[test]
    fn asobject_ordering_uses_body_indices() {
        let body = "\
    a = 1
    b = 2
    obj = asobject(g)
    c = 3
    d = 4
    e = 5
    f = 6
    go = hmirror(go)
    return go
";
        let r = scan(&unit(body)).unwrap();
        assert!(r.has_asobject_before_geometric);

        let body = "    go = hmirror(go)\n    obj = asobject(go)\n    return go\n";
        assert!(!scan(&unit(body)).unwrap().has_asobject_before_geometric);
        let body = "    obj = asobject(go)\n    return go\n";
        assert!(!scan(&unit(body)).unwrap().has_asobject_before_geometric);
    }

    #[test]
    fn set_lines_need_a_set_context() {
        let body = "\
    a = set(x) & set(y)
    b = h - 1
    c = merge(p) | q
    d = frozenset(z) - w
    return go
";
        let r = scan(&unit(body)).unwrap();
        assert_eq!(r.setop_lines, vec![0, 2, 3]);
    }

    #[test]
    fn for_range_headers() {
        let body = "    for k in range(n):\n        go = paint(go, obj)\n    for o in objs:\n        x = 1\n    return go\n";
        let r = scan(&unit(body)).unwrap();
        assert_eq!(r.for_range_headers.len(), 1);
        assert_eq!(r.for_range_headers[0].line_index, 0);
    }

    #[test]
    fn primitives_inside_strings_are_ignored() {
        let r = scan(&unit("    x = 'box(go)'\n    return {'output': crop(go)}\n")).unwrap();
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].name, "crop");
        assert!(!r.hits[0].in_window);
    }
}
