//! Loading and validation of the three input corpora: generator source,
//! the task-to-category mapping, and experiment results (plus external
//! solve rates).
//!
//! Every loader reads strict UTF-8 and reports failures with the file path
//! and a line, record index or key locating the offending input.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer};
use thiserror::Error;

use crate::model::{Category, ModelError, SolveRateRecord, TaskId, TaskResult};

/// Task-to-category ground truth, ordered by task id.
pub type Mapping = BTreeMap<TaskId, Category>;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: invalid UTF-8 at byte offset {offset}", path.display())]
    Utf8 { path: PathBuf, offset: usize },
    #[error("{}: {source}", path.display())]
    Invalid {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate task id {0}")]
    DuplicateTaskId(String),
    #[error("{location}: {source}")]
    Model {
        location: String,
        #[source]
        source: ModelError,
    },
    #[error("{location}: {field} = {value} is outside [0, 1]")]
    OutOfRange {
        location: String,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep the bare message.
        let message = match message.rfind(" at line ") {
            Some(pos) => message[..pos].to_string(),
            None => message,
        };
        ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

/// Reads a whole file as UTF-8, reporting the path on failure.
pub fn read_utf8(path: &Path) -> Result<String, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| IngestError::Utf8 {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

/// Attaches `path` to a parse failure.
pub fn located<T>(path: &Path, result: Result<T, ParseError>) -> Result<T, IngestError> {
    result.map_err(|source| IngestError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Generator corpus
// ---------------------------------------------------------------------------

/// Body of one generator function, captured verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorUnit {
    pub task_id: TaskId,
    pub function_name: String,
    /// 1-based line of the `def` in the source file (0 when built in memory).
    pub def_line: usize,
    pub source_lines: Vec<String>,
}

impl GeneratorUnit {
    pub fn new(task_id: TaskId, source_lines: Vec<String>) -> Self {
        GeneratorUnit {
            task_id,
            function_name: format!("generate_{task_id}"),
            def_line: 0,
            source_lines,
        }
    }

    /// Builds a unit from a body snippet, one source line per text line.
    pub fn from_body(task_id: TaskId, body: &str) -> Self {
        Self::new(task_id, body.lines().map(str::to_string).collect())
    }

    pub fn has_return(&self) -> bool {
        self.source_lines.iter().any(|l| is_return_line(l))
    }

    /// A unit is valid when its body is non-empty and contains a return.
    pub fn is_valid(&self) -> bool {
        !self.source_lines.is_empty() && self.has_return()
    }
}

pub(crate) fn is_return_line(line: &str) -> bool {
    let t = line.trim_start();
    match t.strip_prefix("return") {
        Some(rest) => rest
            .chars()
            .next()
            .is_none_or(|c| !(c.is_ascii_alphanumeric() || c == '_')),
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    NoTaskId,
    DuplicateTaskId(TaskId),
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::NoTaskId => f.write_str("no 8-hex-character task id in function name"),
            SkipReason::DuplicateTaskId(id) => write!(f, "duplicate task id {id}"),
        }
    }
}

/// A function definition that did not become a [`GeneratorUnit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFunction {
    pub name: String,
    pub line: usize,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeneratorCorpus {
    pub units: Vec<GeneratorUnit>,
    pub skipped: Vec<SkippedFunction>,
    /// Number of `def` statements seen; always `units.len() + skipped.len()`.
    pub function_count: usize,
    pub warnings: Vec<String>,
}

impl GeneratorCorpus {
    pub fn invalid_units(&self) -> impl Iterator<Item = &GeneratorUnit> {
        self.units.iter().filter(|u| !u.is_valid())
    }
}

pub fn load_generator_corpus(path: impl AsRef<Path>) -> Result<GeneratorCorpus, IngestError> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    Ok(parse_generator_corpus(&text))
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start().len()
}

/// Code part of a line with any trailing `#` comment removed. Quotes are
/// tracked so a `#` inside a string literal is kept.
fn strip_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match quote {
            Some(q) => {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None => match c {
                '#' => return &line[..i],
                '\'' | '"' => quote = Some(c),
                _ => {}
            },
        }
    }
    line
}

fn is_blank_or_comment(line: &str) -> bool {
    strip_comment(line).trim().is_empty()
}

/// Returns the function name if `line` opens a `def`.
fn parse_def(line: &str) -> Option<&str> {
    let rest = line.trim_start().strip_prefix("def")?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let rest = rest.trim_start();
    let end = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(rest.len());
    (end > 0 && rest[end..].trim_start().starts_with('(')).then(|| &rest[..end])
}

/// Extracts the task id from a function name: the last maximal run of
/// lowercase hex characters that is exactly eight long.
pub fn task_id_from_name(name: &str) -> Option<TaskId> {
    let is_hex = |b: u8| matches!(b, b'0'..=b'9' | b'a'..=b'f');
    let bytes = name.as_bytes();
    let mut found = None;
    let mut i = 0;
    while i < bytes.len() {
        if is_hex(bytes[i]) {
            let start = i;
            while i < bytes.len() && is_hex(bytes[i]) {
                i += 1;
            }
            if i - start == 8 {
                found = name[start..i].parse().ok();
            }
        } else {
            i += 1;
        }
    }
    found
}

/// Index of the line that closes a (possibly multi-line) `def` signature.
fn signature_end(lines: &[&str], def_idx: usize) -> usize {
    let mut depth: i64 = 0;
    for (k, line) in lines.iter().enumerate().skip(def_idx) {
        let code = strip_comment(line);
        for c in code.chars() {
            match c {
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => depth -= 1,
                _ => {}
            }
        }
        if depth <= 0 && code.trim_end().ends_with(':') {
            return k;
        }
    }
    def_idx
}

/// Splits source text into generator units. Function bodies are the
/// contiguous lines indented deeper than their `def` line; blank and
/// comment-only lines do not end a body.
pub fn parse_generator_corpus(text: &str) -> GeneratorCorpus {
    let lines: Vec<&str> = text.lines().collect();
    let mut corpus = GeneratorCorpus::default();
    let mut seen = std::collections::BTreeSet::new();
    let mut i = 0;
    while i < lines.len() {
        let Some(name) = parse_def(lines[i]) else {
            i += 1;
            continue;
        };
        let def_indent = indent_of(lines[i]);
        let sig_end = signature_end(&lines, i);
        let body_start = sig_end + 1;
        let mut last = sig_end;
        let mut k = body_start;
        while k < lines.len() {
            let l = lines[k];
            if is_blank_or_comment(l) {
                k += 1;
                continue;
            }
            if indent_of(l) > def_indent {
                last = k;
                k += 1;
            } else {
                break;
            }
        }
        corpus.function_count += 1;
        let def_line = i + 1;
        match task_id_from_name(name) {
            None => corpus.skipped.push(SkippedFunction {
                name: name.to_string(),
                line: def_line,
                reason: SkipReason::NoTaskId,
            }),
            Some(id) if !seen.insert(id) => corpus.skipped.push(SkippedFunction {
                name: name.to_string(),
                line: def_line,
                reason: SkipReason::DuplicateTaskId(id),
            }),
            Some(id) => {
                let body: Vec<String> = if last >= body_start {
                    lines[body_start..=last].iter().map(|s| s.to_string()).collect()
                } else {
                    Vec::new()
                };
                let unit = GeneratorUnit {
                    task_id: id,
                    function_name: name.to_string(),
                    def_line,
                    source_lines: body,
                };
                if !unit.is_valid() {
                    corpus
                        .warnings
                        .push(format!("line {def_line}: {name} has no return statement"));
                }
                corpus.units.push(unit);
            }
        }
        i = last + 1;
    }
    for s in &corpus.skipped {
        corpus
            .warnings
            .push(format!("line {}: skipped {}: {}", s.line, s.name, s.reason));
    }
    if corpus.function_count == 0 {
        corpus
            .warnings
            .push("corpus contains no function definitions".to_string());
    }
    corpus
}

// ---------------------------------------------------------------------------
// Mapping
// ---------------------------------------------------------------------------

/// JSON object entries in document order, duplicates preserved.
struct RawEntries(Vec<(String, String)>);

impl<'de> Deserialize<'de> for RawEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = RawEntries;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object of task id -> category code")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawEntries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, String>()? {
                    out.push((k, v));
                }
                Ok(RawEntries(out))
            }
        }
        deserializer.deserialize_map(EntriesVisitor)
    }
}

pub fn parse_mapping(text: &str) -> Result<Mapping, ParseError> {
    let RawEntries(entries) = serde_json::from_str(text)?;
    let mut mapping = Mapping::new();
    for (key, value) in entries {
        let id: TaskId = key.parse().map_err(|source| ParseError::Model {
            location: format!("key {key:?}"),
            source,
        })?;
        let category: Category = value.parse().map_err(|source| ParseError::Model {
            location: format!("task {key}"),
            source,
        })?;
        if mapping.insert(id, category).is_some() {
            return Err(ParseError::DuplicateTaskId(key));
        }
    }
    Ok(mapping)
}

pub fn load_mapping(path: impl AsRef<Path>) -> Result<Mapping, IngestError> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    located(path, parse_mapping(&text))
}

/// Serializes a mapping as a pretty JSON object with ids in ascending order.
pub fn mapping_to_json(mapping: &Mapping) -> String {
    let body: Vec<String> = mapping
        .iter()
        .map(|(id, c)| format!("  \"{id}\": \"{}\"", c.code()))
        .collect();
    if body.is_empty() {
        "{}\n".to_string()
    } else {
        format!("{{\n{}\n}}\n", body.join(",\n"))
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct RawResult {
    task_id: String,
    cell_acc: f64,
    grid_acc: f64,
    #[serde(default)]
    base_cell_acc: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    category: Option<String>,
}

fn check_fraction(location: &str, field: &'static str, value: f64) -> Result<f64, ParseError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ParseError::OutOfRange {
            location: location.to_string(),
            field,
            value,
        })
    }
}

pub fn parse_results(text: &str) -> Result<Vec<TaskResult>, ParseError> {
    let raw: Vec<RawResult> = serde_json::from_str(text)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let location = format!("record {i} (task {:?})", r.task_id);
            let task_id = r.task_id.parse().map_err(|source| ParseError::Model {
                location: location.clone(),
                source,
            })?;
            let category = r
                .category
                .map(|c| c.parse())
                .transpose()
                .map_err(|source| ParseError::Model {
                    location: location.clone(),
                    source,
                })?;
            Ok(TaskResult {
                task_id,
                cell_acc: check_fraction(&location, "cell_acc", r.cell_acc)?,
                grid_acc: check_fraction(&location, "grid_acc", r.grid_acc)?,
                base_cell_acc: r
                    .base_cell_acc
                    .map(|v| check_fraction(&location, "base_cell_acc", v))
                    .transpose()?,
                seed: r.seed,
                category,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct RawPrediction {
    task_id: String,
    category: String,
}

/// Reads exported classification traces (a JSON array of objects carrying at
/// least `task_id` and `category`) back into a prediction map.
pub fn parse_predictions(text: &str) -> Result<BTreeMap<TaskId, Category>, ParseError> {
    let raw: Vec<RawPrediction> = serde_json::from_str(text)?;
    let mut out = BTreeMap::new();
    for (i, r) in raw.into_iter().enumerate() {
        let location = format!("record {i} (task {:?})", r.task_id);
        let id: TaskId = r.task_id.parse().map_err(|source| ParseError::Model {
            location: location.clone(),
            source,
        })?;
        let category = r.category.parse().map_err(|source| ParseError::Model { location, source })?;
        if out.insert(id, category).is_some() {
            return Err(ParseError::DuplicateTaskId(r.task_id));
        }
    }
    Ok(out)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<TaskResult>, IngestError> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    located(path, parse_results(&text))
}

// ---------------------------------------------------------------------------
// Solve rates
// ---------------------------------------------------------------------------

pub fn parse_solve_rates(text: &str) -> Result<Vec<SolveRateRecord>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| ParseError::Row {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != ["task_id", "solve_rate"] {
        return Err(ParseError::Row {
            line: 1,
            message: format!("expected header \"task_id,solve_rate\", found {:?}", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| ParseError::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 2 {
            return Err(ParseError::Row {
                line,
                message: format!("expected 2 fields, found {}", row.len()),
            });
        }
        let location = format!("line {line}");
        let task_id = row[0].parse().map_err(|source| ParseError::Model {
            location: location.clone(),
            source,
        })?;
        let rate: f64 = row[1].parse().map_err(|_| ParseError::Row {
            line,
            message: format!("solve_rate {:?} is not a number", &row[1]),
        })?;
        out.push(SolveRateRecord {
            task_id,
            solve_rate: check_fraction(&location, "solve_rate", rate)?,
        });
    }
    Ok(out)
}

pub fn load_solve_rates(path: impl AsRef<Path>) -> Result<Vec<SolveRateRecord>, IngestError> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    located(path, parse_solve_rates(&text))
}
