use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use arctax_core::ingest::read_utf8;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Reads input files and remembers a content hash for each.
#[derive(Debug, Default)]
pub struct Inputs {
    pub digests: BTreeMap<String, InputDigest>,
}

impl Inputs {
    pub fn read(&mut self, role: &str, path: &Path) -> Result<String> {
        let text = read_utf8(path)?;
        self.record(role, &path.display().to_string(), &text);
        Ok(text)
    }

    pub fn record(&mut self, role: &str, path: &str, text: &str) {
        self.digests.insert(
            role.to_string(),
            InputDigest {
                path: path.to_string(),
                sha256: hex::encode(Sha256::digest(text.as_bytes())),
            },
        );
    }
}

/// Output of one subcommand, with its three renderings.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub payload: Value,
    pub csv: Option<String>,
    pub markdown: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub tool_version: String,
    pub subcommand: String,
    pub inputs: BTreeMap<String, InputDigest>,
    /// Not part of the deterministic content.
    pub timestamp: String,
    pub warnings: Vec<String>,
    pub payload: Value,
    #[serde(skip)]
    pub csv: Option<String>,
    #[serde(skip)]
    pub markdown: String,
}

/// Rebuilds every object with keys in lexicographic order.
pub fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// JSON payload text with sorted keys; the part of a bundle that must be reproducible.
pub fn payload_json(bundle: &ReportBundle) -> String {
    serde_json::to_string_pretty(&sort_keys(bundle.payload.clone())).expect("json value serializes")
}

pub fn emit(bundle: &ReportBundle, format: Format) -> Result<Vec<u8>> {
    let mut text = match format {
        Format::Json => serde_json::to_string_pretty(&sort_keys(to_value(bundle)))?,
        Format::Csv => match &bundle.csv {
            Some(csv) => csv.clone(),
            None => bail!("`{}` has no CSV output; use --format json or markdown", bundle.subcommand),
        },
        Format::Markdown => bundle.markdown.clone(),
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    Ok(text.into_bytes())
}

pub fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}
