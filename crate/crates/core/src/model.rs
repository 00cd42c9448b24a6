//! Shared data model: task identifiers, taxonomy categories and result records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed task id {0:?}: expected 8 lowercase hex characters")]
    MalformedId(String),
    #[error("unknown category code {0:?}")]
    UnknownCategory(String),
}

/// An 8-character lowercase hexadecimal task identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId([u8; 8]);

impl TaskId {
    pub fn as_str(&self) -> &str {
        // Construction only admits ASCII hex digits.
        std::str::from_utf8(&self.0).expect("task id is ascii")
    }
}

impl FromStr for TaskId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.len() != 8 || !bytes.iter().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(ModelError::MalformedId(s.to_string()));
        }
        let mut id = [0u8; 8];
        id.copy_from_slice(bytes);
        Ok(TaskId(id))
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for TaskId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TaskId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One of the nine taxonomy categories, or `Ambiguous` when no rule applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    S1,
    S2,
    S3,
    C1,
    C2,
    K1,
    L1,
    A1,
    A2,
    Ambiguous,
}

impl Category {
    /// All ten values in canonical order (the nine categories, then `Ambiguous`).
    pub const ALL: [Category; 10] = [
        Category::S1,
        Category::S2,
        Category::S3,
        Category::C1,
        Category::C2,
        Category::K1,
        Category::L1,
        Category::A1,
        Category::A2,
        Category::Ambiguous,
    ];

    /// The nine classifiable categories.
    pub const CLASSIFIABLE: [Category; 9] = [
        Category::S1,
        Category::S2,
        Category::S3,
        Category::C1,
        Category::C2,
        Category::K1,
        Category::L1,
        Category::A1,
        Category::A2,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Category::S1 => "S1",
            Category::S2 => "S2",
            Category::S3 => "S3",
            Category::C1 => "C1",
            Category::C2 => "C2",
            Category::K1 => "K1",
            Category::L1 => "L1",
            Category::A1 => "A1",
            Category::A2 => "A2",
            Category::Ambiguous => "ambiguous",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::S1 => "Spatial Local",
            Category::S2 => "Spatial Global",
            Category::S3 => "Spatial Topology",
            Category::C1 => "Color Transform",
            Category::C2 => "Color Pattern",
            Category::K1 => "Scaling",
            Category::L1 => "Logic Set",
            Category::A1 => "Iterative",
            Category::A2 => "Packing",
            Category::Ambiguous => "Ambiguous",
        }
    }

    pub fn is_classifiable(self) -> bool {
        self != Category::Ambiguous
    }

    /// Position in [`Category::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Category {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "S1" => Category::S1,
            "S2" => Category::S2,
            "S3" => Category::S3,
            "C1" => Category::C1,
            "C2" => Category::C2,
            "K1" => Category::K1,
            "L1" => Category::L1,
            "A1" => Category::A1,
            "A2" => Category::A2,
            "ambiguous" | "Ambiguous" => Category::Ambiguous,
            other => return Err(ModelError::UnknownCategory(other.to_string())),
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-task experiment record. Accuracies are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: TaskId,
    pub cell_acc: f64,
    pub grid_acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_cell_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

impl TaskResult {
    pub fn new(task_id: TaskId, cell_acc: f64, grid_acc: f64) -> Self {
        TaskResult {
            task_id,
            cell_acc,
            grid_acc,
            base_cell_acc: None,
            seed: None,
            category: None,
        }
    }
}

/// External solve rate for one task (e.g. a specialist model's success fraction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveRateRecord {
    pub task_id: TaskId,
    pub solve_rate: f64,
}
