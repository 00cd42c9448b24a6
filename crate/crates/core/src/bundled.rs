//! Reference task-to-category mapping for the 400 re-arc training tasks.

use crate::ingest::{parse_mapping, Mapping};

pub const TASK_CATEGORIES_JSON: &str = include_str!("../data/task_categories.json");

pub fn task_categories() -> Mapping {
    parse_mapping(TASK_CATEGORIES_JSON).expect("bundled mapping is valid")
}
