//! Static classification of re-arc generators into a nine-category taxonomy,
//! with affinity, gap and statistics diagnostics over experiment results.

pub mod affinity;
pub mod bundled;
pub mod gap;
pub mod ingest;
pub mod model;
pub mod ratio;
pub mod rules;
pub mod scan;
pub mod score;
pub mod stats;

pub use affinity::{curriculum_bias, distribution, empirical_band, theoretical_affinity, AffinityLevel, AffinityMap};
pub use gap::{compare_groups, compositional_gap, sensitivity, GapThresholds};
pub use ingest::{GeneratorCorpus, GeneratorUnit, IngestError, Mapping, ParseError};
pub use model::{Category, SolveRateRecord, TaskId, TaskResult};
pub use ratio::{Ratio, Rounding};
pub use rules::{classify, classify_corpus, ClassificationTrace, ClassifierConfig, RuleId};
pub use scan::{extract_window, scan, ScanReport};
pub use score::{score_against_mapping, AccuracyReport};
