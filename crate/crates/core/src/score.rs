//! Agreement of predicted categories with a reference mapping.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::Mapping;
use crate::model::{Category, TaskId};
use crate::ratio::Ratio;
use crate::rules::ClassificationTrace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("task {0} has no reference category")]
    MissingTruth(TaskId),
}

/// Rows are reference categories, columns are predictions, both indexed by
/// [`Category::index`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 10]; 10],
}

impl ConfusionMatrix {
    pub fn get(&self, truth: Category, predicted: Category) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// CSV with a `truth\predicted` corner cell and category codes as headers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth\\predicted");
        for c in Category::ALL {
            out.push(',');
            out.push_str(c.code());
        }
        out.push('\n');
        for t in Category::ALL {
            out.push_str(t.code());
            for p in Category::ALL {
                out.push_str(&format!(",{}", self.get(t, p)));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Disagreement {
    pub task_id: TaskId,
    pub truth: Category,
    pub predicted: Category,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub n_total: u64,
    pub n_classifiable: u64,
    pub n_agree: u64,
    pub agreement: Ratio,
    pub accuracy: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub disagreements: Vec<Disagreement>,
}

pub fn score_against_mapping<'a>(
    traces: impl IntoIterator<Item = &'a ClassificationTrace>,
    truth: &Mapping,
) -> Result<AccuracyReport, ScoreError> {
    let predicted: BTreeMap<TaskId, Category> = traces.into_iter().map(|t| (t.task_id, t.category)).collect();
    score_predictions(&predicted, truth)
}

/// Rows are the reference categories; every predicted id must have one.
pub fn score_predictions(predicted: &BTreeMap<TaskId, Category>, truth: &Mapping) -> Result<AccuracyReport, ScoreError> {
    let mut confusion = ConfusionMatrix::default();
    let mut disagreements = Vec::new();
    let (mut n_classifiable, mut n_agree) = (0u64, 0u64);

    for (&id, &p) in predicted {
        let t = *truth.get(&id).ok_or(ScoreError::MissingTruth(id))?;
        confusion.counts[t.index()][p.index()] += 1;
        if t.is_classifiable() {
            n_classifiable += 1;
            if t == p {
                n_agree += 1;
            } else {
                disagreements.push(Disagreement {
                    task_id: id,
                    truth: t,
                    predicted: p,
                });
            }
        }
    }
    let agreement = Ratio::new(n_agree, n_classifiable);
    Ok(AccuracyReport {
        n_total: predicted.len() as u64,
        n_classifiable,
        n_agree,
        agreement,
        accuracy: agreement.to_f64(),
        confusion,
        disagreements,
    })
}
