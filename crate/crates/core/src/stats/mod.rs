//! Rank correlation, rank-sum and t tests, effect size and the t distribution.

pub mod dist;
mod mwu;
mod rank;
mod ttest;

use serde::Serialize;
use thiserror::Error;

pub use dist::{normal_cdf, t_cdf, t_quantile};
pub use mwu::{mann_whitney_u, u_distribution, EXACT_MAX_N};
pub use rank::{mid_ranks, pearson, spearman};
pub use ttest::{cohens_d, welch_t};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("constant input: correlation is undefined")]
    ConstantInput,
    #[error("pooled standard deviation is zero")]
    ZeroPooledSd,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("{0}")]
    OutOfDomain(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: &'static str,
    pub n_a: usize,
    pub n_b: usize,
    pub ties_present: bool,
    /// Set when a convention replaced an undefined statistic.
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
}

pub(crate) fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n - 1` in the denominator.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}
