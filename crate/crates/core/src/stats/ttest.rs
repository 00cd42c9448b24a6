use super::dist::t_two_sided_p;
use super::{check_finite, mean, sample_variance, StatResult, StatsError};

fn at_least_two(xs: &[f64]) -> Result<(), StatsError> {
    if xs.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: xs.len() });
    }
    check_finite(xs)
}

/// Welch two-sample t test with Welch-Satterthwaite degrees of freedom.
///
/// When both samples have zero variance the statistic is undefined: equal
/// means give `t = 0, p = 1`, different means give `t = +-inf, p = 0`; both
/// set `degenerate`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<StatResult, StatsError> {
    at_least_two(a)?;
    at_least_two(b)?;
    let (n_a, n_b) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (sample_variance(a) / n_a, sample_variance(b) / n_b);
    let se2 = qa + qb;
    let mut out = StatResult {
        statistic: 0.0,
        p_value: 1.0,
        method: "welch-t",
        n_a: a.len(),
        n_b: b.len(),
        ties_present: false,
        degenerate: false,
        df: None,
    };
    if se2 == 0.0 {
        out.degenerate = true;
        if ma != mb {
            out.statistic = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
            out.p_value = 0.0;
        }
        return Ok(out);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (n_a - 1.0) + qb * qb / (n_b - 1.0));
    out.statistic = t;
    out.df = Some(df);
    out.p_value = t_two_sided_p(t, df);
    Ok(out)
}

/// Standardized mean difference using the pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    at_least_two(a)?;
    at_least_two(b)?;
    let (n_a, n_b) = (a.len() as f64, b.len() as f64);
    let pooled = ((n_a - 1.0) * sample_variance(a) + (n_b - 1.0) * sample_variance(b)) / (n_a + n_b - 2.0);
    if pooled <= 0.0 {
        return Err(StatsError::ZeroPooledSd);
    }
    Ok((mean(a) - mean(b)) / pooled.sqrt())
}
