use super::dist::normal_two_sided_p;
use super::rank::{has_ties, mid_ranks};
use super::{check_finite, StatResult, StatsError};

/// Largest combined sample size that uses the exact null distribution.
pub const EXACT_MAX_N: usize = 16;

/// Null distribution counts of U: entry `u` is the number of orderings of
/// `n_a + n_b` distinct values giving U_a = u.
pub fn u_distribution(n_a: usize, n_b: usize) -> Vec<u64> {
    // table[m][n][u] built from c(m, n, u) = c(m - 1, n, u - n) + c(m, n - 1, u)
    let max_u = n_a * n_b;
    let mut table = vec![vec![Vec::<u64>::new(); n_b + 1]; n_a + 1];
    for m in 0..=n_a {
        for n in 0..=n_b {
            let mut c = vec![0u64; m * n + 1];
            if m == 0 || n == 0 {
                c[0] = 1;
            } else {
                for (u, slot) in c.iter_mut().enumerate() {
                    let from_a = if u >= n { table[m - 1][n].get(u - n).copied().unwrap_or(0) } else { 0 };
                    let from_b = table[m][n - 1].get(u).copied().unwrap_or(0);
                    *slot = from_a + from_b;
                }
            }
            table[m][n] = c;
        }
    }
    let out = std::mem::take(&mut table[n_a][n_b]);
    debug_assert_eq!(out.len(), max_u + 1);
    out
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<StatResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(a)?;
    check_finite(b)?;
    let (n_a, n_b) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = mid_ranks(&pooled);
    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let u_a = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let u_b = (n_a * n_b) as f64 - u_a;
    let u = u_a.min(u_b);
    let ties = has_ties(&pooled);
    let n = (n_a + n_b) as f64;
    let mu = (n_a * n_b) as f64 / 2.0;

    let result = |p_value: f64, method, degenerate| StatResult {
        statistic: u,
        p_value: p_value.clamp(0.0, 1.0),
        method,
        n_a,
        n_b,
        ties_present: ties,
        degenerate,
        df: None,
    };

    if !ties && n_a + n_b <= EXACT_MAX_N {
        let counts = u_distribution(n_a, n_b);
        let total: u64 = counts.iter().sum();
        let below: u64 = counts[..=(u.round() as usize)].iter().sum();
        return Ok(result(2.0 * below as f64 / total as f64, "exact", false));
    }

    let mut tie_term = 0.0;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    for run in sorted.chunk_by(|x, y| x == y) {
        let t = run.len() as f64;
        tie_term += t * t * t - t;
    }
    let variance = (n_a * n_b) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        // every value tied: no evidence of a shift
        return Ok(result(1.0, "normal-approx", true));
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / variance.sqrt();
    Ok(result(normal_two_sided_p(z), "normal-approx", false))
}
