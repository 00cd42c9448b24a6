use super::dist::t_two_sided_p;
use super::{check_finite, StatResult, StatsError};

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn mid_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub(crate) fn has_ties(xs: &[f64]) -> bool {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).any(|w| w[0] == w[1])
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<StatResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatsError::TooFew { needed: 3, got: xs.len() });
    }
    check_finite(xs)?;
    check_finite(ys)?;
    let rho = pearson(&mid_ranks(xs), &mid_ranks(ys)).ok_or(StatsError::ConstantInput)?;
    let n = xs.len();
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        t_two_sided_p(rho * (df / (1.0 - rho * rho)).sqrt(), df)
    };
    Ok(StatResult {
        statistic: rho,
        p_value,
        method: "spearman-t",
        n_a: n,
        n_b: n,
        ties_present: has_ties(xs) || has_ties(ys),
        degenerate: false,
        df: Some(df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_ranks_average_ties() {
        assert_eq!(mid_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
        assert_eq!(mid_ranks(&[]), Vec::<f64>::new());
    }

    #[test]
    fn perfect_monotone_relations() {
        let r = spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert_eq!(r.p_value, 0.0);
        let r = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.statistic, -1.0);
    }

    #[test]
    fn tied_monotone_relation() {
        // ranks x: 1.5 1.5 3 4 and y: 1.5 1.5 3 4
        let r = spearman(&[1.0, 1.0, 2.0, 3.0], &[2.0, 2.0, 4.0, 6.0]).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-15);
        assert!(r.ties_present);
    }

    #[test]
    fn undefined_inputs_are_errors() {
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::ConstantInput));
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFew { needed: 3, got: 2 }));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(StatsError::LengthMismatch(3, 2)));
        assert_eq!(spearman(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]), Err(StatsError::NonFinite));
    }

    #[test]
    fn p_value_of_a_moderate_correlation() {
        // rho = 0.8 at n = 5: t = 0.8 * sqrt(3 / 0.36) = 2.3094, df 3
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r.statistic - 0.8).abs() < 1e-12);
        assert!((r.p_value - 0.104_088_039_466_7).abs() < 1e-6, "{}", r.p_value);
    }
}
