//! Rank correlation and the two-proportion test.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("inputs have different lengths")]
    LengthMismatch,
    #[error("at least three observations are required")]
    TooFewPoints,
    #[error("degenerate input: a constant series or a pooled rate of 0 or 1")]
    DegenerateInput,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties, and the
/// two-sided p-value of the t approximation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch);
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewPoints);
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y)).ok_or(StatsError::DegenerateInput)?;
    let df = (x.len() - 2) as f64;
    let p = if 1.0 - rho * rho <= 0.0 {
        0.0
    } else {
        let t = rho * libm::sqrt(df / (1.0 - rho * rho));
        t_two_sided(t, df)
    };
    Ok((rho, p))
}

/// One-sided pooled two-proportion z-test: the probability of a drop at
/// least this large from `before` to `after` if both share one rate.
/// Arguments are `(successes, trials)`.
pub fn contamination_test(before: (u64, u64), after: (u64, u64)) -> Result<f64, StatsError> {
    let (sb, nb) = before;
    let (sa, na) = after;
    if nb == 0 || na == 0 || sb > nb || sa > na {
        return Err(StatsError::DegenerateInput);
    }
    let (nb, na) = (nb as f64, na as f64);
    let pb = sb as f64 / nb;
    let pa = sa as f64 / na;
    let pooled = (sb + sa) as f64 / (nb + na);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Err(StatsError::DegenerateInput);
    }
    let z = (pb - pa) / libm::sqrt(pooled * (1.0 - pooled) * (1.0 / nb + 1.0 / na));
    Ok(0.5 * libm::erfc(z / SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_series() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&x, &[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap().0, 1.0);
        assert_eq!(spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap().0, -1.0);
        assert_eq!(spearman(&x, &[1.0; 5]), Err(StatsError::DegenerateInput));
        assert_eq!(spearman(&x[..2], &x[..2]), Err(StatsError::TooFewPoints));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), [2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn contamination_examples() {
        let p = contamination_test((35, 286), (18, 249)).unwrap();
        assert!((p - 0.0265).abs() < 0.001, "{p}");
        assert!((contamination_test((10, 100), (20, 200)).unwrap() - 0.5).abs() < 1e-15);
        assert!(contamination_test((10, 100), (30, 100)).unwrap() > 0.5);
        assert_eq!(contamination_test((0, 10), (0, 10)), Err(StatsError::DegenerateInput));
    }

    #[test]
    fn incomplete_beta_edges() {
        assert!((inc_beta(2.0, 3.0, 0.4) - 0.5248).abs() < 1e-4);
        assert!((t_two_sided(0.0, 10.0) - 1.0).abs() < 1e-12);
    }
}
