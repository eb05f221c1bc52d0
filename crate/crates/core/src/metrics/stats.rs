//! Paired tests and simple regression.
//!
//! All one-sided tests work on the paired differences `d = x - y` and take
//! the direction of the alternative hypothesis: [`Alternative::Less`] tests
//! whether `x` tends to be smaller than `y`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    Less,
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p: f64,
    /// Sample size after dropping zero differences (rank and sign tests) or
    /// degrees of freedom (t test).
    pub n: usize,
}

fn differences(x: &[f64], y: &[f64], min_len: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!("paired samples of lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < min_len {
        return Err(Error::DegenerateTest(format!("need at least {min_len} pairs, got {}", x.len())));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite paired value".into()));
    }
    Ok(d)
}

/// One-sided paired t test with `n - 1` degrees of freedom.
///
/// Identical samples give `t = 0` and `p = 0.5`. Differences that are all
/// equal but not zero have no variance to test against and are rejected.
pub fn paired_t_one_sided(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestOutcome> {
    let d = differences(x, y, 2)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = d.len() - 1;
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(TestOutcome { statistic: 0.0, p: 0.5, n: df });
        }
        return Err(Error::DegenerateTest("paired differences have zero variance".into()));
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    let p = match alternative {
        Alternative::Less => dist.cdf(t),
        Alternative::Greater => dist.sf(t),
    };
    Ok(TestOutcome { statistic: t, p, n: df })
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their
/// positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes up to this use the exact null distribution.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

/// One-sided Wilcoxon signed-rank test. `W` is the sum of the ranks of the
/// positive differences. Zero differences are dropped and tied magnitudes
/// get average ranks.
///
/// For up to 20 non-zero differences the p-value is exact: the null
/// distribution of `W` over all sign assignments of the observed ranks is
/// built by dynamic programming (ties included). Larger samples use the
/// normal approximation with the tie-corrected variance and no continuity
/// correction.
pub fn wilcoxon_signed_rank_one_sided(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestOutcome> {
    let d: Vec<f64> = differences(x, y, 1)?.into_iter().filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::DegenerateTest("every paired difference is zero".into()));
    }
    let magnitudes: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let p = if n <= WILCOXON_EXACT_MAX_N {
        exact_signed_rank_p(&ranks, w, alternative)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = magnitudes.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
            let t = j as f64;
            tie_term += t * t * t - t;
            i += j;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = (w - mean) / var.sqrt();
        let normal = Normal::standard();
        match alternative {
            Alternative::Less => normal.cdf(z),
            Alternative::Greater => normal.sf(z),
        }
    };
    Ok(TestOutcome { statistic: w, p, n })
}

/// Tail probability of the signed-rank statistic under the null, by
/// counting sign assignments over doubled (hence integral) ranks.
fn exact_signed_rank_p(ranks: &[f64], w: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed = (2.0 * w).round() as usize;
    let all = 2f64.powi(ranks.len() as i32);
    let tail: f64 = match alternative {
        Alternative::Less => counts[..=observed].iter().sum(),
        Alternative::Greater => counts[observed..].iter().sum(),
    };
    (tail / all).min(1.0)
}

/// One-sided sign test: the statistic is the number of positive
/// differences among the non-zero ones, the p-value an exact binomial tail.
pub fn sign_test_one_sided(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestOutcome> {
    let d: Vec<f64> = differences(x, y, 1)?.into_iter().filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::DegenerateTest("every paired difference is zero".into()));
    }
    let n = d.len() as u64;
    let positive = d.iter().filter(|v| **v > 0.0).count() as u64;
    let binom = Binomial::new(0.5, n).map_err(|e| Error::Numerical(e.to_string()))?;
    let p = match alternative {
        Alternative::Less => binom.cdf(positive),
        Alternative::Greater if positive == 0 => 1.0,
        Alternative::Greater => binom.sf(positive - 1),
    };
    Ok(TestOutcome { statistic: positive as f64, p: p.clamp(0.0, 1.0), n: d.len() })
}

/// Ordinary least squares fit of `y = b0 + b1 x` with a two-sided t test of
/// `b1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub t: f64,
    pub p: f64,
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub n: usize,
}

pub fn linreg_slope_test(x: &[f64], y: &[f64]) -> Result<Regression> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!("regression on {} x and {} y values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::DegenerateTest(format!("regression needs at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateTest("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>().max(0.0);
    let df = nf - 2.0;
    let slope_se = (sse / df / sxx).sqrt();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 0.0 };
    let adjusted_r_squared = 1.0 - (1.0 - r_squared) * (nf - 1.0) / df;
    let (t, p) = if slope_se > 0.0 {
        let t = slope / slope_se;
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    } else if slope == 0.0 {
        (0.0, 1.0)
    } else {
        (f64::INFINITY.copysign(slope), 0.0)
    };
    Ok(Regression { slope, intercept, slope_se, t, p, r_squared, adjusted_r_squared, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn identical_samples() {
        let x = [1.0, 2.0, 3.0];
        let r = paired_t_one_sided(&x, &x, Alternative::Less).unwrap();
        assert_eq!((r.statistic, r.p), (0.0, 0.5));
        assert!(wilcoxon_signed_rank_one_sided(&x, &x, Alternative::Less).is_err());
        assert!(sign_test_one_sided(&x, &x, Alternative::Less).is_err());
        assert!(paired_t_one_sided(&[2.0, 3.0], &[1.0, 2.0], Alternative::Less).is_err());
    }

    #[test]
    fn all_positive_signed_ranks() {
        let r = wilcoxon_signed_rank_one_sided(&[2.0, 3.0, 4.0, 5.0, 6.0], &[1.0; 5], Alternative::Greater).unwrap();
        assert_eq!(r.statistic, 15.0);
        assert_abs_diff_eq!(r.p, 1.0 / 32.0, epsilon = 1e-15);
    }

    #[test]
    fn sign_test_tails() {
        let y = [0.0; 10];
        let all = sign_test_one_sided(&[1.0; 10], &y, Alternative::Greater).unwrap();
        assert_abs_diff_eq!(all.p, 2f64.powi(-10), epsilon = 1e-15);
        let half: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { -1.0 }).collect();
        let r = sign_test_one_sided(&half, &y, Alternative::Greater).unwrap();
        assert_abs_diff_eq!(r.p, 638.0 / 1024.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_approximation_is_close_to_exact_at_twenty() {
        let x: Vec<f64> = (0..21).map(|i| ((i * 7) % 11) as f64 - 4.5 + 0.01 * i as f64).collect();
        let y = vec![0.0; 21];
        let approx21 = wilcoxon_signed_rank_one_sided(&x, &y, Alternative::Greater).unwrap();
        let exact20 = wilcoxon_signed_rank_one_sided(&x[..20], &y[..20], Alternative::Greater).unwrap();
        assert!(approx21.p > 0.0 && approx21.p < 1.0);
        assert!((approx21.p - exact20.p).abs() < 0.15);
    }

    #[test]
    fn regression_edge_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let line = linreg_slope_test(&x, &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert_abs_diff_eq!(line.slope, 2.0, epsilon = 1e-12);
        assert_eq!(line.r_squared, 1.0);
        assert_eq!(line.p, 0.0);
        let flat = linreg_slope_test(&x, &[2.0; 4]).unwrap();
        assert_eq!((flat.slope, flat.r_squared, flat.p), (0.0, 0.0, 1.0));
        assert!(linreg_slope_test(&[1.0; 4], &x).is_err());
    }
}
