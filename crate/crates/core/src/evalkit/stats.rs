use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::scalar::{total_cmp, Scalar};

/// Combined sample size up to which tie-free inputs get an exact p-value.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    /// Null distribution of U counted over every rank assignment.
    Exact,
    /// Normal approximation with tie-corrected variance and continuity correction.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyResult<T: Scalar> {
    /// `n_a·n_b + n_a(n_a+1)/2 − R_a`, with `R_a` the mid-rank sum of `a`.
    pub u: T,
    /// Same statistic for `b`; `u + u_b = n_a·n_b`.
    pub u_b: T,
    /// Two-sided.
    pub p: T,
    pub method: PMethod,
}

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_count(xs.len())
}

/// Unbiased (n − 1) sample variance.
pub fn variance<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_count(xs.len() - 1)
}

fn check_finite<T: Scalar>(xs: &[T]) -> Result<(), EvalError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EvalError::NonFinite)
    }
}

/// Mid-ranks (1-based) of `values`, plus the size of every tie group.
pub(crate) fn mid_ranks<T: Scalar>(values: &[T]) -> (Vec<T>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| total_cmp(values[i], values[j]));
    let mut ranks = vec![T::zero(); values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their average
        let rank = T::from_count(start + 1 + end) / T::from_count(2);
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// `counts[u]` = number of rank assignments of sizes (n_a, n_b) giving U = u,
/// where U counts (a, b) pairs with a < b.
fn u_null_counts(n_a: usize, n_b: usize) -> Vec<u64> {
    // prev[j][u] / cur[j][u]: orderings of (i − 1 | i) a's and j b's with U = u.
    // The largest value is either an a (adds no pairs) or a b (above all i a's).
    let max_u = n_a * n_b;
    let mut prev: Vec<Vec<u64>> = vec![vec![0u64; max_u + 1]; n_b + 1];
    for row in &mut prev {
        row[0] = 1;
    }
    for i in 1..=n_a {
        let mut cur: Vec<Vec<u64>> = vec![vec![0u64; max_u + 1]; n_b + 1];
        cur[0][0] = 1;
        for j in 1..=n_b {
            for u in 0..=i * j {
                let top_b = if u >= i { cur[j - 1][u - i] } else { 0 };
                cur[j][u] = prev[j][u] + top_b;
            }
        }
        prev = cur;
    }
    prev.swap_remove(n_b)
}

/// Two-sided Mann-Whitney U test of `a` against `b`.
///
/// Exact when `n_a + n_b <= 20` and no value repeats; otherwise normal
/// approximation. If every value is equal, `p = 1`.
pub fn mann_whitney_u<T: Scalar>(a: &[T], b: &[T]) -> Result<MannWhitneyResult<T>, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyGroup);
    }
    check_finite(a)?;
    check_finite(b)?;
    let (n_a, n_b) = (a.len(), b.len());
    let n = n_a + n_b;
    let pooled: Vec<T> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = mid_ranks(&pooled);
    let r_a: T = ranks[..n_a].iter().copied().sum();
    let nn = T::from_count(n_a * n_b);
    let u = nn + T::from_count(n_a * (n_a + 1)) / T::from_count(2) - r_a;
    let u_b = nn - u;

    let has_ties = ties.iter().any(|&t| t > 1);
    if n <= EXACT_MAX_N && !has_ties {
        let counts = u_null_counts(n_a, n_b);
        let total: u64 = counts.iter().sum();
        let u_int = u.as_f64().round() as usize;
        let lower: u64 = counts[..=u_int].iter().sum();
        let upper: u64 = counts[u_int..].iter().sum();
        let p = (2.0 * lower.min(upper) as f64 / total as f64).min(1.0);
        return Ok(MannWhitneyResult { u, u_b, p: T::from_f64_lossy(p), method: PMethod::Exact });
    }

    let nf = n as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * (nf - 1.0));
    let var = (n_a * n_b) as f64 / 12.0 * ((nf + 1.0) - tie_term);
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = (((u.as_f64() - (n_a * n_b) as f64 / 2.0).abs() - 0.5) / var.sqrt()).max(0.0);
        statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitneyResult { u, u_b, p: T::from_f64_lossy(p), method: PMethod::Normal })
}

/// `(mean_a − mean_b) / s_pooled` with unbiased group variances.
pub fn cohens_d<T: Scalar>(a: &[T], b: &[T]) -> Result<T, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::GroupTooSmall { min: 2 });
    }
    check_finite(a)?;
    check_finite(b)?;
    let (n_a, n_b) = (T::from_count(a.len()), T::from_count(b.len()));
    let one = T::one();
    let pooled_var = ((n_a - one) * variance(a) + (n_b - one) * variance(b)) / (n_a + n_b - one - one);
    if pooled_var <= T::zero() {
        return Err(EvalError::ZeroVariance);
    }
    Ok((mean(a) - mean(b)) / pooled_var.sqrt())
}

/// Internal consistency of a respondents × items matrix.
pub fn cronbach_alpha<T: Scalar>(matrix: &[Vec<T>]) -> Result<T, EvalError> {
    if matrix.len() < 2 {
        return Err(EvalError::GroupTooSmall { min: 2 });
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(EvalError::TooFewItems);
    }
    if matrix.iter().any(|row| row.len() != k) {
        return Err(EvalError::Ragged);
    }
    for row in matrix {
        check_finite(row)?;
    }
    let item_var_sum: T = (0..k)
        .map(|j| variance(&matrix.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .sum();
    let totals: Vec<T> = matrix.iter().map(|row| row.iter().copied().sum()).collect();
    let total_var = variance(&totals);
    if total_var <= T::zero() {
        return Err(EvalError::ZeroVariance);
    }
    let kf = T::from_count(k);
    Ok(kf / (kf - T::one()) * (T::one() - item_var_sum / total_var))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary<T: Scalar> {
    pub min: T,
    pub q1: T,
    pub median: T,
    pub q3: T,
    pub max: T,
}

/// Quantile by linear interpolation between order statistics (h = (n − 1)·q).
pub fn quantile<T: Scalar>(sorted: &[T], q: f64) -> T {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::from_f64_lossy(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn five_number_summary<T: Scalar>(values: &[T]) -> Result<FiveNumberSummary<T>, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyGroup);
    }
    check_finite(values)?;
    let mut s = values.to_vec();
    s.sort_by(|x, y| total_cmp(*x, *y));
    Ok(FiveNumberSummary {
        min: s[0],
        q1: quantile(&s, 0.25),
        median: quantile(&s, 0.5),
        q3: quantile(&s, 0.75),
        max: s[s.len() - 1],
    })
}
