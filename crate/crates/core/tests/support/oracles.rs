//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

/// U of `a` by direct pair counting: pairs with a < b, plus half of the ties.
pub fn u_by_pairs(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            if x < y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Two-sided exact p for tie-free data: walks every way of choosing which
/// n_a of the N pooled ranks belong to `a` and counts U by pairs.
pub fn exact_p_by_enumeration(n_a: usize, n_b: usize, u_obs: f64) -> f64 {
    let n = n_a + n_b;
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != n_a {
            continue;
        }
        // rank positions ascending; a at set bits. U = pairs (a below b).
        let mut u = 0u64;
        let mut b_above = n_b as u64;
        for pos in 0..n {
            if mask & (1 << pos) != 0 {
                u += b_above;
            } else {
                b_above -= 1;
            }
        }
        total += 1;
        if u as f64 <= u_obs + 1e-9 {
            le += 1;
        }
        if u as f64 >= u_obs - 1e-9 {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

/// Tie-corrected normal approximation with continuity correction, from the
/// textbook formula using a normal CDF rather than erfc.
pub fn normal_approx_p(a: &[f64], b: &[f64]) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let (n_a, n_b) = (a.len() as f64, b.len() as f64);
    let n = n_a + n_b;
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j] == pooled[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_sum += t * t * t - t;
        i = j;
    }
    let sigma2 = n_a * n_b / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if sigma2 <= 0.0 {
        return 1.0;
    }
    let u = u_by_pairs(a, b);
    let dev = ((u - n_a * n_b / 2.0).abs() - 0.5).max(0.0);
    let z = dev / sigma2.sqrt();
    (2.0 * (1.0 - Normal::standard().cdf(z))).min(1.0)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased variance via the two-pass sum of squares.
fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn cohens_d_direct(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sp = (((na - 1.0) * var(a) + (nb - 1.0) * var(b)) / (na + nb - 2.0)).sqrt();
    (mean(a) - mean(b)) / sp
}

/// Alpha with population (n) variances; the ratio is convention-free.
pub fn cronbach_direct(m: &[Vec<f64>]) -> f64 {
    let n = m.len() as f64;
    let k = m[0].len();
    let pvar = |xs: &[f64]| {
        let mu = mean(xs);
        xs.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n
    };
    let items: f64 = (0..k).map(|j| pvar(&m.iter().map(|r| r[j]).collect::<Vec<_>>())).sum();
    let totals: Vec<f64> = m.iter().map(|r| r.iter().sum()).collect();
    let kf = k as f64;
    kf / (kf - 1.0) * (1.0 - items / pvar(&totals))
}

/// Frequency from the spacing of the first and last upward zero crossings.
pub fn zero_crossing_hz(samples: &[i16], rate: u32) -> f64 {
    let mut ups = Vec::new();
    for i in 1..samples.len() {
        let (a, b) = (samples[i - 1] as f64, samples[i] as f64);
        if a < 0.0 && b >= 0.0 {
            ups.push((i - 1) as f64 + (-a) / (b - a));
        }
    }
    if ups.len() < 2 {
        return 0.0;
    }
    (ups.len() - 1) as f64 * rate as f64 / (ups[ups.len() - 1] - ups[0])
}
