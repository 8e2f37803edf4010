//! Two-sample Kolmogorov-Smirnov test with an exact p-value.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// `sup |F_x - F_y|`.
    pub statistic: f64,
    /// Exact `P(D >= statistic)` under the null, computed as if there were no
    /// ties; with ties it is conservative (too large).
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
}

/// Largest `|i m - j n|` over the merged empirical CDFs, evaluated only after
/// every run of tied values.
fn statistic_numerator(xs: &[f64], ys: &[f64]) -> u64 {
    let (n, m) = (xs.len() as i128, ys.len() as i128);
    let (mut i, mut j, mut best) = (0usize, 0usize, 0i128);
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        best = best.max((i as i128 * m - j as i128 * n).abs());
    }
    best as u64
}

/// Probability that a uniformly random monotone lattice path from `(0,0)` to
/// `(n,m)` keeps `|i m - j n| < bound` at every vertex.
fn inside_probability(n: usize, m: usize, bound: u64) -> f64 {
    let inside = |i: usize, j: usize| ((i as i128 * m as i128 - j as i128 * n as i128).unsigned_abs()) < bound as u128;
    // row[j] = probability that the path reaches (i, j) without leaving the band.
    let mut row = vec![0.0f64; m + 1];
    row[0] = 1.0;
    for j in 1..=m {
        // step in y from (0, j-1): probability m-(j-1) over n+m-(j-1) remaining steps
        row[j] = if inside(0, j) {
            row[j - 1] * (m - j + 1) as f64 / (n + m - j + 1) as f64
        } else {
            0.0
        };
    }
    for i in 1..=n {
        let mut next = vec![0.0f64; m + 1];
        for j in 0..=m {
            if !inside(i, j) {
                continue;
            }
            let left = i - 1;
            let from_x = row[j] * (n - left) as f64 / (n + m - left - j) as f64;
            let from_y = if j > 0 {
                next[j - 1] * (m - j + 1) as f64 / (n + m - i - j + 1) as f64
            } else {
                0.0
            };
            next[j] = from_x + from_y;
        }
        row = next;
    }
    row[m]
}

/// Exact two-sample KS test. Non-finite samples are rejected.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptyInput);
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("KS samples must be finite".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let d = statistic_numerator(&a, &b);
    let p = if d == 0 {
        1.0
    } else {
        (1.0 - inside_probability(n, m, d)).clamp(0.0, 1.0)
    };
    Ok(KsResult {
        statistic: d as f64 / (n as f64 * m as f64),
        p_value: p,
        n,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    /// Enumerates all C(n+m, n) interleavings and counts those reaching `bound`.
    fn brute_p(n: usize, m: usize, bound: u64) -> f64 {
        let total = n + m;
        let (mut hit, mut all) = (0u64, 0u64);
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != n {
                continue;
            }
            all += 1;
            let (mut i, mut j, mut best) = (0i64, 0i64, 0u64);
            for s in 0..total {
                if mask >> s & 1 == 1 {
                    i += 1;
                } else {
                    j += 1;
                }
                best = best.max((i * m as i64 - j * n as i64).unsigned_abs());
            }
            if best >= bound {
                hit += 1;
            }
        }
        hit as f64 / all as f64
    }

    #[test]
    fn matches_enumeration() {
        for (n, m) in [(3, 4), (5, 5), (6, 3), (7, 8)] {
            for bound in 1..=(n * m) as u64 {
                let exact = 1.0 - inside_probability(n, m, bound);
                assert!((exact - brute_p(n, m, bound)).abs() < 1e-12, "{n} {m} {bound}");
            }
        }
    }

    #[test]
    fn known_small_case() {
        // Fully separated samples of size 3: only 2 of the 20 orderings give D = 1.
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!((r.p_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let r = ks_two_sample(&[1.0, 1.0, 2.0], &[2.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ties_are_grouped() {
        // At value 1 both CDFs jump together; the gap only counts after the run.
        let r = ks_two_sample(&[1.0, 1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn null_rejection_rate() {
        let mut r = rng::stream(5);
        let trials = 400;
        let rejected = (0..trials)
            .filter(|_| {
                let a: Vec<f64> = (0..40).map(|_| r.random()).collect();
                let b: Vec<f64> = (0..50).map(|_| r.random()).collect();
                ks_two_sample(&a, &b).unwrap().p_value < 0.05
            })
            .count();
        // Binomial(400, <=0.05): mean 20, sd ~4.4.
        assert!(rejected < 38, "{rejected}");
    }

    #[test]
    fn detects_shift() {
        let mut r = rng::stream(6);
        let a: Vec<f64> = (0..500).map(|_| r.random()).collect();
        let b: Vec<f64> = (0..500).map(|_| r.random::<f64>() + 0.2).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
        assert!(ks_two_sample(&[f64::NAN], &[1.0]).is_err());
    }
}
