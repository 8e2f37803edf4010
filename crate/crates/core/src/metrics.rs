//! Clustering quality: loss ratio, silhouette coefficient and normalized
//! mutual information.

use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataMatrix, RowId};
use crate::kmeans::Assignment;
use crate::{Error, Result, Scalar};

pub const DEFAULT_SILHOUETTE_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub loss: f64,
    pub loss_ratio: f64,
    pub silhouette: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmi: Option<f64>,
    pub subsample_seed: u64,
}

/// `method_loss / baseline_loss`.
pub fn loss_ratio(method_loss: f64, baseline_loss: f64) -> Result<f64> {
    if !(baseline_loss > 0.0) {
        return Err(Error::ZeroBaseline(baseline_loss));
    }
    Ok(method_loss / baseline_loss)
}

fn euclid<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Mean silhouette over the assigned live rows, computed exactly on a uniform
/// subsample of at most `sample_cap` rows drawn without replacement.
pub fn silhouette<S: Scalar, R: Rng + ?Sized>(
    data: &DataMatrix<S>,
    assignment: &Assignment,
    sample_cap: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut rows: Vec<(RowId, usize)> = data
        .live_ids()
        .filter_map(|id| assignment.get(id).map(|c| (id, c)))
        .collect();
    if rows.len() > sample_cap {
        let picked = rand::seq::index::sample(rng, rows.len(), sample_cap);
        let mut keep: Vec<usize> = picked.into_vec();
        keep.sort_unstable();
        rows = keep.into_iter().map(|i| rows[i]).collect();
    }
    let k = rows.iter().map(|&(_, c)| c + 1).max().unwrap_or(0);
    let mut sizes = vec![0usize; k];
    for &(_, c) in &rows {
        sizes[c] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }
    let points: Vec<&[S]> = rows.iter().map(|&(id, _)| data.live_point(id)).collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut dist_to = vec![0.0f64; k];
    for (i, &(_, ci)) in rows.iter().enumerate() {
        if sizes[ci] == 1 {
            continue;
        }
        dist_to.iter_mut().for_each(|v| *v = 0.0);
        for (j, &(_, cj)) in rows.iter().enumerate() {
            if i != j {
                dist_to[cj] += euclid(points[i], points[j]);
            }
        }
        let a = dist_to[ci] / (sizes[ci] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != ci && sizes[c] > 0)
            .map(|c| dist_to[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / rows.len() as f64)
}

/// Sums in ascending order so the result does not depend on label order.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    ordered_sum(
        counts
            .filter(|&c| c > 0)
            .map(|c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .collect(),
    )
}

/// Mutual information normalized by the arithmetic mean of both entropies.
/// Two constant labelings score 1; exactly one constant labeling scores 0.
pub fn nmi<A: Eq + Hash, B: Eq + Hash>(pred: &[A], truth: &[B]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = pred.len() as f64;
    let mut pa: HashMap<&A, usize> = HashMap::new();
    let mut tb: HashMap<&B, usize> = HashMap::new();
    let mut joint: HashMap<(&A, &B), usize> = HashMap::new();
    for (a, b) in pred.iter().zip(truth) {
        *pa.entry(a).or_default() += 1;
        *tb.entry(b).or_default() += 1;
        *joint.entry((a, b)).or_default() += 1;
    }
    match (pa.len() == 1, tb.len() == 1) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mi = ordered_sum(
        joint
            .iter()
            .map(|(&(a, b), &c)| {
                let pxy = c as f64 / n;
                pxy * (c as f64 * n / (pa[a] as f64 * tb[b] as f64)).ln()
            })
            .collect(),
    );
    let (ha, hb) = (entropy(pa.values().copied(), n), entropy(tb.values().copied(), n));
    let h = (ha.min(hb) + ha.max(hb)) / 2.0;
    Ok((mi.max(0.0) / h).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn brute_silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
        let n = points.len();
        let dist = |i: usize, j: usize| -> f64 {
            points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let k = labels.iter().max().unwrap() + 1;
        let mut s = 0.0;
        for i in 0..n {
            let own = labels.iter().filter(|&&l| l == labels[i]).count();
            if own == 1 {
                continue;
            }
            let a = (0..n).filter(|&j| j != i && labels[j] == labels[i]).map(|j| dist(i, j)).sum::<f64>() / (own - 1) as f64;
            let mut b = f64::INFINITY;
            for c in (0..k).filter(|&c| c != labels[i]) {
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                if !members.is_empty() {
                    b = b.min(members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64);
                }
            }
            s += (b - a) / a.max(b);
        }
        s / n as f64
    }

    fn setup(points: &[Vec<f64>], labels: &[usize]) -> (DataMatrix<f64>, Assignment) {
        let d = DataMatrix::from_rows(points.to_vec()).unwrap();
        let k = labels.iter().max().unwrap() + 1;
        let a = Assignment::from_labels(points.len(), k, labels.iter().enumerate().map(|(i, &l)| (RowId(i), l))).unwrap();
        (d, a)
    }

    #[test]
    fn silhouette_small_example() {
        let pts = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
        let (d, a) = setup(&pts, &[0, 0, 1, 1]);
        let s = silhouette(&d, &a, 100, &mut rng::stream(0)).unwrap();
        // a = 0.1 and b = 10.05 for the outer points, b = 9.95 for the inner ones.
        let want = ((10.05 - 0.1) / 10.05 * 2.0 + (9.95 - 0.1) / 9.95 * 2.0) / 4.0;
        assert!((s - want).abs() < 1e-12);
        assert!((s - 0.990).abs() < 1e-3);
    }

    #[test]
    fn silhouette_matches_brute_force() {
        let mut r = rng::stream(3);
        for n in [5usize, 40, 200] {
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.random::<f64>()).collect()).collect();
            let labels: Vec<usize> = (0..n).map(|i| if i < 2 { i } else { r.random_range(0..4) }).collect();
            let (d, a) = setup(&pts, &labels);
            let got = silhouette(&d, &a, n, &mut rng::stream(1)).unwrap();
            assert!((got - brute_silhouette(&pts, &labels)).abs() < 1e-9);
            assert!((-1.0..=1.0).contains(&got));
        }
    }

    #[test]
    fn silhouette_single_cluster_errors() {
        let pts = vec![vec![0.0], vec![1.0]];
        let (d, a) = setup(&pts, &[0, 0]);
        assert!(matches!(silhouette(&d, &a, 10, &mut rng::stream(0)), Err(Error::SingleCluster)));
    }

    #[test]
    fn silhouette_far_clusters_near_one() {
        let pts = vec![vec![0.0], vec![0.5], vec![1e6], vec![1e6 + 0.5]];
        let (d, a) = setup(&pts, &[0, 0, 1, 1]);
        assert!(silhouette(&d, &a, 10, &mut rng::stream(0)).unwrap() > 0.99);
    }

    #[test]
    fn silhouette_subsample_is_seeded() {
        let mut r = rng::stream(8);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| vec![r.random::<f64>()]).collect();
        let labels: Vec<usize> = pts.iter().map(|p| (p[0] > 0.5) as usize).collect();
        let (d, a) = setup(&pts, &labels);
        let x = silhouette(&d, &a, 50, &mut rng::stream(2)).unwrap();
        let y = silhouette(&d, &a, 50, &mut rng::stream(2)).unwrap();
        assert_eq!(x, y);
        let full = silhouette(&d, &a, 300, &mut rng::stream(2)).unwrap();
        assert!((x - full).abs() < 0.15);
    }

    #[test]
    fn nmi_cases() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[3, 3, 3], &[7, 7, 7]).unwrap(), 1.0);
        assert_eq!(nmi(&[3, 3, 3], &[1, 2, 1]).unwrap(), 0.0);
        assert!(nmi::<i32, i32>(&[], &[]).is_err());
        assert!(nmi(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn nmi_symmetry_and_relabeling() {
        let mut r = rng::stream(4);
        let a: Vec<u8> = (0..500).map(|_| r.random_range(0..4)).collect();
        let b: Vec<u8> = a.iter().map(|&x| if r.random::<f64>() < 0.3 { r.random_range(0..3) } else { x % 3 }).collect();
        let v = nmi(&a, &b).unwrap();
        assert_eq!(v, nmi(&b, &a).unwrap());
        let relabeled: Vec<u8> = a.iter().map(|&x| [2, 0, 3, 1][x as usize]).collect();
        assert_eq!(nmi(&relabeled, &b).unwrap(), v);
        assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn nmi_random_labels_near_zero() {
        let mut r = rng::stream(5);
        let a: Vec<u8> = (0..10_000).map(|_| r.random_range(0..5)).collect();
        let b: Vec<u8> = (0..10_000).map(|_| r.random_range(0..5)).collect();
        assert!(nmi(&a, &b).unwrap() < 0.01);
    }

    #[test]
    fn loss_ratio_cases() {
        assert_eq!(loss_ratio(2.0, 2.0).unwrap(), 1.0);
        assert!(loss_ratio(1.0, 0.0).is_err());
    }
}
