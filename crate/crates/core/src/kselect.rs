//! Estimating the number of clusters: elbow (knee of the WSS curve), average
//! silhouette, and the gap statistic, combined by majority vote.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{squared_euclidean, Clusterer, DistanceMatrix, Partition};
use crate::error::{Error, Result};
use crate::preprocess::{FeatureMatrix, Matrix};

/// Used by [`majority_k`] when all three estimators disagree: the number of
/// MoSCoW categories.
pub const MOSCOW_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Elbow,
    Silhouette,
    Gap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    /// WSS, mean silhouette, or Gap(k), depending on the method.
    pub score: f64,
    /// Simulation standard error s_k (gap only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub method: Method,
    pub per_k: Vec<KScore>,
    pub chosen_k: usize,
}

/// Σ_c Σ_{i∈c} ‖x_i − μ_c‖², centroids taken from the partition.
pub fn wss(points: &Matrix, partition: &Partition) -> f64 {
    partition
        .labels
        .iter()
        .enumerate()
        .map(|(i, &l)| squared_euclidean(points.row(i), partition.centroids.row(l)))
        .sum()
}

/// s(i) = (b − a) / max(a, b); 0 for a point alone in its cluster.
pub fn silhouette_of(i: usize, dist: &DistanceMatrix, partition: &Partition) -> f64 {
    let own = partition.labels[i];
    let mut sums = vec![0.0; partition.k];
    let mut counts = vec![0usize; partition.k];
    for (j, &l) in partition.labels.iter().enumerate() {
        if j != i {
            sums[l] += dist.get(i, j);
            counts[l] += 1;
        }
    }
    if counts[own] == 0 {
        return 0.0;
    }
    let a = sums[own] / counts[own] as f64;
    let b = (0..partition.k)
        .filter(|&c| c != own && counts[c] > 0)
        .map(|c| sums[c] / counts[c] as f64)
        .fold(f64::INFINITY, f64::min);
    if !b.is_finite() {
        return 0.0;
    }
    let m = a.max(b);
    if m == 0.0 {
        0.0
    } else {
        (b - a) / m
    }
}

/// Mean silhouette over all points.
pub fn mean_silhouette(dist: &DistanceMatrix, partition: &Partition) -> f64 {
    let n = partition.labels.len();
    (0..n).map(|i| silhouette_of(i, dist, partition)).sum::<f64>() / n as f64
}

fn check_range(n: usize, k_min: usize, k_max: usize, floor: usize) -> Result<()> {
    if k_min < floor || k_min > k_max || k_max >= n {
        return Err(Error::InvalidArgument(format!(
            "k range [{k_min}, {k_max}] invalid for {n} points (need {floor} ≤ kMin ≤ kMax ≤ n − 1)"
        )));
    }
    Ok(())
}

fn scan(points: &Matrix, k_min: usize, k_max: usize, clusterer: &dyn Clusterer, seed: u64) -> Result<Vec<Partition>> {
    (k_min..=k_max)
        .into_par_iter()
        .map(|k| clusterer.cluster(points, k, seed))
        .collect()
}

/// Knee of the WSS curve: the interior k farthest below the chord joining the
/// curve's endpoints, with both axes scaled to [0, 1]. Near-ties (within
/// 1e-9) go to the smaller k; with no interior point, kMax.
pub fn elbow_k(
    features: &FeatureMatrix,
    k_min: usize,
    k_max: usize,
    clusterer: &dyn Clusterer,
    seed: u64,
) -> Result<KEstimate> {
    let points = &features.standardized;
    check_range(points.rows(), k_min, k_max, 1)?;
    let curve: Vec<f64> = scan(points, k_min, k_max, clusterer, seed)?
        .iter()
        .map(|p| wss(points, p))
        .collect();
    let per_k = (k_min..=k_max)
        .zip(&curve)
        .map(|(k, &w)| KScore {
            k,
            score: w,
            std_err: None,
        })
        .collect();
    Ok(KEstimate {
        method: Method::Elbow,
        per_k,
        chosen_k: knee(k_min, &curve),
    })
}

pub(crate) fn knee(k_min: usize, curve: &[f64]) -> usize {
    let m = curve.len();
    if m < 3 {
        return k_min + m - 1;
    }
    let (first, last) = (curve[0], curve[m - 1]);
    let span = first - last;
    let mut best_k = k_min + 1;
    let mut best = f64::NEG_INFINITY;
    for (idx, &w) in curve.iter().enumerate().take(m - 1).skip(1) {
        let x = idx as f64 / (m - 1) as f64;
        let y = if span != 0.0 { (w - last) / span } else { 0.0 };
        // chord runs from (0, 1) to (1, 0); distance below it, up to a constant factor
        let below = (1.0 - x) - y;
        if below > best + 1e-9 {
            best = below;
            best_k = k_min + idx;
        }
    }
    best_k
}

/// k maximizing the mean silhouette; ties go to the smaller k.
pub fn silhouette_k(
    features: &FeatureMatrix,
    k_min: usize,
    k_max: usize,
    clusterer: &dyn Clusterer,
    seed: u64,
) -> Result<KEstimate> {
    let points = &features.standardized;
    check_range(points.rows(), k_min, k_max, 2)?;
    let dist = DistanceMatrix::from_points(points);
    let per_k: Vec<KScore> = scan(points, k_min, k_max, clusterer, seed)?
        .iter()
        .map(|p| KScore {
            k: p.k,
            score: mean_silhouette(&dist, p),
            std_err: None,
        })
        .collect();
    let mut chosen = &per_k[0];
    for s in &per_k[1..] {
        if s.score > chosen.score {
            chosen = s;
        }
    }
    Ok(KEstimate {
        method: Method::Silhouette,
        chosen_k: chosen.k,
        per_k,
    })
}

/// Gap(k) = mean_b log W*_kb − log W_k over `bootstrap_b` reference sets drawn
/// uniformly in the bounding box of the data. Chooses the smallest k with
/// Gap(k) ≥ Gap(k+1) − s_{k+1}, where s_k = sd_b(log W*_kb)·√(1 + 1/B).
pub fn gap_k(
    features: &FeatureMatrix,
    k_min: usize,
    k_max: usize,
    clusterer: &dyn Clusterer,
    bootstrap_b: usize,
    seed: u64,
) -> Result<KEstimate> {
    let points = &features.standardized;
    check_range(points.rows(), k_min, k_max, 1)?;
    if bootstrap_b < 10 {
        return Err(Error::InvalidArgument(format!(
            "gap statistic needs B ≥ 10, got {bootstrap_b}"
        )));
    }
    let observed: Vec<f64> = scan(points, k_min, k_max, clusterer, seed)?
        .iter()
        .map(|p| log_w(wss(points, p)))
        .collect();

    let (lo, hi): (Vec<f64>, Vec<f64>) = (0..points.cols())
        .map(|j| {
            points
                .column(j)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
        })
        .unzip();
    // reference[b][k − kMin] = log W*_k for replicate b
    let reference: Vec<Vec<f64>> = (0..bootstrap_b)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64 + 1);
            let sample = uniform_box(points.rows(), &lo, &hi, &mut rng);
            let sub_seed = rng.random::<u64>();
            (k_min..=k_max)
                .map(|k| clusterer.cluster(&sample, k, sub_seed).map(|p| log_w(wss(&sample, &p))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let bf = bootstrap_b as f64;
    let per_k: Vec<KScore> = (k_min..=k_max)
        .enumerate()
        .map(|(idx, k)| {
            let logs: Vec<f64> = reference.iter().map(|r| r[idx]).collect();
            let mean = logs.iter().sum::<f64>() / bf;
            let sd = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (bf - 1.0)).sqrt();
            KScore {
                k,
                score: mean - observed[idx],
                std_err: Some(sd * (1.0 + 1.0 / bf).sqrt()),
            }
        })
        .collect();
    let chosen_k = per_k
        .windows(2)
        .find(|w| w[0].score >= w[1].score - w[1].std_err.unwrap_or(0.0))
        .map_or(k_max, |w| w[0].k);
    Ok(KEstimate {
        method: Method::Gap,
        per_k,
        chosen_k,
    })
}

fn log_w(w: f64) -> f64 {
    // a perfect fit (duplicate points) would give −∞
    w.max(1e-300).ln()
}

fn uniform_box(n: usize, lo: &[f64], hi: &[f64], rng: &mut impl Rng) -> Matrix {
    let d = lo.len();
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        for (j, x) in m.row_mut(i).iter_mut().enumerate() {
            *x = lo[j] + rng.random::<f64>() * (hi[j] - lo[j]);
        }
    }
    m
}

/// The k proposed by at least two of the three estimates, else `fallback`.
pub fn majority_k(estimates: [usize; 3], fallback: usize) -> usize {
    let [a, b, c] = estimates;
    if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        fallback
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{Algorithm, KMeans};

    fn features(rows: &[[f64; 2]]) -> FeatureMatrix {
        FeatureMatrix::from_raw(
            (0..rows.len()).map(|i| format!("p{i}")).collect(),
            vec!["x".into(), "y".into()],
            Matrix::from_rows(rows),
        )
        .unwrap()
    }

    fn blobs(seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres = [[0.0, 0.0], [0.0, 10.0], [10.0, -6.0]];
        let rows: Vec<[f64; 2]> = (0..45)
            .map(|i| {
                let c = centres[i % 3];
                [c[0] + rng.random::<f64>() - 0.5, c[1] + rng.random::<f64>() - 0.5]
            })
            .collect();
        features(&rows)
    }

    #[test]
    fn wss_two_points() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]);
        let p = Partition::from_labels(&pts, &[0, 0], Algorithm::Kmeans, None).unwrap();
        assert_eq!(wss(&pts, &p), 2.0);
        let p = Partition::from_labels(&pts, &[0, 1], Algorithm::Kmeans, None).unwrap();
        assert_eq!(wss(&pts, &p), 0.0);
    }

    #[test]
    fn silhouette_hand_computed() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]);
        let p = Partition::from_labels(&pts, &[0, 0, 1, 1], Algorithm::Kmeans, None).unwrap();
        let dist = DistanceMatrix::from_points(&pts);
        let b = (10.0 + 101f64.sqrt()) / 2.0;
        let expect = (b - 1.0) / b;
        assert!((silhouette_of(0, &dist, &p) - expect).abs() < 1e-12);
        assert!((expect - 0.9002).abs() < 1e-4);
    }

    #[test]
    fn silhouette_singleton_and_balanced() {
        let pts = Matrix::from_rows(&[[0.0], [1.0], [2.0]]);
        let p = Partition::from_labels(&pts, &[0, 1, 1], Algorithm::Kmeans, None).unwrap();
        let dist = DistanceMatrix::from_points(&pts);
        assert_eq!(silhouette_of(0, &dist, &p), 0.0);
        // point 1: a = 1 (to 2), b = 1 (to 0)
        assert_eq!(silhouette_of(1, &dist, &p), 0.0);
    }

    #[test]
    fn knee_of_linear_curve_is_first_interior() {
        assert_eq!(knee(1, &[10.0, 9.0, 8.0, 7.0, 6.0]), 2);
        assert_eq!(knee(2, &[5.0, 4.0]), 3);
    }

    #[test]
    fn knee_of_bent_curve() {
        assert_eq!(knee(1, &[100.0, 50.0, 10.0, 8.0, 7.0, 6.0, 5.0, 4.0]), 3);
    }

    #[test]
    fn blob_estimators_find_three() {
        let f = blobs(3);
        let km = KMeans {
            restarts: 10,
            max_iter: 100,
        };
        assert_eq!(elbow_k(&f, 1, 8, &km, 42).unwrap().chosen_k, 3);
        assert_eq!(silhouette_k(&f, 2, 8, &km, 42).unwrap().chosen_k, 3);
        assert_eq!(gap_k(&f, 1, 8, &km, 20, 42).unwrap().chosen_k, 3);
    }

    #[test]
    fn gap_stable_across_b() {
        let f = blobs(11);
        let km = KMeans {
            restarts: 5,
            max_iter: 100,
        };
        let small = gap_k(&f, 1, 6, &km, 10, 5).unwrap();
        let large = gap_k(&f, 1, 6, &km, 200, 5).unwrap();
        assert_eq!(small.chosen_k, large.chosen_k);
    }

    #[test]
    fn gap_uniform_data_has_no_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rows: Vec<[f64; 2]> = (0..60).map(|_| [rng.random(), rng.random()]).collect();
        let f = features(&rows);
        let est = gap_k(
            &f,
            1,
            8,
            &KMeans {
                restarts: 5,
                max_iter: 100,
            },
            50,
            1,
        )
        .unwrap();
        assert!(est.chosen_k <= 2, "{est:?}");
    }

    #[test]
    fn gap_reproducible() {
        let f = blobs(5);
        let km = KMeans {
            restarts: 3,
            max_iter: 100,
        };
        assert_eq!(
            gap_k(&f, 1, 5, &km, 15, 8).unwrap(),
            gap_k(&f, 1, 5, &km, 15, 8).unwrap()
        );
    }

    #[test]
    fn gap_rejects_small_b() {
        assert!(gap_k(&blobs(1), 1, 5, &KMeans::default(), 9, 0).is_err());
    }

    #[test]
    fn bad_ranges() {
        let f = blobs(1);
        assert!(silhouette_k(&f, 1, 5, &KMeans::default(), 0).is_err());
        assert!(elbow_k(&f, 1, 45, &KMeans::default(), 0).is_err());
    }

    #[test]
    fn majority() {
        assert_eq!(majority_k([3, 3, 4], MOSCOW_K), 3);
        assert_eq!(majority_k([4, 4, 4], MOSCOW_K), 4);
        assert_eq!(majority_k([2, 3, 5], MOSCOW_K), 4);
        assert_eq!(majority_k([5, 2, 2], MOSCOW_K), 2);
        assert_eq!(majority_k([2, 5, 2], MOSCOW_K), 2);
    }
}
