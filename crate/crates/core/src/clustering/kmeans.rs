//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{centroids, check_k, squared_euclidean, Algorithm, Partition};
use crate::error::Result;
use crate::preprocess::{FeatureMatrix, Matrix};

/// Outcome of a single restart.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub labels: Vec<usize>,
    pub wss: f64,
    pub iterations: usize,
    pub repairs: usize,
    /// WSS after each assignment step; non-increasing.
    pub trace: Vec<f64>,
}

pub fn kmeans(features: &FeatureMatrix, k: usize, seed: u64, restarts: usize, max_iter: usize) -> Result<Partition> {
    kmeans_points(&features.standardized, k, seed, restarts, max_iter)
}

/// Runs `restarts` independent seeded restarts and keeps the lowest WSS,
/// preferring the earliest restart on ties. Restart `r` draws from stream `r`
/// of a ChaCha8 generator keyed by `seed`.
pub fn kmeans_points(points: &Matrix, k: usize, seed: u64, restarts: usize, max_iter: usize) -> Result<Partition> {
    check_k(points.rows(), k, 1)?;
    let restarts = if k == 1 { 1 } else { restarts.max(1) };
    let mut best: Option<KMeansRun> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let init = plus_plus(points, k, &mut rng);
        let run = lloyd(points, init, max_iter);
        if best.as_ref().is_none_or(|b| run.wss < b.wss) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let mut partition = Partition::from_labels(points, &best.labels, Algorithm::Kmeans, None)?;
    partition.seed = seed;
    partition.iterations = best.iterations;
    partition.repairs = best.repairs;
    Ok(partition)
}

/// k-means++ seeding: first centre uniform, then each next centre drawn with
/// probability proportional to squared distance to the nearest chosen centre.
pub(crate) fn plus_plus(points: &Matrix, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| squared_euclidean(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if *d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target at the very end of the range
            pick.unwrap_or_else(|| nearest.iter().rposition(|d| *d > 0.0).expect("positive total"))
        } else {
            // every point coincides with a centre; any unchosen row will do
            (0..n).find(|i| !chosen.contains(i)).expect("k ≤ n")
        };
        chosen.push(next);
        let centre = points.row(next);
        for (d, p) in nearest
            .iter_mut()
            .zip(points.as_slice().chunks_exact(centre.len().max(1)))
        {
            *d = d.min(squared_euclidean(p, centre));
        }
    }
    let rows: Vec<&[f64]> = chosen.iter().map(|&i| points.row(i)).collect();
    Matrix::from_rows(&rows)
}

pub(crate) fn lloyd(points: &Matrix, init: Matrix, max_iter: usize) -> KMeansRun {
    let k = init.rows();
    let mut centres = init;
    let mut labels = assign(points, &centres);
    let mut repairs = repair_empty(points, &mut centres, &mut labels);
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        // WSS of the current labels against their own means, which are also
        // the centres of the next assignment step
        centres = centroids(points, &labels, k);
        trace.push(wss_of(points, &labels, &centres));
        if iterations == max_iter {
            break;
        }
        iterations += 1;
        let mut next = assign(points, &centres);
        repairs += repair_empty(points, &mut centres, &mut next);
        if next == labels {
            break;
        }
        labels = next;
    }
    KMeansRun {
        wss: *trace.last().expect("non-empty trace"),
        labels,
        iterations,
        repairs,
        trace,
    }
}

fn assign(points: &Matrix, centres: &Matrix) -> Vec<usize> {
    // the feature space is almost always (effort, satisfaction)
    match points.cols() {
        2 => assign_fixed::<2>(points, centres),
        _ => assign_rows(points, centres),
    }
}

fn assign_rows(points: &Matrix, centres: &Matrix) -> Vec<usize> {
    let d = points.cols().max(1);
    let centres = centres.as_slice();
    points
        .as_slice()
        .chunks_exact(d)
        .map(|p| nearest(centres.chunks_exact(d).map(|q| squared_euclidean(p, q))))
        .collect()
}

fn assign_fixed<const D: usize>(points: &Matrix, centres: &Matrix) -> Vec<usize> {
    let (pts, _) = points.as_slice().as_chunks::<D>();
    let (cs, _) = centres.as_slice().as_chunks::<D>();
    pts.iter()
        .map(|p| nearest(cs.iter().map(|q| squared_euclidean(p, q))))
        .collect()
}

/// Index of the first minimum.
#[inline]
fn nearest(dists: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, d) in dists.enumerate() {
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Moves the point farthest from its centre into each empty cluster, taking
/// only from clusters that keep at least one member.
fn repair_empty(points: &Matrix, centres: &mut Matrix, labels: &mut [usize]) -> usize {
    let k = centres.rows();
    let mut repairs = 0;
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return repairs;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for i in 0..points.rows() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            let d = squared_euclidean(points.row(i), centres.row(labels[i]));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k ≤ n leaves a cluster with two members");
        labels[i] = empty;
        centres.row_mut(empty).copy_from_slice(points.row(i));
        repairs += 1;
    }
}

fn wss_of(points: &Matrix, labels: &[usize], centres: &Matrix) -> f64 {
    let d = points.cols().max(1);
    let c = centres.as_slice();
    points
        .as_slice()
        .chunks_exact(d)
        .zip(labels)
        .map(|(p, &l)| squared_euclidean(p, &c[l * d..(l + 1) * d]))
        .sum()
}
