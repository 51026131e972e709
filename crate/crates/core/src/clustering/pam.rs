//! Partitioning Around Medoids: greedy BUILD followed by steepest-descent SWAP.

use super::{check_k, Algorithm, DistanceMatrix, Partition};
use crate::error::Result;
use crate::preprocess::{FeatureMatrix, Matrix};

pub fn pam(features: &FeatureMatrix, k: usize) -> Result<Partition> {
    pam_points(&features.standardized, k)
}

pub fn pam_points(points: &Matrix, k: usize) -> Result<Partition> {
    check_k(points.rows(), k, 1)?;
    let dist = DistanceMatrix::from_points(points);
    let mut medoids = build(&dist, k);
    let iterations = swap(&dist, &mut medoids);
    medoids.sort_unstable();
    let labels = nearest_labels(&dist, &medoids);
    let mut partition = Partition::from_labels(points, &labels, Algorithm::Pam, Some(&medoids))?;
    partition.iterations = iterations;
    Ok(partition)
}

/// Sum over points of the distance to their nearest medoid.
pub fn total_dissimilarity(dist: &DistanceMatrix, medoids: &[usize]) -> f64 {
    (0..dist.len())
        .map(|j| medoids.iter().map(|&m| dist.get(j, m)).fold(f64::INFINITY, f64::min))
        .sum()
}

fn build(dist: &DistanceMatrix, k: usize) -> Vec<usize> {
    let n = dist.len();
    let first = (0..n)
        .map(|i| (i, dist.row(i).iter().sum::<f64>()))
        .fold(
            (0, f64::INFINITY),
            |best, (i, c)| if c < best.1 { (i, c) } else { best },
        )
        .0;
    let mut medoids = vec![first];
    let mut is_medoid = vec![false; n];
    is_medoid[first] = true;
    let mut nearest: Vec<f64> = (0..n).map(|j| dist.get(j, first)).collect();
    while medoids.len() < k {
        let mut best = None;
        let mut best_gain = f64::NEG_INFINITY;
        for i in (0..n).filter(|&i| !is_medoid[i]) {
            let gain: f64 = (0..n).map(|j| (nearest[j] - dist.get(j, i)).max(0.0)).sum();
            if gain > best_gain {
                best_gain = gain;
                best = Some(i);
            }
        }
        let i = best.expect("k ≤ n leaves a candidate");
        medoids.push(i);
        is_medoid[i] = true;
        for (j, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist.get(j, i));
        }
    }
    medoids
}

/// Applies the best cost-reducing medoid/non-medoid exchange until none
/// remains. Returns the number of swaps performed.
fn swap(dist: &DistanceMatrix, medoids: &mut [usize]) -> usize {
    let n = dist.len();
    let k = medoids.len();
    if k == n {
        return 0;
    }
    let mut swaps = 0;
    loop {
        // nearest and second-nearest medoid distance per point
        let mut near = vec![(usize::MAX, f64::INFINITY); n];
        let mut second = vec![f64::INFINITY; n];
        for j in 0..n {
            for (slot, &m) in medoids.iter().enumerate() {
                let d = dist.get(j, m);
                if d < near[j].1 {
                    second[j] = near[j].1;
                    near[j] = (slot, d);
                } else if d < second[j] {
                    second[j] = d;
                }
            }
        }
        let cost: f64 = near.iter().map(|x| x.1).sum();
        let mut best_delta = 0.0;
        let mut best = None;
        for slot in 0..k {
            for h in 0..n {
                if medoids.contains(&h) {
                    continue;
                }
                let mut delta = 0.0;
                for j in 0..n {
                    let dh = dist.get(j, h);
                    let (ns, nd) = near[j];
                    delta += if ns == slot {
                        dh.min(second[j]) - nd
                    } else {
                        dh.min(nd) - nd
                    };
                }
                if delta < best_delta {
                    best_delta = delta;
                    best = Some((slot, h));
                }
            }
        }
        // ignore improvements lost in rounding so the loop cannot cycle
        match best {
            Some((slot, h)) if best_delta < -1e-12 * (1.0 + cost) => {
                medoids[slot] = h;
                swaps += 1;
            }
            _ => return swaps,
        }
    }
}

fn nearest_labels(dist: &DistanceMatrix, medoids: &[usize]) -> Vec<usize> {
    (0..dist.len())
        .map(|j| {
            // a medoid always belongs to its own cluster
            if let Some(c) = medoids.iter().position(|&m| m == j) {
                return c;
            }
            let mut best = 0;
            for c in 1..medoids.len() {
                if dist.get(j, medoids[c]) < dist.get(j, medoids[best]) {
                    best = c;
                }
            }
            best
        })
        .collect()
}
