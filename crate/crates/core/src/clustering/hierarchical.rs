//! Agglomerative hierarchical clustering with Lance–Williams updates.
//!
//! Leaves carry ids `0..n` (row order); the cluster formed by merge `s` gets
//! id `n + s`. Each step merges the closest pair of active clusters, ties
//! broken by the smaller id and then the larger. All four linkages are
//! monotone, so merge heights never decrease. Ward works on squared
//! distances internally and reports heights on the distance scale.

use serde::{Deserialize, Serialize};

use super::{check_k, squared_euclidean, Algorithm, Linkage, Partition};
use crate::error::Result;
use crate::preprocess::{FeatureMatrix, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
    /// Leaves in left-to-right drawing order.
    pub leaf_order: Vec<usize>,
}

pub fn hierarchical(features: &FeatureMatrix, linkage: Linkage) -> Result<Dendrogram> {
    hierarchical_points(&features.standardized, linkage)
}

pub fn hierarchical_points(points: &Matrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = points.rows();
    check_k(n, 2, 2)?;
    let squared = linkage == Linkage::Ward;
    // working dissimilarities between slots; slot i starts as leaf i
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let sq = squared_euclidean(points.row(i), points.row(j));
            let v = if squared { sq } else { sq.sqrt() };
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..n {
            if !active[a] {
                continue;
            }
            for b in (a + 1)..n {
                if !active[b] {
                    continue;
                }
                let (lo, hi) = if id[a] < id[b] { (id[a], id[b]) } else { (id[b], id[a]) };
                let cand = (d[a * n + b], lo, hi, a, b);
                let better = match best {
                    None => true,
                    Some(cur) => (cand.0, cand.1, cand.2) < (cur.0, cur.1, cur.2),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (dist, lo, hi, a, b) = best.expect("two active clusters remain");
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let (dka, dkb) = (d[k * n + a], d[k * n + b]);
            let nk = size[k] as f64;
            let v = match linkage {
                Linkage::Single => dka.min(dkb),
                Linkage::Complete => dka.max(dkb),
                Linkage::Average => (na * dka + nb * dkb) / (na + nb),
                Linkage::Ward => ((na + nk) * dka + (nb + nk) * dkb - nk * dist) / (na + nb + nk),
            };
            d[k * n + a] = v;
            d[a * n + k] = v;
        }
        active[b] = false;
        size[a] += size[b];
        id[a] = n + step;
        merges.push(Merge {
            left: lo,
            right: hi,
            height: if squared { dist.max(0.0).sqrt() } else { dist },
            size: size[a],
        });
    }

    let leaf_order = leaf_order(n, &merges);
    Ok(Dendrogram {
        n,
        linkage,
        merges,
        leaf_order,
    })
}

fn leaf_order(n: usize, merges: &[Merge]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut stack = vec![n + merges.len() - 1];
    while let Some(node) = stack.pop() {
        if node < n {
            out.push(node);
        } else {
            let m = &merges[node - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    out
}

/// Undoes the last `k − 1` merges, leaving exactly `k` clusters.
pub fn cut_dendrogram(dendrogram: &Dendrogram, points: &Matrix, k: usize) -> Result<Partition> {
    let n = dendrogram.n;
    check_k(n, k, 1)?;
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (s, m) in dendrogram.merges.iter().take(n - k).enumerate() {
        let node = n + s;
        let l = find(&mut parent, m.left);
        let r = find(&mut parent, m.right);
        parent[l] = node;
        parent[r] = node;
    }
    let labels: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut partition = Partition::from_labels(points, &dense(&labels), Algorithm::Hierarchical, None)?;
    partition.linkage = Some(dendrogram.linkage);
    Ok(partition)
}

fn dense(labels: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(p) => p,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect()
}
