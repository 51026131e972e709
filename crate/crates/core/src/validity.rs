//! Internal validity indexes (connectivity, Dunn, silhouette,
//! Calinski–Harabasz) and the per-index tournament between algorithms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::{squared_euclidean, Algorithm, DistanceMatrix, Partition};
use crate::error::{Error, Result};
use crate::kselect::{mean_silhouette, wss};
use crate::preprocess::Matrix;

/// Neighbourhood size for connectivity when none is given.
pub const DEFAULT_CONNECTIVITY_L: usize = 10;

/// Σ_i Σ_{j ≤ L} 1/j over the j-th nearest neighbours of i that sit in a
/// different cluster. Neighbours are ranked by distance, then by row index.
pub fn connectivity(dist: &DistanceMatrix, partition: &Partition, l: usize) -> Result<f64> {
    let n = dist.len();
    if l == 0 || l >= n {
        return Err(Error::InvalidArgument(format!(
            "connectivity L = {l} outside [1, {}]",
            n - 1
        )));
    }
    let mut total = 0.0;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| dist.get(i, a).total_cmp(&dist.get(i, b)).then(a.cmp(&b)));
        for (rank, &j) in order.iter().take(l).enumerate() {
            if partition.labels[j] != partition.labels[i] {
                total += 1.0 / (rank + 1) as f64;
            }
        }
    }
    Ok(total)
}

/// Minimum inter-cluster point distance over maximum cluster diameter.
/// Infinite when every cluster is a single point (or a stack of duplicates).
pub fn dunn(dist: &DistanceMatrix, partition: &Partition) -> Result<f64> {
    need_two_clusters(partition)?;
    let n = dist.len();
    let mut separation = f64::INFINITY;
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist.get(i, j);
            if partition.labels[i] == partition.labels[j] {
                diameter = diameter.max(d);
            } else {
                separation = separation.min(d);
            }
        }
    }
    Ok(if diameter == 0.0 {
        f64::INFINITY
    } else {
        separation / diameter
    })
}

/// Mean silhouette width.
pub fn silhouette_index(dist: &DistanceMatrix, partition: &Partition) -> Result<f64> {
    need_two_clusters(partition)?;
    Ok(mean_silhouette(dist, partition))
}

/// [B/(k − 1)] / [W/(n − k)] with B = Σ_c |c|·‖μ_c − μ‖² and W the WSS.
/// Infinite when W = 0.
pub fn calinski_harabasz(points: &Matrix, partition: &Partition) -> Result<f64> {
    let (n, k) = (partition.labels.len(), partition.k);
    if k < 2 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "Calinski–Harabasz needs 2 ≤ k ≤ n − 1, got k = {k}, n = {n}"
        )));
    }
    let mut grand = vec![0.0; points.cols()];
    for row in points.iter_rows() {
        for (g, x) in grand.iter_mut().zip(row) {
            *g += x;
        }
    }
    grand.iter_mut().for_each(|g| *g /= n as f64);
    let between: f64 = partition
        .sizes()
        .iter()
        .enumerate()
        .map(|(c, &size)| size as f64 * squared_euclidean(partition.centroids.row(c), &grand))
        .sum();
    let within = wss(points, partition);
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

fn need_two_clusters(partition: &Partition) -> Result<()> {
    if partition.k < 2 {
        return Err(Error::InvalidArgument("index needs at least 2 clusters".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Index {
    Connectivity,
    Dunn,
    Silhouette,
    CalinskiHarabasz,
}

impl Index {
    pub const ALL: [Index; 4] = [
        Index::Connectivity,
        Index::Dunn,
        Index::Silhouette,
        Index::CalinskiHarabasz,
    ];

    pub fn lower_is_better(self) -> bool {
        self == Index::Connectivity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub algorithm: Algorithm,
    pub k: usize,
    pub connectivity: f64,
    #[serde(with = "crate::report::maybe_infinite")]
    pub dunn: f64,
    pub silhouette: f64,
    #[serde(with = "crate::report::maybe_infinite")]
    pub calinski_harabasz: f64,
    /// Indexes that hit an infinite sentinel (zero diameter or zero WSS).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<Index>,
}

impl ValidityReport {
    pub fn compute(points: &Matrix, dist: &DistanceMatrix, partition: &Partition, l: usize) -> Result<Self> {
        let report = ValidityReport {
            algorithm: partition.algorithm,
            k: partition.k,
            connectivity: connectivity(dist, partition, l.min(dist.len() - 1))?,
            dunn: dunn(dist, partition)?,
            silhouette: silhouette_index(dist, partition)?,
            calinski_harabasz: calinski_harabasz(points, partition)?,
            degenerate: Vec::new(),
        };
        let degenerate = Index::ALL
            .into_iter()
            .filter(|&i| report.value(i).is_infinite())
            .collect();
        Ok(ValidityReport { degenerate, ..report })
    }

    pub fn value(&self, index: Index) -> f64 {
        match index {
            Index::Connectivity => self.connectivity,
            Index::Dunn => self.dunn,
            Index::Silhouette => self.silhouette,
            Index::CalinskiHarabasz => self.calinski_harabasz,
        }
    }
}

/// Fixed preference among algorithms when nothing else separates them.
pub const PREFERENCE: [Algorithm; 3] = [Algorithm::Pam, Algorithm::Kmeans, Algorithm::Hierarchical];

fn preference_rank(a: Algorithm) -> usize {
    PREFERENCE.iter().position(|&p| p == a).unwrap_or(PREFERENCE.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentOutcome {
    pub k: usize,
    pub winner: Algorithm,
    /// Winning algorithm of each index; absent when every candidate's value
    /// for that index was a degenerate sentinel.
    pub index_winners: BTreeMap<Index, Algorithm>,
    pub wins: BTreeMap<Algorithm, usize>,
    /// Set when two or more algorithms shared the highest win count.
    pub tie_broken_by: Option<TieBreak>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<(Algorithm, Index)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    SilhouetteWinner,
    DunnWinner,
    FixedOrder,
}

/// Awards each index to its best algorithm (lowest connectivity, highest for
/// the others) and picks the algorithm with most wins.
///
/// Infinite sentinels never take an index. Equal index values go to the
/// algorithm earlier in [`PREFERENCE`]. A tie in wins goes to the silhouette
/// winner if it is among the tied, then the Dunn winner, then [`PREFERENCE`].
pub fn tournament(reports: &[ValidityReport]) -> Result<TournamentOutcome> {
    let Some(first) = reports.first() else {
        return Err(Error::InvalidArgument("tournament needs at least one report".into()));
    };
    if reports.iter().any(|r| r.k != first.k) {
        return Err(Error::InvalidArgument("tournament reports must share k".into()));
    }
    let mut index_winners = BTreeMap::new();
    let mut degenerate = Vec::new();
    for index in Index::ALL {
        let mut best: Option<&ValidityReport> = None;
        for r in reports {
            let v = r.value(index);
            if !v.is_finite() {
                degenerate.push((r.algorithm, index));
                continue;
            }
            best = match best {
                None => Some(r),
                Some(b) => {
                    let bv = b.value(index);
                    let better = if index.lower_is_better() { v < bv } else { v > bv };
                    let tie_pref = v == bv && preference_rank(r.algorithm) < preference_rank(b.algorithm);
                    Some(if better || tie_pref { r } else { b })
                }
            };
        }
        if let Some(b) = best {
            index_winners.insert(index, b.algorithm);
        }
    }
    let mut wins: BTreeMap<Algorithm, usize> = reports.iter().map(|r| (r.algorithm, 0)).collect();
    for a in index_winners.values() {
        *wins.get_mut(a).expect("winner is a candidate") += 1;
    }
    let top = *wins.values().max().expect("non-empty");
    let tied: Vec<Algorithm> = wins.iter().filter(|(_, &w)| w == top).map(|(&a, _)| a).collect();
    let (winner, tie_broken_by) = if tied.len() == 1 {
        (tied[0], None)
    } else if let Some(a) = index_winners.get(&Index::Silhouette).filter(|a| tied.contains(a)) {
        (*a, Some(TieBreak::SilhouetteWinner))
    } else if let Some(a) = index_winners.get(&Index::Dunn).filter(|a| tied.contains(a)) {
        (*a, Some(TieBreak::DunnWinner))
    } else {
        let a = *tied.iter().min_by_key(|a| preference_rank(**a)).expect("non-empty");
        (a, Some(TieBreak::FixedOrder))
    };
    Ok(TournamentOutcome {
        k: first.k,
        winner,
        index_winners,
        wins,
        tie_broken_by,
        degenerate,
    })
}
