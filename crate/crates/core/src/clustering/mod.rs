//! Clustering over standardized feature space: k-means, PAM and agglomerative
//! hierarchical clustering, all on Euclidean distance.
//!
//! Every algorithm is a deterministic function of its inputs. Randomness
//! (k-means seeding only) comes from a ChaCha stream keyed by the caller's
//! seed, and every tie is broken towards the lowest row index. Rows follow the
//! canonical requirement id order of the [`FeatureMatrix`].

mod distance;
mod hierarchical;
mod kmeans;
mod pam;

use serde::{Deserialize, Serialize};

pub use distance::{euclidean, euclidean_distance_matrix, squared_euclidean, DistanceMatrix};
pub use hierarchical::{cut_dendrogram, hierarchical, hierarchical_points, Dendrogram, Merge};
pub use kmeans::{kmeans, kmeans_points, KMeansRun};
pub use pam::{pam, pam_points, total_dissimilarity};

use crate::error::{Error, Result};
use crate::preprocess::{FeatureMatrix, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Kmeans,
    Pam,
    Hierarchical,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Kmeans, Algorithm::Pam, Algorithm::Hierarchical];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::Pam => "pam",
            Algorithm::Hierarchical => "hierarchical",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(Algorithm::Kmeans),
            "pam" | "kmedoids" => Ok(Algorithm::Pam),
            "hierarchical" | "hclust" => Ok(Algorithm::Hierarchical),
            other => Err(Error::InvalidArgument(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Ward,
    Average,
    Complete,
    Single,
}

impl Linkage {
    pub fn name(self) -> &'static str {
        match self {
            Linkage::Ward => "ward",
            Linkage::Average => "average",
            Linkage::Complete => "complete",
            Linkage::Single => "single",
        }
    }
}

impl std::str::FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ward" | "ward.d2" => Ok(Linkage::Ward),
            "average" | "upgma" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            other => Err(Error::InvalidArgument(format!("unknown linkage {other:?}"))),
        }
    }
}

/// An assignment of every row to exactly one of `k` non-empty clusters.
///
/// Labels are 0-based and canonical: clusters are numbered in order of their
/// first member's row, so two partitions that group rows identically compare
/// equal regardless of how the algorithm numbered them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    /// Row index of each cluster's medoid (PAM only).
    pub medoids: Option<Vec<usize>>,
    pub algorithm: Algorithm,
    pub linkage: Option<Linkage>,
    pub seed: u64,
    pub iterations: usize,
    /// Number of empty clusters re-seeded during k-means.
    pub repairs: usize,
}

impl Partition {
    /// Builds a canonical partition from arbitrary labels. `medoids`, when
    /// given, is indexed by the incoming label.
    pub fn from_labels(
        points: &Matrix,
        labels: &[usize],
        algorithm: Algorithm,
        medoids: Option<&[usize]>,
    ) -> Result<Self> {
        if labels.len() != points.rows() {
            return Err(Error::InvalidArgument("one label per point is required".into()));
        }
        let mut remap: Vec<Option<usize>> = Vec::new();
        let mut canonical = Vec::with_capacity(labels.len());
        let mut next = 0;
        for &l in labels {
            if l >= remap.len() {
                remap.resize(l + 1, None);
            }
            let c = *remap[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            });
            canonical.push(c);
        }
        let k = next;
        let medoids = medoids.map(|m| {
            let mut out = vec![0; k];
            for (old, &row) in m.iter().enumerate() {
                if let Some(Some(c)) = remap.get(old) {
                    out[*c] = row;
                }
            }
            out
        });
        Ok(Partition {
            k,
            centroids: centroids(points, &canonical, k),
            labels: canonical,
            medoids,
            algorithm,
            linkage: None,
            seed: 0,
            iterations: 0,
            repairs: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Row indices of each cluster, in row order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

/// Arithmetic mean of the rows of each cluster.
pub fn centroids(points: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let d = points.cols();
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.as_slice().chunks_exact(d.max(1)).zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l * d..(l + 1) * d].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (row, &n) in sums.chunks_exact_mut(d.max(1)).zip(&counts) {
        if n > 0 {
            for s in row {
                *s /= n as f64;
            }
        }
    }
    Matrix::from_vec(k, d, sums)
}

/// A clustering procedure usable wherever a k must be scanned.
pub trait Clusterer: Sync {
    fn algorithm(&self) -> Algorithm;

    fn cluster(&self, points: &Matrix, k: usize, seed: u64) -> Result<Partition>;

    fn cluster_features(&self, features: &FeatureMatrix, k: usize, seed: u64) -> Result<Partition> {
        self.cluster(&features.standardized, k, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeans {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeans {
    fn default() -> Self {
        KMeans {
            restarts: 25,
            max_iter: 100,
        }
    }
}

impl Clusterer for KMeans {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Kmeans
    }

    fn cluster(&self, points: &Matrix, k: usize, seed: u64) -> Result<Partition> {
        kmeans_points(points, k, seed, self.restarts, self.max_iter)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pam;

impl Clusterer for Pam {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Pam
    }

    fn cluster(&self, points: &Matrix, k: usize, _seed: u64) -> Result<Partition> {
        pam_points(points, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hierarchical {
    pub linkage: Linkage,
}

impl Clusterer for Hierarchical {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Hierarchical
    }

    fn cluster(&self, points: &Matrix, k: usize, _seed: u64) -> Result<Partition> {
        check_k(points.rows(), k, 1)?;
        cut_dendrogram(&hierarchical_points(points, self.linkage)?, points, k)
    }
}

pub(crate) fn check_k(n: usize, k: usize, min_k: usize) -> Result<()> {
    if k < min_k || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside [{min_k}, {n}]")));
    }
    Ok(())
}
