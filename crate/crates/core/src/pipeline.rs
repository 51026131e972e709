//! The end-to-end run: standardize, estimate k, cluster with every algorithm
//! at k = 4 and at the estimated k, run the validity tournament, label the
//! winner's clusters and build a release plan for each analysed k.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::{
    hierarchical, Algorithm, Clusterer, Dendrogram, DistanceMatrix, Hierarchical, KMeans, Linkage, Pam, Partition,
};
use crate::error::{Error, Result};
use crate::kselect::{elbow_k, gap_k, majority_k, silhouette_k, KEstimate, MOSCOW_K};
use crate::model::{DependencyKind, ProblemInstance};
use crate::preprocess::{standardize, FeatureMatrix, EFFORT, SATISFACTION};
use crate::selection::{build_plan, map_moscow, Category, MoscowLabeling, ReleasePlan};
use crate::validity::{tournament, TournamentOutcome, ValidityReport, DEFAULT_CONNECTIVITY_L};
use crate::warning::{Warning, WarningKind};

/// Largest k scanned by the estimators (further capped at n − 1).
pub const DEFAULT_K_MAX: usize = 10;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_GAP_B: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for KChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 2 => Ok(KChoice::Fixed(k)),
            _ => Err(Error::InvalidArgument(format!(
                "k must be `auto` or an integer ≥ 2, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub k: KChoice,
    pub algorithms: Vec<Algorithm>,
    pub linkage: Linkage,
    pub connectivity_l: usize,
    pub gap_b: usize,
    pub k_max: usize,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        let km = KMeans::default();
        PipelineOptions {
            k: KChoice::Auto,
            algorithms: Algorithm::ALL.to_vec(),
            linkage: Linkage::Ward,
            connectivity_l: DEFAULT_CONNECTIVITY_L,
            gap_b: DEFAULT_GAP_B,
            k_max: DEFAULT_K_MAX,
            seed: DEFAULT_SEED,
            kmeans_restarts: km.restarts,
            kmeans_max_iter: km.max_iter,
        }
    }
}

impl PipelineOptions {
    fn kmeans(&self) -> KMeans {
        KMeans {
            restarts: self.kmeans_restarts,
            max_iter: self.kmeans_max_iter,
        }
    }

    fn clusterer(&self, algorithm: Algorithm) -> Box<dyn Clusterer> {
        match algorithm {
            Algorithm::Kmeans => Box::new(self.kmeans()),
            Algorithm::Pam => Box::new(Pam),
            Algorithm::Hierarchical => Box::new(Hierarchical { linkage: self.linkage }),
        }
    }

    fn check(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("at least one algorithm is required".into()));
        }
        if self.connectivity_l == 0 {
            return Err(Error::InvalidArgument("connectivity L must be ≥ 1".into()));
        }
        if self.kmeans_restarts == 0 || self.kmeans_max_iter == 0 {
            return Err(Error::InvalidArgument(
                "k-means needs at least one restart and one iteration".into(),
            ));
        }
        if self.k_max < 2 {
            return Err(Error::InvalidArgument("k_max must be ≥ 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub requirements: usize,
    pub stakeholders: usize,
    pub dependencies: BTreeMap<DependencyKind, usize>,
    pub interactions: usize,
    pub total_effort: f64,
    pub total_satisfaction: f64,
    pub effort_bound: Option<f64>,
}

impl ProblemSummary {
    pub fn of(problem: &ProblemInstance) -> Self {
        let inter = problem.interactions();
        ProblemSummary {
            requirements: problem.len(),
            stakeholders: problem.stakeholders().len(),
            dependencies: [
                DependencyKind::Implication,
                DependencyKind::Combination,
                DependencyKind::Exclusion,
            ]
            .into_iter()
            .map(|k| (k, problem.count_dependencies(k)))
            .collect(),
            interactions: inter.delta_s_entries().count() + inter.delta_e_entries().count(),
            total_effort: problem.total_effort(),
            total_satisfaction: problem.total_satisfaction(),
            effort_bound: problem.effort_bound(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    /// Absent when k was fixed by the caller.
    pub elbow: Option<KEstimate>,
    pub silhouette: Option<KEstimate>,
    pub gap: Option<KEstimate>,
    pub chosen_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub label: usize,
    pub category: Category,
    pub score: f64,
    pub size: usize,
    /// Mean raw (effort, satisfaction) of the members.
    pub centroid: [f64; 2],
    pub centroid_z: [f64; 2],
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub id: String,
    pub effort: f64,
    pub satisfaction: f64,
    pub effort_z: f64,
    pub satisfaction_z: f64,
    pub cluster: usize,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub k: usize,
    pub validity: Vec<ValidityReport>,
    /// Tournament among the algorithms at this k.
    pub tournament: TournamentOutcome,
    /// Algorithm whose partition is labeled (the winner at the chosen k).
    pub algorithm: Algorithm,
    /// Labels of every algorithm's partition, in requirement order.
    pub labels: BTreeMap<Algorithm, Vec<usize>>,
    pub labeling: MoscowLabeling,
    pub clusters: Vec<ClusterSummary>,
    pub points: Vec<ScatterPoint>,
    pub plan: ReleasePlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub summary: ProblemSummary,
    pub options: PipelineOptions,
    pub standardization: Standardization,
    pub k_selection: KSelection,
    /// Winner of the tournament at the chosen k; used for every analysis.
    pub selected_algorithm: Algorithm,
    pub analyses: Vec<Analysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dendrogram: Option<Dendrogram>,
    pub warnings: Vec<Warning>,
}

impl PipelineReport {
    pub fn analysis(&self, k: usize) -> Option<&Analysis> {
        self.analyses.iter().find(|a| a.k == k)
    }

    /// The k = 4 analysis, or the first one when 4 was clamped away.
    pub fn moscow(&self) -> &Analysis {
        self.analysis(MOSCOW_K).unwrap_or(&self.analyses[0])
    }
}

pub fn run_pipeline(problem: &ProblemInstance, options: &PipelineOptions) -> Result<PipelineReport> {
    options.check()?;
    let n = problem.len();
    if n < 3 {
        return Err(Error::DegenerateInput(format!(
            "clustering needs at least 3 requirements, got {n}"
        )));
    }
    let features = standardize(problem).map_err(|e| e.in_stage("standardize"))?;
    let mut warnings = features.warnings.clone();
    let k_cap = n - 1;

    let k_selection = estimate_k(&features, options, k_cap).map_err(|e| e.in_stage("k-estimate"))?;
    let clamp = |k: usize, warnings: &mut Vec<Warning>| {
        if k > k_cap {
            warnings.push(Warning::new(
                WarningKind::KClamped,
                format!("k = {k} exceeds n − 1 = {k_cap}; using {k_cap}"),
            ));
            k_cap
        } else {
            k
        }
    };
    let k_hat = clamp(k_selection.chosen_k, &mut warnings);
    let moscow_k = clamp(MOSCOW_K, &mut warnings);
    let mut ks = vec![moscow_k];
    if k_hat != moscow_k {
        ks.push(k_hat);
    }

    let dist = DistanceMatrix::from_points(&features.standardized);
    let mut runs = Vec::with_capacity(ks.len());
    for &k in &ks {
        let mut partitions = BTreeMap::new();
        let mut validity = Vec::new();
        for &a in &options.algorithms {
            if partitions.contains_key(&a) {
                continue;
            }
            let p = options
                .clusterer(a)
                .cluster(&features.standardized, k, options.seed)
                .map_err(|e| e.in_stage("cluster"))?;
            if p.repairs > 0 {
                warnings.push(Warning::new(
                    WarningKind::EmptyClusterRepair,
                    format!("{a} at k = {k}: {} empty cluster(s) re-seeded", p.repairs),
                ));
            }
            let report = ValidityReport::compute(&features.standardized, &dist, &p, options.connectivity_l)
                .map_err(|e| e.in_stage("validity"))?;
            for i in &report.degenerate {
                warnings.push(Warning::new(
                    WarningKind::DegenerateIndex,
                    format!("{a} at k = {k}: {i:?} is infinite and was excluded from the tournament"),
                ));
            }
            validity.push(report);
            partitions.insert(a, p);
        }
        let outcome = tournament(&validity).map_err(|e| e.in_stage("tournament"))?;
        runs.push((k, partitions, validity, outcome));
    }
    let selected = runs
        .iter()
        .find(|r| r.0 == k_hat)
        .map(|r| r.3.winner)
        .expect("k̂ is always analysed");

    let mut analyses = Vec::with_capacity(runs.len());
    for (k, partitions, validity, outcome) in runs {
        let partition = &partitions[&selected];
        let labeling = map_moscow(partition, &features);
        let plan = build_plan(problem, partition, &labeling, &features).map_err(|e| e.in_stage("plan"))?;
        warnings.extend(plan.warnings.iter().cloned());
        analyses.push(Analysis {
            k,
            clusters: cluster_summaries(partition, &labeling, &features),
            points: scatter(partition, &labeling, &features),
            labels: partitions.iter().map(|(a, p)| (*a, p.labels.clone())).collect(),
            algorithm: selected,
            validity,
            tournament: outcome,
            labeling,
            plan,
        });
    }

    let dendrogram = if options.algorithms.contains(&Algorithm::Hierarchical) {
        Some(hierarchical(&features, options.linkage).map_err(|e| e.in_stage("cluster"))?)
    } else {
        None
    };
    Ok(PipelineReport {
        summary: ProblemSummary::of(problem),
        options: options.clone(),
        standardization: Standardization {
            columns: features.columns.clone(),
            means: features.means.clone(),
            std_devs: features.std_devs.clone(),
        },
        k_selection,
        selected_algorithm: selected,
        analyses,
        dendrogram,
        warnings,
    })
}

fn estimate_k(features: &FeatureMatrix, options: &PipelineOptions, k_cap: usize) -> Result<KSelection> {
    if let KChoice::Fixed(k) = options.k {
        return Ok(KSelection {
            elbow: None,
            silhouette: None,
            gap: None,
            chosen_k: k,
        });
    }
    let k_max = options.k_max.min(k_cap);
    let km = options.kmeans();
    let elbow = elbow_k(features, 1, k_max, &km, options.seed)?;
    let silhouette = silhouette_k(features, 2, k_max, &km, options.seed)?;
    let gap = gap_k(features, 1, k_max, &km, options.gap_b, options.seed)?;
    let chosen_k = majority_k([elbow.chosen_k, silhouette.chosen_k, gap.chosen_k], MOSCOW_K);
    Ok(KSelection {
        elbow: Some(elbow),
        silhouette: Some(silhouette),
        gap: Some(gap),
        chosen_k,
    })
}

fn cluster_summaries(
    partition: &Partition,
    labeling: &MoscowLabeling,
    features: &FeatureMatrix,
) -> Vec<ClusterSummary> {
    partition
        .members()
        .into_iter()
        .enumerate()
        .map(|(c, rows)| {
            let size = rows.len();
            let mean = |col: usize| rows.iter().map(|&i| features.raw.get(i, col)).sum::<f64>() / size as f64;
            let z = partition.centroids.row(c);
            ClusterSummary {
                label: c,
                category: labeling.category_of[c],
                score: labeling.score_of[c],
                size,
                centroid: [mean(EFFORT), mean(SATISFACTION)],
                centroid_z: [z[EFFORT], z[SATISFACTION]],
                members: rows.iter().map(|&i| features.ids[i].clone()).collect(),
            }
        })
        .collect()
}

fn scatter(partition: &Partition, labeling: &MoscowLabeling, features: &FeatureMatrix) -> Vec<ScatterPoint> {
    features
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let c = partition.labels[i];
            ScatterPoint {
                id: id.clone(),
                effort: features.raw.get(i, EFFORT),
                satisfaction: features.raw.get(i, SATISFACTION),
                effort_z: features.standardized.get(i, EFFORT),
                satisfaction_z: features.standardized.get(i, SATISFACTION),
                cluster: c,
                category: labeling.category_of[c],
            }
        })
        .collect()
}
