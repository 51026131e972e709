//! From clusters to a release: MoSCoW labeling of clusters, the core set,
//! dependency closure into a viable product, and the plan totals.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::clustering::Partition;
use crate::error::{Error, Result};
use crate::ids::id_cmp;
use crate::model::{DependencyKind, ProblemInstance};
use crate::preprocess::{FeatureMatrix, EFFORT, SATISFACTION};
use crate::warning::{Warning, WarningKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Must,
    Should,
    Could,
    Wont,
    Extra,
}

impl Category {
    const RANKED: [Category; 4] = [Category::Must, Category::Should, Category::Could, Category::Wont];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoscowLabeling {
    /// Category of each cluster, indexed by cluster label.
    pub category_of: Vec<Category>,
    /// satisfaction_z − effort_z of each cluster centroid.
    pub score_of: Vec<f64>,
}

impl MoscowLabeling {
    pub fn must_cluster(&self) -> usize {
        self.category_of
            .iter()
            .position(|c| *c == Category::Must)
            .expect("a labeling always has a Must cluster")
    }
}

/// Ranks clusters by centroid satisfaction_z − effort_z and hands out Must,
/// Should, Could, Won't in that order; clusters beyond the fourth are Extra.
/// Equal scores go to the higher-satisfaction centroid, then the lower label.
pub fn map_moscow(partition: &Partition, features: &FeatureMatrix) -> MoscowLabeling {
    let score_of: Vec<f64> = (0..partition.k)
        .map(|c| {
            let row = partition.centroids.row(c);
            row[SATISFACTION] - row[EFFORT]
        })
        .collect();
    debug_assert_eq!(features.dim(), partition.centroids.cols());
    let mut order: Vec<usize> = (0..partition.k).collect();
    order.sort_by(|&a, &b| {
        score_of[b]
            .total_cmp(&score_of[a])
            .then_with(|| partition.centroids.row(b)[SATISFACTION].total_cmp(&partition.centroids.row(a)[SATISFACTION]))
            .then(a.cmp(&b))
    });
    let mut category_of = vec![Category::Extra; partition.k];
    for (rank, &c) in order.iter().enumerate() {
        if let Some(cat) = Category::RANKED.get(rank) {
            category_of[c] = *cat;
        }
    }
    MoscowLabeling { category_of, score_of }
}

/// Ids of the requirements in the Must cluster.
pub fn core_set(labeling: &MoscowLabeling, partition: &Partition, features: &FeatureMatrix) -> BTreeSet<ReqId> {
    let must = labeling.must_cluster();
    partition
        .labels
        .iter()
        .zip(&features.ids)
        .filter(|(l, _)| **l == must)
        .map(|(_, id)| ReqId(id.clone()))
        .collect()
}

/// Requirement id ordered by [`id_cmp`], so sets print as r1, r2, …, r10.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReqId(pub String);

impl Ord for ReqId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        id_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for ReqId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for ReqId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ReqId {
    fn from(s: &str) -> Self {
        ReqId(s.to_owned())
    }
}

pub fn id_set<'a>(ids: impl IntoIterator<Item = &'a str>) -> BTreeSet<ReqId> {
    ids.into_iter().map(ReqId::from).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Conflict {
    /// Both members of an exclusion pair are selected.
    Exclusion { a: String, b: String },
    /// Closure needed `required` (because of `dependency`) but it is blocked.
    Blocked {
        required: String,
        by: String,
        dependency: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Closure {
    pub viable: BTreeSet<ReqId>,
    pub added: BTreeSet<ReqId>,
    pub conflicts: Vec<Conflict>,
}

/// Smallest superset of `seed` closed under implication (every prerequisite
/// of a selected requirement is selected) and combination (partners travel
/// together). Exclusion pairs inside the result are reported, not resolved.
pub fn close_dependencies(seed: &BTreeSet<ReqId>, problem: &ProblemInstance) -> Result<Closure> {
    close_with_blocked(seed, &BTreeSet::new(), problem)
}

/// Like [`close_dependencies`], but requirements in `blocked` are never added;
/// each dependency that would have pulled one in becomes a
/// [`Conflict::Blocked`]. Blocked ids in `seed` are dropped first.
pub fn close_with_blocked(
    seed: &BTreeSet<ReqId>,
    blocked: &BTreeSet<ReqId>,
    problem: &ProblemInstance,
) -> Result<Closure> {
    let n = problem.len();
    let ids: Vec<&str> = problem.ids().collect();
    // needs[j]: what selecting j drags in, with the dependency responsible
    let mut needs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut exclusions = Vec::new();
    for (di, d) in problem.dependencies().iter().enumerate() {
        let (f, t) = (index(problem, &d.from)?, index(problem, &d.to)?);
        match d.kind {
            DependencyKind::Implication => needs[t].push((f, di)),
            DependencyKind::Combination => {
                needs[f].push((t, di));
                needs[t].push((f, di));
            }
            DependencyKind::Exclusion => exclusions.push((f, t)),
        }
    }
    let mut is_blocked = vec![false; n];
    for b in blocked {
        is_blocked[index(problem, &b.0)?] = true;
    }
    let mut selected = vec![false; n];
    let mut queue = VecDeque::new();
    for s in seed {
        let i = index(problem, &s.0)?;
        if !is_blocked[i] && !selected[i] {
            selected[i] = true;
            queue.push_back(i);
        }
    }
    let in_seed = selected.clone();
    let mut blocked_hits = BTreeSet::new();
    while let Some(j) = queue.pop_front() {
        for &(i, di) in &needs[j] {
            if is_blocked[i] {
                blocked_hits.insert((i, j, di));
            } else if !selected[i] {
                selected[i] = true;
                queue.push_back(i);
            }
        }
    }
    let mut conflicts: Vec<Conflict> = exclusions
        .iter()
        .filter(|(a, b)| selected[*a] && selected[*b])
        .map(|&(a, b)| Conflict::Exclusion {
            a: ids[a].to_owned(),
            b: ids[b].to_owned(),
        })
        .collect();
    conflicts.extend(blocked_hits.into_iter().map(|(i, j, di)| Conflict::Blocked {
        required: ids[i].to_owned(),
        by: ids[j].to_owned(),
        dependency: problem.dependencies()[di].to_string(),
    }));
    let pick = |keep: &dyn Fn(usize) -> bool| -> BTreeSet<ReqId> {
        (0..n).filter(|&i| keep(i)).map(|i| ReqId::from(ids[i])).collect()
    };
    Ok(Closure {
        viable: pick(&|i| selected[i]),
        added: pick(&|i| selected[i] && !in_seed[i]),
        conflicts,
    })
}

fn index(problem: &ProblemInstance, id: &str) -> Result<usize> {
    problem.index_of(id).ok_or_else(|| Error::UnknownId(id.to_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub effort: f64,
    pub satisfaction: f64,
}

/// Σ e_j + Σ_{i<j} ΔE_ij and Σ s_j + Σ_{i<j} ΔS_ij over the selection.
pub fn adjusted_totals(selection: &BTreeSet<ReqId>, problem: &ProblemInstance) -> Result<(Totals, Vec<Warning>)> {
    let mut effort = 0.0;
    let mut satisfaction = 0.0;
    for id in selection {
        let i = index(problem, &id.0)?;
        effort += problem.requirements()[i].effort;
        satisfaction += problem.satisfaction()[i];
    }
    let inter = problem.interactions();
    for (a, b, d) in inter.delta_e_entries() {
        if selection.contains(&ReqId::from(a)) && selection.contains(&ReqId::from(b)) {
            effort += d;
        }
    }
    for (a, b, d) in inter.delta_s_entries() {
        if selection.contains(&ReqId::from(a)) && selection.contains(&ReqId::from(b)) {
            satisfaction += d;
        }
    }
    let mut warnings = Vec::new();
    if effort < 0.0 || satisfaction < 0.0 {
        warnings.push(Warning::new(
            WarningKind::NegativeTotal,
            format!("interaction-adjusted totals went negative (effort {effort}, satisfaction {satisfaction})"),
        ));
    }
    Ok((Totals { effort, satisfaction }, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub core_effort: f64,
    pub core_satisfaction: f64,
    pub viable_effort: f64,
    pub viable_satisfaction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeIncrease {
    /// `None` when the core total is 0.
    pub effort: Option<f64>,
    pub satisfaction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleasePlan {
    pub core_set: BTreeSet<ReqId>,
    pub added_by_closure: BTreeSet<ReqId>,
    pub conflicts: Vec<Conflict>,
    pub core: Totals,
    pub viable: Totals,
    /// Plain sums over every requirement, without interaction terms; the
    /// coverage denominators.
    pub instance: Totals,
    /// Percentages of the instance totals.
    pub coverage: Coverage,
    /// Percent change from core to viable.
    pub relative_increase: RelativeIncrease,
    pub within_budget: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

impl ReleasePlan {
    pub fn viable_set(&self) -> BTreeSet<ReqId> {
        self.core_set.union(&self.added_by_closure).cloned().collect()
    }
}

pub fn build_plan(
    problem: &ProblemInstance,
    partition: &Partition,
    labeling: &MoscowLabeling,
    features: &FeatureMatrix,
) -> Result<ReleasePlan> {
    let core = core_set(labeling, partition, features);
    plan_for_core(problem, core, problem.effort_bound())
}

/// Closes `core` over the dependencies and assembles totals and coverage.
pub fn plan_for_core(
    problem: &ProblemInstance,
    core: BTreeSet<ReqId>,
    effort_bound: Option<f64>,
) -> Result<ReleasePlan> {
    let closure = close_dependencies(&core, problem)?;
    plan_from_sets(problem, core, closure, effort_bound)
}

pub(crate) fn plan_from_sets(
    problem: &ProblemInstance,
    core: BTreeSet<ReqId>,
    closure: Closure,
    effort_bound: Option<f64>,
) -> Result<ReleasePlan> {
    let (core_totals, mut warnings) = adjusted_totals(&core, problem)?;
    let (viable_totals, w) = adjusted_totals(&closure.viable, problem)?;
    warnings.extend(w);
    let instance = Totals {
        effort: problem.total_effort(),
        satisfaction: problem.total_satisfaction(),
    };
    let pct = |part: f64, whole: f64| if whole == 0.0 { 0.0 } else { 100.0 * part / whole };
    let inc = |from: f64, to: f64| (from != 0.0).then(|| 100.0 * (to - from) / from);
    Ok(ReleasePlan {
        coverage: Coverage {
            core_effort: pct(core_totals.effort, instance.effort),
            core_satisfaction: pct(core_totals.satisfaction, instance.satisfaction),
            viable_effort: pct(viable_totals.effort, instance.effort),
            viable_satisfaction: pct(viable_totals.satisfaction, instance.satisfaction),
        },
        relative_increase: RelativeIncrease {
            effort: inc(core_totals.effort, viable_totals.effort),
            satisfaction: inc(core_totals.satisfaction, viable_totals.satisfaction),
        },
        within_budget: effort_bound.map(|b| viable_totals.effort <= b),
        core_set: core,
        added_by_closure: closure.added,
        conflicts: closure.conflicts,
        core: core_totals,
        viable: viable_totals,
        instance,
        warnings,
    })
}

/// Category of every requirement under a labeling, keyed by id.
pub fn categories_by_id(
    labeling: &MoscowLabeling,
    partition: &Partition,
    features: &FeatureMatrix,
) -> BTreeMap<ReqId, Category> {
    features
        .ids
        .iter()
        .zip(&partition.labels)
        .map(|(id, &l)| (ReqId(id.clone()), labeling.category_of[l]))
        .collect()
}
