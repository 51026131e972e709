//! Next-release-problem instances: requirements with efforts, weighted
//! stakeholders and their values, dependencies and pairwise interactions.
//!
//! A [`ProblemInstance`] is only ever built through validation
//! ([`ProblemInstance::from_file`] or one of the loaders) and is immutable
//! afterwards. Requirements are stored in canonical id order
//! ([`crate::ids::id_cmp`]), so two files that differ only in row order load
//! to identical instances.

mod csv_bundle;
mod wire;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

pub use csv_bundle::CsvBundle;
pub use wire::{
    DependencyEntry, InteractionEntry, InteractionsEntry, ProblemFile, RequirementEntry, StakeholderEntry, ValueEntry,
};

use crate::error::{Error, Result};
use crate::ids::{canonical_pair, id_cmp};
use crate::warning::{Warning, WarningKind};

/// Supplied and recomputed satisfactions must agree this closely.
pub const SATISFACTION_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: String,
    pub name: Option<String>,
    pub effort: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stakeholder {
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueAssignment {
    pub stakeholder: String,
    pub requirement: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DependencyKind {
    /// `from ⇒ to`: `to` cannot be selected unless `from` is.
    #[serde(rename = "implies", alias = "implication")]
    Implication,
    /// `from ⊙ to`: the two are selected together or not at all.
    #[serde(rename = "combination", alias = "coupling")]
    Combination,
    /// `from ⊕ to`: the two cannot both be selected.
    #[serde(rename = "exclusion")]
    Exclusion,
}

impl DependencyKind {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, DependencyKind::Implication)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            DependencyKind::Implication => "⇒",
            DependencyKind::Combination => "⊙",
            DependencyKind::Exclusion => "⊕",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub kind: DependencyKind,
    pub from: String,
    pub to: String,
}

impl std::fmt::Display for Dependency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.from, self.kind.symbol(), self.to)
    }
}

/// Symmetric pairwise adjustments, stored once per unordered pair with the
/// smaller id first. Diagonal entries never exist.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionMatrices {
    delta_s: BTreeMap<(String, String), f64>,
    delta_e: BTreeMap<(String, String), f64>,
}

impl InteractionMatrices {
    pub fn is_empty(&self) -> bool {
        self.delta_s.is_empty() && self.delta_e.is_empty()
    }

    pub fn delta_s(&self, a: &str, b: &str) -> f64 {
        lookup(&self.delta_s, a, b)
    }

    pub fn delta_e(&self, a: &str, b: &str) -> f64 {
        lookup(&self.delta_e, a, b)
    }

    pub fn delta_s_entries(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.delta_s.iter().map(|((a, b), d)| (a.as_str(), b.as_str(), *d))
    }

    pub fn delta_e_entries(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.delta_e.iter().map(|((a, b), d)| (a.as_str(), b.as_str(), *d))
    }
}

fn lookup(map: &BTreeMap<(String, String), f64>, a: &str, b: &str) -> f64 {
    let (x, y) = canonical_pair(a, b);
    map.get(&(x.to_owned(), y.to_owned())).copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    requirements: Vec<Requirement>,
    index: HashMap<String, usize>,
    stakeholders: Vec<Stakeholder>,
    values: Vec<ValueAssignment>,
    satisfaction: Vec<f64>,
    satisfactions_supplied: bool,
    dependencies: Vec<Dependency>,
    interactions: InteractionMatrices,
    effort_bound: Option<f64>,
    extra_features: Option<serde_json::Value>,
}

/// A validated instance together with the non-fatal findings of ingestion.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub problem: ProblemInstance,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    /// Several CSV files concatenated into one stream, each introduced by a
    /// `--- <name>.csv` line. See [`CsvBundle::parse_concatenated`].
    CsvBundle,
}

pub fn load_problem(source: &[u8], format: Format) -> Result<Loaded> {
    match format {
        Format::Json => {
            let file: ProblemFile = serde_json::from_slice(source).map_err(|e| Error::Parse(e.to_string()))?;
            ProblemInstance::from_file(file)
        }
        Format::CsvBundle => CsvBundle::parse_concatenated(source)?.load(),
    }
}

/// Loads a `.json` file, or a directory holding a CSV bundle.
pub fn load_problem_path(path: &Path) -> Result<Loaded> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let meta = std::fs::metadata(path).map_err(io)?;
    if meta.is_dir() {
        return CsvBundle::read_dir(path)?.load();
    }
    let bytes = std::fs::read(path).map_err(io)?;
    let format = if path.extension().is_some_and(|e| e == "csv" || e == "bundle") {
        Format::CsvBundle
    } else {
        Format::Json
    };
    load_problem(&bytes, format)
}

/// s_j = Σ_i w_i · v_ij. Pairs without a value contribute nothing.
pub fn compute_satisfaction(problem: &ProblemInstance) -> BTreeMap<String, f64> {
    let sat = weighted_sums(
        &problem.requirements,
        &problem.index,
        &problem.stakeholders,
        &problem.values,
    );
    problem
        .requirements
        .iter()
        .zip(sat)
        .map(|(r, s)| (r.id.clone(), s))
        .collect()
}

fn weighted_sums(
    requirements: &[Requirement],
    index: &HashMap<String, usize>,
    stakeholders: &[Stakeholder],
    values: &[ValueAssignment],
) -> Vec<f64> {
    let weight: HashMap<&str, f64> = stakeholders.iter().map(|s| (s.id.as_str(), s.weight)).collect();
    let mut sat = vec![0.0; requirements.len()];
    // values are sorted by (stakeholder, requirement), so the summation order
    // per requirement is fixed by stakeholder order
    for v in values {
        sat[index[&v.requirement]] += weight[v.stakeholder.as_str()] * v.value;
    }
    sat
}

impl ProblemInstance {
    pub fn from_file(file: ProblemFile) -> Result<Loaded> {
        let mut warnings = Vec::new();

        if file.requirements.len() < 2 {
            return Err(Error::validation(
                "requirements",
                format!("at least 2 requirements are needed, got {}", file.requirements.len()),
            ));
        }
        let mut requirements = Vec::with_capacity(file.requirements.len());
        for r in file.requirements {
            if r.id.trim().is_empty() {
                return Err(Error::validation("requirements", "empty requirement id"));
            }
            if !r.effort.is_finite() || r.effort < 0.0 {
                return Err(Error::validation(
                    &r.id,
                    format!("effort must be finite and ≥ 0, got {}", r.effort),
                ));
            }
            requirements.push(Requirement {
                id: r.id,
                name: r.name,
                effort: r.effort,
            });
        }
        requirements.sort_by(|a, b| id_cmp(&a.id, &b.id));
        for w in requirements.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::validation(&w[0].id, "duplicate requirement id"));
            }
        }
        let index: HashMap<String, usize> = requirements
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        let require = |id: &str, what: &str| -> Result<()> {
            if index.contains_key(id) {
                Ok(())
            } else {
                Err(Error::validation(id, format!("{what} references unknown requirement")))
            }
        };

        let mut stakeholders = Vec::with_capacity(file.stakeholders.len());
        for s in file.stakeholders {
            if !s.weight.is_finite() || s.weight <= 0.0 {
                return Err(Error::validation(
                    &s.id,
                    format!("stakeholder weight must be > 0, got {}", s.weight),
                ));
            }
            stakeholders.push(Stakeholder {
                id: s.id,
                weight: s.weight,
            });
        }
        stakeholders.sort_by(|a, b| id_cmp(&a.id, &b.id));
        for w in stakeholders.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::validation(&w[0].id, "duplicate stakeholder id"));
            }
        }

        let mut values = Vec::with_capacity(file.values.len());
        for v in file.values {
            if stakeholders
                .binary_search_by(|s| id_cmp(&s.id, &v.stakeholder))
                .is_err()
            {
                return Err(Error::validation(
                    &v.stakeholder,
                    "value references unknown stakeholder",
                ));
            }
            require(&v.requirement, "value")?;
            if !v.value.is_finite() || v.value < 0.0 {
                return Err(Error::validation(
                    &v.requirement,
                    format!("value must be finite and ≥ 0, got {}", v.value),
                ));
            }
            values.push(ValueAssignment {
                stakeholder: v.stakeholder,
                requirement: v.requirement,
                value: v.value,
            });
        }
        values.sort_by(|a, b| {
            id_cmp(&a.stakeholder, &b.stakeholder).then_with(|| id_cmp(&a.requirement, &b.requirement))
        });
        for w in values.windows(2) {
            if w[0].stakeholder == w[1].stakeholder && w[0].requirement == w[1].requirement {
                return Err(Error::validation(
                    format!("{}/{}", w[0].stakeholder, w[0].requirement),
                    "duplicate value for stakeholder/requirement pair",
                ));
            }
        }

        let satisfactions_supplied = file.satisfactions.is_some();
        let satisfaction = match (values.is_empty(), file.satisfactions) {
            (true, None) => {
                return Err(Error::validation(
                    "values",
                    "either stakeholder values or precomputed satisfactions are required",
                ))
            }
            (false, supplied) => {
                let computed = weighted_sums(&requirements, &index, &stakeholders, &values);
                if let Some(supplied) = supplied {
                    let given = supplied_vector(&requirements, &index, supplied)?;
                    for (r, (c, g)) in requirements.iter().zip(computed.iter().zip(&given)) {
                        if (c - g).abs() > SATISFACTION_AGREEMENT {
                            return Err(Error::validation(
                                &r.id,
                                format!("supplied satisfaction {g} disagrees with computed {c}"),
                            ));
                        }
                    }
                }
                computed
            }
            (true, Some(supplied)) => supplied_vector(&requirements, &index, supplied)?,
        };

        let mut dependencies = Vec::with_capacity(file.dependencies.len());
        for d in file.dependencies {
            require(&d.from, "dependency")?;
            require(&d.to, "dependency")?;
            if d.from == d.to {
                return Err(Error::validation(&d.from, "dependency from a requirement to itself"));
            }
            let (from, to) = if d.kind.is_symmetric() {
                let (a, b) = canonical_pair(&d.from, &d.to);
                (a.to_owned(), b.to_owned())
            } else {
                (d.from, d.to)
            };
            dependencies.push(Dependency { kind: d.kind, from, to });
        }
        dependencies.sort_by(|a, b| {
            a.kind
                .cmp(&b.kind)
                .then_with(|| id_cmp(&a.from, &b.from))
                .then_with(|| id_cmp(&a.to, &b.to))
        });
        let before = dependencies.len();
        dependencies.dedup();
        if dependencies.len() != before {
            warnings.push(Warning::new(
                WarningKind::DuplicateDependency,
                format!("{} duplicate dependencies collapsed", before - dependencies.len()),
            ));
        }

        let mut interactions = InteractionMatrices::default();
        for (name, entries, target) in [
            ("deltaS", file.interactions.delta_s, &mut interactions.delta_s),
            ("deltaE", file.interactions.delta_e, &mut interactions.delta_e),
        ] {
            for e in entries {
                require(&e.i, name)?;
                require(&e.j, name)?;
                if e.i == e.j {
                    return Err(Error::validation(&e.i, format!("{name} has a diagonal entry")));
                }
                if !e.delta.is_finite() {
                    return Err(Error::validation(
                        format!("{}/{}", e.i, e.j),
                        format!("{name} delta is not finite"),
                    ));
                }
                let (a, b) = canonical_pair(&e.i, &e.j);
                let key = (a.to_owned(), b.to_owned());
                match target.get(&key) {
                    Some(&prev) if prev == e.delta => warnings.push(Warning::new(
                        WarningKind::DuplicateInteraction,
                        format!("{name} entry {a}/{b} given twice"),
                    )),
                    Some(&prev) => {
                        return Err(Error::validation(
                            format!("{a}/{b}"),
                            format!(
                                "{name} entry given twice with conflicting deltas {prev} and {}",
                                e.delta
                            ),
                        ))
                    }
                    None => {
                        target.insert(key, e.delta);
                    }
                }
            }
        }

        if let Some(b) = file.effort_bound {
            if !b.is_finite() || b <= 0.0 {
                return Err(Error::validation(
                    "effort_bound",
                    format!("effort bound must be > 0, got {b}"),
                ));
            }
        }

        warnings.extend(implication_cycles(&requirements, &index, &dependencies));

        Ok(Loaded {
            problem: ProblemInstance {
                requirements,
                index,
                stakeholders,
                values,
                satisfaction,
                satisfactions_supplied,
                dependencies,
                interactions,
                effort_bound: file.effort_bound,
                extra_features: file.extra_features,
            },
            warnings,
        })
    }

    /// Serializable form. Raw values are written when present, otherwise the
    /// satisfactions the instance was loaded with.
    pub fn to_file(&self) -> ProblemFile {
        let write_sat = self.values.is_empty() || self.satisfactions_supplied;
        ProblemFile {
            requirements: self
                .requirements
                .iter()
                .map(|r| RequirementEntry {
                    id: r.id.clone(),
                    name: r.name.clone(),
                    effort: r.effort,
                })
                .collect(),
            stakeholders: self
                .stakeholders
                .iter()
                .map(|s| StakeholderEntry {
                    id: s.id.clone(),
                    weight: s.weight,
                })
                .collect(),
            values: self
                .values
                .iter()
                .map(|v| ValueEntry {
                    stakeholder: v.stakeholder.clone(),
                    requirement: v.requirement.clone(),
                    value: v.value,
                })
                .collect(),
            satisfactions: write_sat.then(|| {
                self.requirements
                    .iter()
                    .zip(&self.satisfaction)
                    .map(|(r, s)| (r.id.clone(), *s))
                    .collect()
            }),
            dependencies: self
                .dependencies
                .iter()
                .map(|d| DependencyEntry {
                    kind: d.kind,
                    from: d.from.clone(),
                    to: d.to.clone(),
                })
                .collect(),
            interactions: InteractionsEntry {
                delta_s: entries(&self.interactions.delta_s),
                delta_e: entries(&self.interactions.delta_e),
            },
            effort_bound: self.effort_bound,
            extra_features: self.extra_features.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("problem file serializes")
    }

    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }

    pub fn requirements(&self) -> &[Requirement] {
        &self.requirements
    }

    pub fn stakeholders(&self) -> &[Stakeholder] {
        &self.stakeholders
    }

    pub fn values(&self) -> &[ValueAssignment] {
        &self.values
    }

    pub fn dependencies(&self) -> &[Dependency] {
        &self.dependencies
    }

    pub fn interactions(&self) -> &InteractionMatrices {
        &self.interactions
    }

    pub fn effort_bound(&self) -> Option<f64> {
        self.effort_bound
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.requirements.iter().map(|r| r.id.as_str())
    }

    /// Satisfaction of each requirement, aligned with [`Self::requirements`].
    pub fn satisfaction(&self) -> &[f64] {
        &self.satisfaction
    }

    pub fn satisfaction_of(&self, id: &str) -> Option<f64> {
        self.index_of(id).map(|i| self.satisfaction[i])
    }

    pub fn effort_of(&self, id: &str) -> Option<f64> {
        self.index_of(id).map(|i| self.requirements[i].effort)
    }

    pub fn total_effort(&self) -> f64 {
        self.requirements.iter().map(|r| r.effort).sum()
    }

    pub fn total_satisfaction(&self) -> f64 {
        self.satisfaction.iter().sum()
    }

    pub fn count_dependencies(&self, kind: DependencyKind) -> usize {
        self.dependencies.iter().filter(|d| d.kind == kind).count()
    }
}

fn supplied_vector(
    requirements: &[Requirement],
    index: &HashMap<String, usize>,
    supplied: BTreeMap<String, f64>,
) -> Result<Vec<f64>> {
    let mut out = vec![f64::NAN; requirements.len()];
    for (id, s) in supplied {
        let Some(&i) = index.get(&id) else {
            return Err(Error::validation(&id, "satisfaction given for unknown requirement"));
        };
        if !s.is_finite() || s < 0.0 {
            return Err(Error::validation(
                &id,
                format!("satisfaction must be finite and ≥ 0, got {s}"),
            ));
        }
        out[i] = s;
    }
    if let Some(i) = out.iter().position(|s| s.is_nan()) {
        return Err(Error::validation(&requirements[i].id, "no satisfaction given"));
    }
    Ok(out)
}

fn entries(map: &BTreeMap<(String, String), f64>) -> Vec<InteractionEntry> {
    map.iter()
        .map(|((i, j), d)| InteractionEntry {
            i: i.clone(),
            j: j.clone(),
            delta: *d,
        })
        .collect()
}

fn implication_cycles(
    requirements: &[Requirement],
    index: &HashMap<String, usize>,
    dependencies: &[Dependency],
) -> Vec<Warning> {
    let mut graph = DiGraph::<usize, ()>::with_capacity(requirements.len(), dependencies.len());
    let nodes: Vec<_> = (0..requirements.len()).map(|i| graph.add_node(i)).collect();
    for d in dependencies.iter().filter(|d| d.kind == DependencyKind::Implication) {
        graph.add_edge(nodes[index[&d.from]], nodes[index[&d.to]], ());
    }
    let mut cycles: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .filter(|scc| scc.len() > 1)
        .map(|scc| {
            let mut members: Vec<usize> = scc.into_iter().map(|n| graph[n]).collect();
            members.sort_unstable();
            members
        })
        .collect();
    cycles.sort();
    cycles
        .into_iter()
        .map(|members| {
            let ids: Vec<&str> = members.iter().map(|&i| requirements[i].id.as_str()).collect();
            Warning::new(
                WarningKind::ImplicationCycle,
                format!(
                    "implication cycle among {{{}}}; members are co-selected",
                    ids.join(", ")
                ),
            )
        })
        .collect()
}
