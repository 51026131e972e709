//! What-if negotiation over a base release plan: stakeholders force
//! requirements in or out and change the budget; the plan is recomputed from
//! scratch after every change.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::selection::{close_with_blocked, plan_from_sets, ReleasePlan, ReqId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Override {
    Auto,
    ForcedIn,
    ForcedOut,
}

/// A single mutation, as carried by a PATCH body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Change {
    #[serde(rename_all = "camelCase")]
    Toggle {
        toggle: String,
        #[serde(default)]
        expected_revision: Option<u64>,
    },
    #[serde(rename_all = "camelCase")]
    Budget {
        /// `null` clears the budget; the key itself is required.
        #[serde(deserialize_with = "required_nullable")]
        budget: Option<f64>,
        #[serde(default)]
        expected_revision: Option<u64>,
    },
}

fn required_nullable<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Option::<f64>::deserialize(d)
}

impl Change {
    pub fn expected_revision(&self) -> Option<u64> {
        match self {
            Change::Toggle { expected_revision, .. } | Change::Budget { expected_revision, .. } => *expected_revision,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub revision: u64,
    pub base: ReleasePlan,
    pub overrides: BTreeMap<ReqId, Override>,
    pub budget: Option<f64>,
    pub plan: ReleasePlan,
}

#[derive(Debug, Clone)]
pub struct NegotiationSession {
    problem: Arc<ProblemInstance>,
    base: ReleasePlan,
    overrides: BTreeMap<ReqId, Override>,
    budget: Option<f64>,
    revision: u64,
    plan: ReleasePlan,
}

impl NegotiationSession {
    /// Starts from `base` with no overrides, budget taken from the instance.
    pub fn new(problem: Arc<ProblemInstance>, base: ReleasePlan) -> Result<Self> {
        for id in base.core_set.iter().chain(&base.added_by_closure) {
            if problem.index_of(&id.0).is_none() {
                return Err(Error::UnknownId(id.0.clone()));
            }
        }
        let budget = problem.effort_bound();
        let plan = derive(&problem, &base, &BTreeMap::new(), budget)?;
        Ok(NegotiationSession {
            problem,
            base,
            overrides: BTreeMap::new(),
            budget,
            revision: 0,
            plan,
        })
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn plan(&self) -> &ReleasePlan {
        &self.plan
    }

    pub fn problem(&self) -> &Arc<ProblemInstance> {
        &self.problem
    }

    pub fn override_of(&self, id: &str) -> Override {
        self.overrides.get(&ReqId::from(id)).copied().unwrap_or(Override::Auto)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            revision: self.revision,
            base: self.base.clone(),
            overrides: self.overrides.clone(),
            budget: self.budget,
            plan: self.plan.clone(),
        }
    }

    /// Rebuilds a session from a view, e.g. a snapshot on disk. The stored
    /// plan is ignored and recomputed.
    pub fn restore(problem: Arc<ProblemInstance>, view: SessionView) -> Result<Self> {
        let mut s = NegotiationSession::new(problem, view.base)?;
        for id in view.overrides.keys() {
            if s.problem.index_of(&id.0).is_none() {
                return Err(Error::UnknownId(id.0.clone()));
            }
        }
        s.overrides = view
            .overrides
            .into_iter()
            .filter(|(_, o)| *o != Override::Auto)
            .collect();
        s.budget = view.budget;
        s.revision = view.revision;
        s.plan = derive(&s.problem, &s.base, &s.overrides, s.budget)?;
        Ok(s)
    }

    /// Applies `change` if `expected_revision` (when given) matches. Bumps the
    /// revision by one on success; leaves the session untouched on error.
    pub fn apply(&mut self, change: &Change) -> Result<&ReleasePlan> {
        if let Some(expected) = change.expected_revision() {
            if expected != self.revision {
                return Err(Error::StaleRevision {
                    expected,
                    actual: self.revision,
                });
            }
        }
        let mut overrides = self.overrides.clone();
        let mut budget = self.budget;
        match change {
            Change::Toggle { toggle, .. } => {
                if self.problem.index_of(toggle).is_none() {
                    return Err(Error::UnknownId(toggle.clone()));
                }
                let id = ReqId::from(toggle.as_str());
                match self.override_of(toggle) {
                    Override::Auto => {
                        let next = if self.plan.viable_set().contains(&id) {
                            Override::ForcedOut
                        } else {
                            Override::ForcedIn
                        };
                        overrides.insert(id, next);
                    }
                    Override::ForcedIn | Override::ForcedOut => {
                        overrides.remove(&id);
                    }
                }
            }
            Change::Budget { budget: b, .. } => {
                if let Some(v) = b {
                    if !v.is_finite() || *v < 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "budget must be finite and ≥ 0, got {v}"
                        )));
                    }
                }
                budget = *b;
            }
        }
        let plan = derive(&self.problem, &self.base, &overrides, budget)?;
        self.overrides = overrides;
        self.budget = budget;
        self.plan = plan;
        self.revision += 1;
        Ok(&self.plan)
    }

    pub fn toggle(&mut self, id: &str) -> Result<&ReleasePlan> {
        self.apply(&Change::Toggle {
            toggle: id.to_owned(),
            expected_revision: None,
        })
    }

    pub fn set_budget(&mut self, budget: Option<f64>) -> Result<&ReleasePlan> {
        self.apply(&Change::Budget {
            budget,
            expected_revision: None,
        })
    }
}

/// Seed = base core ∪ forced-in − forced-out, closed with the forced-out
/// requirements blocked.
fn derive(
    problem: &ProblemInstance,
    base: &ReleasePlan,
    overrides: &BTreeMap<ReqId, Override>,
    budget: Option<f64>,
) -> Result<ReleasePlan> {
    let forced = |want: Override| -> BTreeSet<ReqId> {
        overrides
            .iter()
            .filter(|(_, o)| **o == want)
            .map(|(id, _)| id.clone())
            .collect()
    };
    let forced_in = forced(Override::ForcedIn);
    let forced_out = forced(Override::ForcedOut);
    let core: BTreeSet<ReqId> = base
        .core_set
        .union(&forced_in)
        .filter(|id| !forced_out.contains(*id))
        .cloned()
        .collect();
    let closure = close_with_blocked(&core, &forced_out, problem)?;
    plan_from_sets(problem, core, closure, budget)
}
