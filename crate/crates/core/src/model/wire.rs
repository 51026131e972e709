//! On-disk and over-the-wire JSON layout of a problem instance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DependencyKind;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub requirements: Vec<RequirementEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stakeholders: Vec<StakeholderEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<ValueEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satisfactions: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependencies: Vec<DependencyEntry>,
    #[serde(default, skip_serializing_if = "InteractionsEntry::is_empty")]
    pub interactions: InteractionsEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effort_bound: Option<f64>,
    /// Reserved for additional per-requirement scoring dimensions (risk,
    /// volatility). Accepted and carried through, never used for clustering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_features: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub effort: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StakeholderEntry {
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEntry {
    pub stakeholder: String,
    pub requirement: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyEntry {
    pub kind: DependencyKind,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionsEntry {
    #[serde(rename = "deltaS", default)]
    pub delta_s: Vec<InteractionEntry>,
    #[serde(rename = "deltaE", default)]
    pub delta_e: Vec<InteractionEntry>,
}

impl InteractionsEntry {
    pub fn is_empty(&self) -> bool {
        self.delta_s.is_empty() && self.delta_e.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEntry {
    pub i: String,
    pub j: String,
    pub delta: f64,
}
