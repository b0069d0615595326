//! Planning results.

use serde::{Deserialize, Serialize};

use crate::network::Plan;
use crate::policies::PolicyOutcome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStatus {
    Optimal,
    FeasibleGap,
    Infeasible,
    BudgetExhausted,
}

impl PlanStatus {
    /// Process exit code of the `plan` command.
    pub fn exit_code(self) -> i32 {
        match self {
            PlanStatus::Optimal => 0,
            PlanStatus::FeasibleGap => 2,
            PlanStatus::Infeasible => 3,
            PlanStatus::BudgetExhausted => 4,
        }
    }
}

/// Bounds after processing a node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub node: usize,
    #[serde(with = "crate::serde_bounds::lower")]
    pub lower: f64,
    #[serde(with = "crate::serde_bounds::upper")]
    pub upper: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub nodes_solved: usize,
    pub relaxation_solves: usize,
    pub cuts_added: usize,
    pub policy_evaluations: usize,
    pub numerical_failures: usize,
}

/// Run metadata excluded from reproducibility comparisons.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub solver_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub policy: String,
    pub plan: Option<Plan>,
    pub cost: Option<f64>,
    #[serde(with = "crate::serde_bounds::lower")]
    pub lower_bound: f64,
    #[serde(with = "crate::serde_bounds::upper")]
    pub upper_bound: f64,
    /// Policy outcomes of `plan`, one per snapshot.
    pub outcomes: Vec<PolicyOutcome>,
    /// Plans excluded by policy cuts, in the order the cuts were added.
    pub cuts: Vec<Plan>,
    /// Every accepted plan, when the search enumerates them all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accepted: Vec<Plan>,
    pub trace: Vec<BoundRecord>,
    pub counters: Counters,
    pub metadata: Metadata,
}

impl PlanResult {
    /// JSON without the metadata block, for reproducibility checks.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("plan result serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("metadata");
        }
        serde_json::to_string_pretty(&v).expect("plan result serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan result serializes")
    }
}

pub(crate) fn now_unix() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
