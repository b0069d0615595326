//! Exhaustive enumeration of upgrade plans.

use std::time::Instant;

use rayon::prelude::*;

use super::result::{now_unix, Counters, Metadata, PlanResult, PlanStatus};
use crate::error::{Error, Result};
use crate::network::{apply_upgrades, NetworkCase, Plan, UpgradeCatalog};
use crate::operational::{OperationalLimits, ScenarioSet};
use crate::policies::{evaluate_all, Policy};

/// Largest catalog the oracle accepts.
pub const ORACLE_LIMIT: usize = 16;

/// Optimal plan by full enumeration, plus the policy-feasible set.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub result: PlanResult,
    /// Policy-feasible plans in lexicographic order.
    pub feasible: Vec<Plan>,
    /// Plans satisfying `A a <= b`.
    pub admissible: usize,
}

/// Evaluates the policy at every admissible binary plan. Among optimal
/// plans the lexicographically smallest is reported.
pub fn brute_force_oracle(
    case: &NetworkCase,
    catalog: &UpgradeCatalog,
    scenarios: &ScenarioSet,
    policy: &dyn Policy,
    limits: &OperationalLimits,
) -> Result<OracleResult> {
    let n_u = catalog.n();
    if n_u > ORACLE_LIMIT {
        return Err(Error::TooManyUpgrades {
            n_u,
            limit: ORACLE_LIMIT,
        });
    }
    let started = now_unix();
    let clock = Instant::now();
    let plans: Vec<Plan> = (0..1u64 << n_u)
        .map(|k| Plan::from_index(n_u, k))
        .filter(|p| catalog.admits(&p.values()))
        .collect();
    let verdicts: Vec<(bool, usize, Vec<crate::policies::PolicyOutcome>)> = plans
        .par_iter()
        .map(|p| {
            let up = apply_upgrades(case, catalog, p).expect("admissible plan");
            let (outcomes, bad) = evaluate_all(policy, &up, scenarios, limits);
            (bad.is_none(), outcomes.len(), outcomes)
        })
        .collect();
    let evaluations = verdicts.iter().map(|v| v.1).sum();
    let mut best: Option<(f64, usize)> = None;
    let mut feasible = Vec::new();
    for (k, (ok, _, _)) in verdicts.iter().enumerate() {
        if !ok {
            continue;
        }
        feasible.push(plans[k].clone());
        let c = catalog.cost_of(&plans[k].values());
        if best.is_none_or(|(b, _)| c < b) {
            best = Some((c, k));
        }
    }
    let (status, plan, cost, outcomes) = match best {
        Some((c, k)) => (PlanStatus::Optimal, Some(plans[k].clone()), Some(c), verdicts[k].2.clone()),
        None => (PlanStatus::Infeasible, None, None, Vec::new()),
    };
    let bound = cost.unwrap_or(f64::INFINITY);
    Ok(OracleResult {
        result: PlanResult {
            status,
            policy: policy.name().to_string(),
            plan,
            cost,
            lower_bound: bound,
            upper_bound: bound,
            outcomes,
            cuts: Vec::new(),
            accepted: Vec::new(),
            trace: Vec::new(),
            counters: Counters {
                policy_evaluations: evaluations,
                ..Counters::default()
            },
            metadata: Metadata {
                started_unix: started,
                wall_seconds: clock.elapsed().as_secs_f64(),
                solver_seconds: 0.0,
            },
        },
        feasible,
        admissible: plans.len(),
    })
}
