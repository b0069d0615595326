//! Greedy construction of a policy-feasible plan.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;

use super::log::LogEvent;
use crate::network::{apply_upgrades, NetworkCase, Plan, UpgradeCatalog};
use crate::operational::{OperationalLimits, ScenarioSet};
use crate::policies::{Policy, PolicyOutcome};

/// Result of the greedy search.
#[derive(Clone, Debug)]
pub struct GreedyResult {
    pub plan: Option<Plan>,
    /// Outcomes of the returned plan, one per snapshot.
    pub outcomes: Vec<PolicyOutcome>,
    pub evaluations: usize,
    pub log: Vec<LogEvent>,
}

fn evaluate(
    case: &NetworkCase,
    catalog: &UpgradeCatalog,
    scenarios: &ScenarioSet,
    policy: &dyn Policy,
    limits: &OperationalLimits,
    plan: &Plan,
) -> Vec<PolicyOutcome> {
    let up = apply_upgrades(case, catalog, plan).expect("greedy keeps A a <= b");
    scenarios
        .iter()
        .map(|s| policy.evaluate(&up, s, limits))
        .collect()
}

fn total_slack(outcomes: &[PolicyOutcome]) -> f64 {
    outcomes.iter().map(|o| o.total_slack()).sum()
}

/// Branches with an endpoint within graph distance one of a bus touched by
/// a violation. Without any point to inspect, every branch qualifies.
fn candidate_branches(case: &NetworkCase, outcomes: &[PolicyOutcome]) -> BTreeSet<usize> {
    if outcomes.iter().any(|o| o.point.is_none()) {
        return (0..case.branches.len()).collect();
    }
    let adj = case.adjacency();
    let mut near = vec![false; case.n_bus()];
    for o in outcomes {
        for j in o.report.violated_buses(case) {
            near[j] = true;
            for &k in &adj[j] {
                near[k] = true;
            }
        }
    }
    case.branches
        .iter()
        .enumerate()
        .filter(|(_, br)| near[br.from] || near[br.to])
        .map(|(b, _)| b)
        .collect()
}

/// Starts at `a = 0` and, while some snapshot is policy-infeasible, adds the
/// single admissible option near the violations that minimizes the summed
/// slack (ties: lower cost, then lower index). Gives up when no candidate
/// remains or after `n_u` additions.
pub fn greedy_incumbent(
    case: &NetworkCase,
    catalog: &UpgradeCatalog,
    scenarios: &ScenarioSet,
    policy: &dyn Policy,
    limits: &OperationalLimits,
) -> GreedyResult {
    greedy_incumbent_until(case, catalog, scenarios, policy, limits, None)
}

/// [`greedy_incumbent`] that also gives up once `deadline` has passed.
pub fn greedy_incumbent_until(
    case: &NetworkCase,
    catalog: &UpgradeCatalog,
    scenarios: &ScenarioSet,
    policy: &dyn Policy,
    limits: &OperationalLimits,
    deadline: Option<Instant>,
) -> GreedyResult {
    let mut plan = Plan::zeros(catalog.n());
    let mut outcomes = evaluate(case, catalog, scenarios, policy, limits, &plan);
    let mut evaluations = scenarios.len();
    let mut log = Vec::new();
    let first_bad = |o: &[PolicyOutcome]| o.iter().position(|x| !x.feasible);
    log.push(LogEvent::Policy {
        a: plan.clone(),
        feasible: first_bad(&outcomes).is_none(),
        snapshot: first_bad(&outcomes),
    });
    for _ in 0..catalog.n() {
        if first_bad(&outcomes).is_none() {
            return GreedyResult {
                plan: Some(plan),
                outcomes,
                evaluations,
                log,
            };
        }
        let branches = candidate_branches(case, &outcomes);
        let candidates: Vec<usize> = (0..catalog.n())
            .filter(|&i| !plan.get(i) && branches.contains(&catalog.options[i].branch))
            .filter(|&i| {
                let mut p = plan.clone();
                p.set(i, true);
                catalog.admits(&p.values())
            })
            .collect();
        if candidates.is_empty() || deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let scored: Vec<(usize, Plan, Vec<PolicyOutcome>)> = candidates
            .par_iter()
            .map(|&i| {
                let mut p = plan.clone();
                p.set(i, true);
                let o = evaluate(case, catalog, scenarios, policy, limits, &p);
                (i, p, o)
            })
            .collect();
        evaluations += scored.len() * scenarios.len();
        for (_, p, o) in &scored {
            log.push(LogEvent::Policy {
                a: p.clone(),
                feasible: first_bad(o).is_none(),
                snapshot: first_bad(o),
            });
        }
        let (_, p, o) = scored
            .into_iter()
            .min_by(|x, y| {
                let key = |c: &(usize, Plan, Vec<PolicyOutcome>)| {
                    let feasible = first_bad(&c.2).is_none();
                    (!feasible, total_slack(&c.2), catalog.options[c.0].cost, c.0)
                };
                let (a, b) = (key(x), key(y));
                a.0.cmp(&b.0)
                    .then(a.1.total_cmp(&b.1))
                    .then(a.2.total_cmp(&b.2))
                    .then(a.3.cmp(&b.3))
            })
            .expect("non-empty candidates");
        plan = p;
        outcomes = o;
    }
    let plan = first_bad(&outcomes).is_none().then_some(plan);
    GreedyResult {
        plan,
        outcomes,
        evaluations,
        log,
    }
}
