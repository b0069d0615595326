//! Branch-and-Bound over the upgrade binaries with lazy policy cuts.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cut::{make_policy_cut, PolicyCut};
use super::greedy::greedy_incumbent_until;
use super::log::{LogEvent, NodeState};
use super::result::{now_unix, BoundRecord, Counters, Metadata, PlanResult, PlanStatus};
use crate::error::Result;
use crate::network::{apply_upgrades, NetworkCase, Plan, UpgradeCatalog};
use crate::operational::{OperationalLimits, ScenarioSet};
use crate::policies::{relaxation_outcome, Policy, PolicyOutcome};
use crate::relaxation::backend::{BackendSettings, ClarabelBackend};
use crate::relaxation::qcqp::{build_qcqp, QcqpModel, QcqpOptions};
use crate::relaxation::{solve_node_relaxation, Domain, NodeProblem, Objective, SdpSolution, SdpStatus};

/// Optimality tolerance on `U - L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Gap {
    Absolute(f64),
    /// Relative to `max(1, |U|)`.
    Relative(f64),
}

impl Gap {
    /// `1 - 1e-6` for integral costs, relative `1e-4` otherwise.
    pub fn for_catalog(catalog: &UpgradeCatalog) -> Self {
        if catalog.has_integer_costs() {
            Gap::Absolute(1.0 - 1e-6)
        } else {
            Gap::Relative(1e-4)
        }
    }

    fn absolute(self, upper: f64) -> f64 {
        match self {
            Gap::Absolute(e) => e,
            Gap::Relative(r) => r * upper.abs().max(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnbParams {
    /// `None` selects [`Gap::for_catalog`].
    pub gap: Option<Gap>,
    pub time_budget: Option<Duration>,
    /// Maximum number of relaxation solves.
    pub node_budget: Option<usize>,
    /// Re-solves of one node after cuts before it is requeued.
    pub max_resolves: usize,
    /// Seed the incumbent with [`greedy_incumbent`].
    pub greedy: bool,
    /// Open nodes whose relaxations are solved concurrently per round. The
    /// result depends on this value, never on the thread count.
    pub batch: usize,
    /// Keep searching after each acceptance (excluding the accepted plan)
    /// and disable bound pruning, so that every acceptable plan is found.
    pub enumerate_all: bool,
    pub integrality_tol: f64,
    pub backend: BackendSettings,
}

impl Default for BnbParams {
    fn default() -> Self {
        BnbParams {
            gap: None,
            time_budget: None,
            node_budget: None,
            max_resolves: 50,
            greedy: true,
            batch: 1,
            enumerate_all: false,
            integrality_tol: 1e-6,
            backend: BackendSettings::default(),
        }
    }
}

/// A completed run: the result and its event log.
#[derive(Clone, Debug)]
pub struct BnbRun {
    pub result: PlanResult,
    pub log: Vec<LogEvent>,
}

#[derive(Clone, Debug)]
struct Node {
    id: usize,
    domains: Vec<Domain>,
    bound: f64,
}

impl Node {
    fn fixed(&self, d: Domain) -> Vec<usize> {
        (0..self.domains.len()).filter(|&i| self.domains[i] == d).collect()
    }
}

struct Search<'a> {
    case: &'a NetworkCase,
    catalog: &'a UpgradeCatalog,
    scenarios: &'a ScenarioSet,
    policy: &'a dyn Policy,
    limits: &'a OperationalLimits,
    params: &'a BnbParams,
    model: QcqpModel,
    gap: Gap,
    integral_costs: bool,
    clock: Instant,

    upper: f64,
    incumbent: Option<(Plan, Vec<PolicyOutcome>)>,
    cuts: Vec<PolicyCut>,
    exclusions: Vec<PolicyCut>,
    accepted: Vec<Plan>,
    open: Vec<Node>,
    unresolved: Vec<f64>,
    next_id: usize,
    lower: f64,
    counters: Counters,
    solver_seconds: f64,
    trace: Vec<BoundRecord>,
    log: Vec<LogEvent>,
}

enum Step {
    Done,
    Resolve(f64),
}

impl<'a> Search<'a> {
    fn node_problem(&self, node: &Node) -> NodeProblem {
        NodeProblem {
            domains: node.domains.clone(),
            cuts: self.cuts.iter().chain(&self.exclusions).map(|c| c.row()).collect(),
            objective: Objective::UpgradeCost,
        }
    }

    fn solve(&mut self, node: &Node) -> SdpSolution {
        let sol = solve_node_relaxation(&self.model, &self.node_problem(node), &ClarabelBackend, &self.params.backend);
        self.counters.relaxation_solves += 1;
        self.solver_seconds += sol.seconds;
        sol
    }

    fn out_of_budget(&self) -> bool {
        self.params
            .time_budget
            .is_some_and(|t| self.clock.elapsed() >= t)
            || self
                .params
                .node_budget
                .is_some_and(|n| self.counters.relaxation_solves >= n)
    }

    fn prunable(&self, bound: f64) -> bool {
        !self.params.enumerate_all
            && self.upper.is_finite()
            && bound >= self.upper - self.gap.absolute(self.upper)
    }

    fn log_node(&mut self, node: &Node, bound: f64, status: NodeState) {
        self.log.push(LogEvent::Node {
            id: node.id,
            i0: node.fixed(Domain::Zero),
            i1: node.fixed(Domain::One),
            bound,
            status,
        });
    }

    fn refresh_lower(&mut self, node: usize) {
        let min_open = self
            .open
            .iter()
            .map(|n| n.bound)
            .chain(self.unresolved.iter().copied())
            .fold(f64::INFINITY, f64::min);
        let mut candidate = min_open.min(self.upper);
        if self.integral_costs && candidate.is_finite() {
            // Every plan cost is an integer.
            candidate = (candidate - 1e-6).ceil();
        }
        if candidate > self.lower {
            self.lower = candidate;
        }
        self.trace.push(BoundRecord {
            node,
            lower: self.lower,
            upper: self.upper,
        });
    }

    /// Policy verdict for a binary plan over all snapshots, stopping the
    /// verdict at the first infeasible snapshot.
    fn evaluate(&mut self, plan: &Plan, sol: &SdpSolution) -> (Vec<PolicyOutcome>, Option<usize>) {
        let up = apply_upgrades(self.case, self.catalog, plan).expect("relaxation keeps A a <= b");
        if self.policy.accepts_relaxation() {
            let outcomes = self
                .scenarios
                .iter()
                .enumerate()
                .map(|(k, snap)| {
                    let mut o = relaxation_outcome(&up, snap, &sol.z[k], self.limits);
                    o.feasible = true;
                    o
                })
                .collect();
            return (outcomes, None);
        }
        let snaps: Vec<_> = self.scenarios.iter().collect();
        let mut outcomes: Vec<PolicyOutcome> = snaps
            .par_iter()
            .map(|s| self.policy.evaluate(&up, s, self.limits))
            .collect();
        let bad = outcomes.iter().position(|o| !o.feasible);
        if let Some(k) = bad {
            outcomes.truncate(k + 1);
        }
        self.counters.policy_evaluations += outcomes.len();
        (outcomes, bad)
    }

    fn branch(&mut self, node: &Node, k: usize, bound: f64) {
        for d in [Domain::Zero, Domain::One] {
            let mut domains = node.domains.clone();
            domains[k] = d;
            self.open.push(Node {
                id: self.next_id,
                domains,
                bound,
            });
            self.next_id += 1;
        }
    }

    fn process_once(&mut self, node: &Node, sol: &SdpSolution) -> Step {
        match sol.status {
            SdpStatus::Infeasible => {
                self.log_node(node, f64::INFINITY, NodeState::Infeasible);
                return Step::Done;
            }
            SdpStatus::NumericalFailure => {
                self.counters.numerical_failures += 1;
                match node.domains.iter().position(|&d| d == Domain::Free) {
                    Some(k) => {
                        self.log_node(node, node.bound, NodeState::Branched);
                        self.branch(node, k, node.bound);
                    }
                    None => {
                        self.log_node(node, node.bound, NodeState::Unresolved);
                        self.unresolved.push(node.bound);
                    }
                }
                return Step::Done;
            }
            SdpStatus::Optimal => {}
        }
        let bound = sol.lower_bound.max(node.bound);
        if self.prunable(bound) {
            self.log_node(node, bound, NodeState::Pruned);
            return Step::Done;
        }
        let tol = self.params.integrality_tol;
        let frac = |x: f64| (x - x.round()).abs();
        if sol.a.iter().all(|&x| frac(x) <= tol) {
            let plan = Plan::from_bits(sol.a.iter().map(|&x| x.round() >= 1.0).collect());
            let values = plan.values();
            if self.cuts.iter().chain(&self.exclusions).any(|c| c.excludes(&values)) {
                // Solved before a cut on this plan was added.
                return Step::Resolve(bound);
            }
            let cost = self.catalog.cost_of(&values);
            if !(self.params.enumerate_all || cost < self.upper - 1e-9) {
                self.log_node(node, bound, NodeState::Pruned);
                return Step::Done;
            }
            let (outcomes, bad) = self.evaluate(&plan, sol);
            self.log.push(LogEvent::Policy {
                a: plan.clone(),
                feasible: bad.is_none(),
                snapshot: bad,
            });
            match bad {
                None => {
                    if cost < self.upper - 1e-9 {
                        self.log.push(LogEvent::Incumbent {
                            a: plan.clone(),
                            cost,
                            source: "relaxation".into(),
                            diagnostics: outcomes.iter().map(|o| o.diagnostics.clone()).collect(),
                        });
                        self.upper = cost;
                        self.incumbent = Some((plan.clone(), outcomes));
                    }
                    if self.params.enumerate_all {
                        self.accepted.push(plan.clone());
                        self.exclusions.push(PolicyCut { a_r: plan });
                        return Step::Resolve(bound);
                    }
                    self.log_node(node, bound, NodeState::Solved);
                    Step::Done
                }
                Some(k) => {
                    let cut = make_policy_cut(&values).expect("binary plan");
                    self.log.push(LogEvent::Cut {
                        a_r: plan,
                        snapshot: k,
                    });
                    self.cuts.push(cut);
                    self.counters.cuts_added += 1;
                    Step::Resolve(bound)
                }
            }
        } else {
            // Most fractional variable, lowest index on ties.
            let k = (0..sol.a.len())
                .filter(|&i| node.domains[i] == Domain::Free)
                .min_by(|&i, &j| {
                    let (di, dj) = ((sol.a[i] - 0.5).abs(), (sol.a[j] - 0.5).abs());
                    di.total_cmp(&dj).then(i.cmp(&j))
                })
                .expect("fractional value on a free variable");
            self.log_node(node, bound, NodeState::Branched);
            self.branch(node, k, bound);
            Step::Done
        }
    }

    fn process(&mut self, node: Node, first: SdpSolution) {
        self.counters.nodes_solved += 1;
        let mut sol = first;
        let mut resolves = 0;
        loop {
            match self.process_once(&node, &sol) {
                Step::Done => return,
                Step::Resolve(bound) => {
                    resolves += 1;
                    if resolves > self.params.max_resolves || self.out_of_budget() {
                        let requeued = Node { bound, ..node };
                        self.log_node(&requeued, bound, NodeState::Requeued);
                        self.open.push(requeued);
                        return;
                    }
                    sol = self.solve(&node);
                }
            }
        }
    }

    /// Removes and returns up to `batch` open nodes in best-first order
    /// (lowest bound, then lowest id).
    fn take_batch(&mut self) -> Vec<Node> {
        self.open.sort_by(|a, b| a.bound.total_cmp(&b.bound).then(a.id.cmp(&b.id)));
        let k = self.params.batch.max(1).min(self.open.len());
        self.open.drain(..k).collect()
    }

    fn gap_closed(&self) -> bool {
        self.incumbent.is_some()
            && !self.params.enumerate_all
            && self.upper - self.lower <= self.gap.absolute(self.upper)
    }

    fn run(&mut self) -> PlanStatus {
        self.open.push(Node {
            id: 0,
            domains: vec![Domain::Free; self.catalog.n()],
            bound: f64::NEG_INFINITY,
        });
        self.next_id = 1;
        let mut last = 0;
        loop {
            self.refresh_lower(last);
            if self.open.is_empty() || self.gap_closed() {
                break;
            }
            // The root is always solved so that a bound is reported.
            if self.counters.relaxation_solves > 0 && self.out_of_budget() {
                return PlanStatus::BudgetExhausted;
            }
            let batch: Vec<Node> = self
                .take_batch()
                .into_iter()
                .filter(|n| {
                    if self.prunable(n.bound) {
                        self.log.push(LogEvent::Node {
                            id: n.id,
                            i0: n.fixed(Domain::Zero),
                            i1: n.fixed(Domain::One),
                            bound: n.bound,
                            status: NodeState::Pruned,
                        });
                        false
                    } else {
                        true
                    }
                })
                .collect();
            if batch.is_empty() {
                continue;
            }
            let problems: Vec<NodeProblem> = batch.iter().map(|n| self.node_problem(n)).collect();
            let model = &self.model;
            let settings = &self.params.backend;
            let sols: Vec<SdpSolution> = problems
                .par_iter()
                .map(|p| solve_node_relaxation(model, p, &ClarabelBackend, settings))
                .collect();
            for (node, sol) in batch.into_iter().zip(sols) {
                self.counters.relaxation_solves += 1;
                self.solver_seconds += sol.seconds;
                last = node.id;
                self.process(node, sol);
            }
        }
        if !self.unresolved.is_empty() {
            return if self.incumbent.is_some() {
                PlanStatus::FeasibleGap
            } else {
                PlanStatus::BudgetExhausted
            };
        }
        if self.incumbent.is_some() {
            PlanStatus::Optimal
        } else {
            PlanStatus::Infeasible
        }
    }
}

/// Minimum-cost plan that is feasible for every snapshot under `policy`.
pub fn branch_and_bound(
    case: &NetworkCase,
    catalog: &UpgradeCatalog,
    scenarios: &ScenarioSet,
    policy: &dyn Policy,
    limits: &OperationalLimits,
    params: &BnbParams,
) -> Result<BnbRun> {
    let started = now_unix();
    let clock = Instant::now();
    let model = build_qcqp(case, catalog, scenarios, limits, &QcqpOptions::default())?;
    let mut s = Search {
        case,
        catalog,
        scenarios,
        policy,
        limits,
        params,
        model,
        gap: params.gap.unwrap_or_else(|| Gap::for_catalog(catalog)),
        integral_costs: catalog.has_integer_costs(),
        clock,
        upper: f64::INFINITY,
        incumbent: None,
        cuts: Vec::new(),
        exclusions: Vec::new(),
        accepted: Vec::new(),
        open: Vec::new(),
        unresolved: Vec::new(),
        next_id: 0,
        lower: f64::NEG_INFINITY,
        counters: Counters::default(),
        solver_seconds: 0.0,
        trace: Vec::new(),
        log: Vec::new(),
    };

    if params.greedy && !params.enumerate_all && !policy.accepts_relaxation() {
        let deadline = params.time_budget.map(|t| clock + t);
        let g = greedy_incumbent_until(case, catalog, scenarios, policy, limits, deadline);
        s.counters.policy_evaluations += g.evaluations;
        s.log.extend(g.log);
        if let Some(plan) = g.plan {
            let cost = catalog.cost_of(&plan.values());
            s.log.push(LogEvent::Incumbent {
                a: plan.clone(),
                cost,
                source: "greedy".into(),
                diagnostics: g.outcomes.iter().map(|o| o.diagnostics.clone()).collect(),
            });
            s.upper = cost;
            s.incumbent = Some((plan, g.outcomes));
        }
    }

    let status = s.run();
    if matches!(status, PlanStatus::Optimal | PlanStatus::Infeasible) && s.open.is_empty() {
        // Tree exhausted: the incumbent (or infeasibility) is proven.
        s.lower = s.upper;
    }
    let (plan, outcomes) = match s.incumbent.take() {
        Some((p, o)) => (Some(p), o),
        None => (None, Vec::new()),
    };
    let cost = plan.as_ref().map(|p| catalog.cost_of(&p.values()));
    let result = PlanResult {
        status,
        policy: policy.name().to_string(),
        plan,
        cost,
        lower_bound: s.lower.min(s.upper),
        upper_bound: s.upper,
        outcomes,
        cuts: s.cuts.iter().map(|c| c.a_r.clone()).collect(),
        accepted: s.accepted,
        trace: s.trace,
        counters: s.counters,
        metadata: Metadata {
            started_unix: started,
            wall_seconds: s.clock.elapsed().as_secs_f64(),
            solver_seconds: s.solver_seconds,
        },
    };
    Ok(BnbRun { result, log: s.log })
}
