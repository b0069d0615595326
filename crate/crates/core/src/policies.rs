//! Operating policies: maps from an upgraded network and a snapshot to an
//! operating point, with a feasibility verdict.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::network::{build_admittance, NetworkCase, UpgradeCatalog};
use crate::operational::{check_feasibility, OperatingPoint, OperationalLimits, ScenarioSet, Snapshot, ViolationReport};
use crate::power_flow::{newton_power_flow, PfBus, PfOptions, PfSpec};
use crate::relaxation::backend::{BackendSettings, ClarabelBackend, ConicBackend};
use crate::relaxation::qcqp::{build_qcqp, unstack, QcqpOptions};
use crate::relaxation::{extract_rank1_candidate, solve_node_relaxation, NodeProblem, Objective, SdpStatus};

/// Result of evaluating a policy on one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    /// The operating point chosen by the policy; absent when the policy
    /// could not produce a Kirchhoff-consistent state.
    pub point: Option<OperatingPoint>,
    pub feasible: bool,
    pub report: ViolationReport,
    pub diagnostics: BTreeMap<String, f64>,
}

impl PolicyOutcome {
    fn from_point(case: &NetworkCase, snapshot: &Snapshot, point: OperatingPoint, limits: &OperationalLimits) -> Self {
        let report = check_feasibility(case, snapshot, &point, limits);
        let mut diagnostics = BTreeMap::new();
        let s = case.slack();
        let slack_gen = point.s[s] + snapshot.demand[s];
        diagnostics.insert("slack_p".into(), slack_gen.re);
        diagnostics.insert("slack_q".into(), slack_gen.im);
        diagnostics.insert("avg_voltage_slack".into(), report.avg_voltage_slack);
        diagnostics.insert("max_slack".into(), report.max_slack);
        diagnostics.insert("sum_slack".into(), report.sum_slack);
        PolicyOutcome {
            point: Some(point),
            feasible: report.is_clean(),
            report,
            diagnostics,
        }
    }

    fn without_point(case: &NetworkCase) -> Self {
        PolicyOutcome {
            point: None,
            feasible: false,
            report: ViolationReport::clean(case.n_bus(), case.branches.len()),
            diagnostics: BTreeMap::new(),
        }
    }

    /// The sum of slacks used to rank candidate upgrades; infinite without
    /// a point.
    pub fn total_slack(&self) -> f64 {
        if self.point.is_some() {
            self.report.sum_slack
        } else {
            f64::INFINITY
        }
    }
}

/// An operating policy `g(a, s_load)`. Implementations are deterministic.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    /// Evaluates the policy on an already upgraded network.
    fn evaluate(&self, case: &NetworkCase, snapshot: &Snapshot, limits: &OperationalLimits) -> PolicyOutcome;

    /// True for the degenerate policy under which any relaxation-feasible
    /// binary plan is accepted. Branch-and-Bound then skips evaluation.
    fn accepts_relaxation(&self) -> bool {
        false
    }
}

/// Feasibility of a plan for every snapshot; stops at the first failure.
/// Returns the outcomes evaluated so far and the failing snapshot index.
pub fn evaluate_all(
    policy: &dyn Policy,
    case: &NetworkCase,
    scenarios: &ScenarioSet,
    limits: &OperationalLimits,
) -> (Vec<PolicyOutcome>, Option<usize>) {
    let mut out = Vec::with_capacity(scenarios.len());
    for (k, snap) in scenarios.iter().enumerate() {
        let o = policy.evaluate(case, snap, limits);
        let bad = !o.feasible;
        out.push(o);
        if bad {
            return (out, Some(k));
        }
    }
    (out, None)
}

/// No operating policy: a plan is acceptable when the semidefinite
/// relaxation at that plan is feasible. The reported point is the rank-1
/// candidate of the relaxation and need not lie in the operating set.
#[derive(Clone, Debug, Default)]
pub struct NoPolicy {
    pub settings: BackendSettings,
}

impl Policy for NoPolicy {
    fn name(&self) -> &str {
        "none"
    }

    fn accepts_relaxation(&self) -> bool {
        true
    }

    fn evaluate(&self, case: &NetworkCase, snapshot: &Snapshot, limits: &OperationalLimits) -> PolicyOutcome {
        let scen = ScenarioSet::single(snapshot.clone());
        let Ok(model) = build_qcqp(case, &UpgradeCatalog::empty(), &scen, limits, &QcqpOptions::default()) else {
            return PolicyOutcome::without_point(case);
        };
        let node = NodeProblem::fixed(&[], Objective::UpgradeCost);
        let sol = solve_node_relaxation(&model, &node, &ClarabelBackend, &self.settings);
        if sol.status != SdpStatus::Optimal {
            let mut o = PolicyOutcome::without_point(case);
            o.diagnostics.insert("relaxation_feasible".into(), 0.0);
            return o;
        }
        let mut o = relaxation_outcome(case, snapshot, &sol.z[0], limits);
        o.feasible = true;
        o
    }
}

/// Outcome built from the leading eigenvector of a relaxation block. The
/// `feasible` flag reflects the operating set only.
pub fn relaxation_outcome(
    case: &NetworkCase,
    snapshot: &Snapshot,
    zz: &nalgebra::DMatrix<f64>,
    limits: &OperationalLimits,
) -> PolicyOutcome {
    let r1 = extract_rank1_candidate(zz, case.slack());
    let y = build_admittance(case).expect("validated case");
    let point = OperatingPoint::from_voltages(&y, unstack(&r1.z));
    let mut o = PolicyOutcome::from_point(case, snapshot, point, limits);
    o.diagnostics.insert("rank1_gap".into(), r1.gap);
    o.diagnostics.insert("relaxation_feasible".into(), 1.0);
    o
}

/// Newton power flow from the snapshot voltages with the case setpoints.
#[derive(Clone, Debug, Default)]
pub struct NewtonPfPolicy {
    pub options: PfOptions,
}

impl Policy for NewtonPfPolicy {
    fn name(&self) -> &str {
        "newton-pf"
    }

    fn evaluate(&self, case: &NetworkCase, snapshot: &Snapshot, limits: &OperationalLimits) -> PolicyOutcome {
        let spec = PfSpec::from_case(case, snapshot);
        pf_outcome(case, snapshot, &spec, &self.options, limits)
    }
}

fn pf_outcome(
    case: &NetworkCase,
    snapshot: &Snapshot,
    spec: &PfSpec,
    options: &PfOptions,
    limits: &OperationalLimits,
) -> PolicyOutcome {
    let res = match newton_power_flow(case, spec, options) {
        Ok(r) => r,
        Err(_) => {
            let mut o = PolicyOutcome::without_point(case);
            o.diagnostics.insert("converged".into(), 0.0);
            return o;
        }
    };
    let mut o = if res.converged {
        PolicyOutcome::from_point(case, snapshot, res.point, limits)
    } else {
        PolicyOutcome::without_point(case)
    };
    o.diagnostics.insert("converged".into(), if res.converged { 1.0 } else { 0.0 });
    o.diagnostics.insert("iterations".into(), res.iterations as f64);
    o.diagnostics.insert("residual_inf".into(), res.residual_inf);
    o
}

/// Redispatch minimizing generation plus penalized constraint slacks.
///
/// The relaxation is solved on a copy of the case whose limits are pulled
/// inward by `margin`; its rank-1 voltages give the generator magnitudes
/// and active dispatch, which are refined by a Newton power flow. Small
/// errors of the extracted voltages are amplified in the branch currents,
/// so when the refined point still violates a limit, that limit is pulled
/// in by twice the violation and the relaxation is solved again, at most
/// `rounds` times. When no round yields a feasible point, the power flow
/// at the case's own setpoints is tried as well.
#[derive(Clone, Debug)]
pub struct DispatchOpfPolicy {
    pub rho: f64,
    pub margin: f64,
    pub rounds: usize,
    pub settings: BackendSettings,
    pub pf: PfOptions,
}

impl Default for DispatchOpfPolicy {
    fn default() -> Self {
        DispatchOpfPolicy {
            rho: 100.0,
            margin: 1e-3,
            rounds: 3,
            settings: BackendSettings::default(),
            pf: PfOptions::default(),
        }
    }
}

impl DispatchOpfPolicy {
    fn shrunk(&self, case: &NetworkCase) -> NetworkCase {
        let mut c = case.clone();
        let m = self.margin;
        for b in &mut c.buses {
            if b.v_max - b.v_min > 2.0 * m {
                b.v_min += m;
                b.v_max -= m;
            }
            if b.kind.is_dispatchable() {
                if b.p_max - b.p_min > 2.0 * m {
                    b.p_min += m;
                    b.p_max -= m;
                }
                if b.q_max - b.q_min > 2.0 * m {
                    b.q_min += m;
                    b.q_max -= m;
                }
            }
        }
        for br in &mut c.branches {
            br.i_max *= 1.0 - m;
        }
        c
    }

    /// Pulls the limits of `inner` violated at `point` (judged against
    /// `case`) inward by twice the violation. Returns false when nothing
    /// could be tightened.
    fn tighten(inner: &mut NetworkCase, case: &NetworkCase, snapshot: &Snapshot, point: &OperatingPoint) -> bool {
        let mut changed = false;
        let mut pull = |lo: &mut f64, hi: &mut f64, x: f64, lo0: f64, hi0: f64| {
            let room = (*hi - *lo) / 2.0;
            if x > hi0 {
                *hi -= (2.0 * (x - hi0)).min(room);
                changed = true;
            } else if x < lo0 {
                *lo += (2.0 * (lo0 - x)).min(room);
                changed = true;
            }
        };
        for (b, (ib, cb)) in inner.buses.iter_mut().zip(&case.buses).enumerate() {
            pull(&mut ib.v_min, &mut ib.v_max, point.v[b].norm(), cb.v_min, cb.v_max);
            if cb.kind.is_dispatchable() {
                let g = point.s[b] + snapshot.demand[b];
                pull(&mut ib.p_min, &mut ib.p_max, g.re, cb.p_min, cb.p_max);
                pull(&mut ib.q_min, &mut ib.q_max, g.im, cb.q_min, cb.q_max);
            }
        }
        for (ibr, cbr) in inner.branches.iter_mut().zip(&case.branches) {
            let i = cbr.y.norm() * (point.v[cbr.from] - point.v[cbr.to]).norm();
            let mut zero = 0.0;
            pull(&mut zero, &mut ibr.i_max, i, f64::NEG_INFINITY, cbr.i_max);
        }
        changed
    }

    /// Dispatch from the relaxation over `inner`, as a power-flow spec for
    /// `case`.
    fn redispatch(
        &self,
        case: &NetworkCase,
        inner: &NetworkCase,
        snapshot: &Snapshot,
        limits: &OperationalLimits,
    ) -> (Option<PfSpec>, BTreeMap<String, f64>) {
        let mut diag = BTreeMap::new();
        let scen = ScenarioSet::single(snapshot.clone());
        let model = match build_qcqp(inner, &UpgradeCatalog::empty(), &scen, limits, &QcqpOptions { with_slacks: true }) {
            Ok(m) => m,
            Err(_) => return (None, diag),
        };
        let node = NodeProblem::fixed(&[], Objective::Dispatch { rho: self.rho });
        let sol = solve_node_relaxation(&model, &node, &ClarabelBackend as &dyn ConicBackend, &self.settings);
        diag.insert("sdp_status".into(), sol.status as u8 as f64);
        diag.insert("sdp_iterations".into(), sol.iterations as f64);
        if sol.status != SdpStatus::Optimal {
            return (None, diag);
        }
        let slack_sum: f64 = model.blocks[0].layout.slacks().map(|k| sol.y[0][k]).sum();
        diag.insert("sdp_objective".into(), sol.objective);
        diag.insert("sdp_slack_sum".into(), slack_sum);
        let r1 = extract_rank1_candidate(&sol.z[0], case.slack());
        diag.insert("rank1_gap".into(), r1.gap);
        let v: Vec<Complex64> = unstack(&r1.z);
        let y = build_admittance(case).expect("validated case");
        let s = crate::operational::injections(&y, &v);
        let buses = case
            .buses
            .iter()
            .map(|b| match b.kind {
                crate::network::BusKind::Slack => PfBus::Slack { vm: v[b.id].norm() },
                crate::network::BusKind::Generator => PfBus::Pv {
                    p: s[b.id].re,
                    vm: v[b.id].norm(),
                },
                crate::network::BusKind::Load => PfBus::Pq {
                    s: snapshot.load_injection(b.id),
                },
            })
            .collect();
        (Some(PfSpec { buses, v0: v }), diag)
    }
}

impl Policy for DispatchOpfPolicy {
    fn name(&self) -> &str {
        "opf"
    }

    fn evaluate(&self, case: &NetworkCase, snapshot: &Snapshot, limits: &OperationalLimits) -> PolicyOutcome {
        let mut inner = self.shrunk(case);
        let mut outcome = PolicyOutcome::without_point(case);
        let mut diag = BTreeMap::new();
        let mut rounds = 0;
        while rounds < self.rounds.max(1) {
            rounds += 1;
            let (spec, d) = self.redispatch(case, &inner, snapshot, limits);
            diag = d;
            let Some(spec) = spec else { break };
            outcome = pf_outcome(case, snapshot, &spec, &self.pf, limits);
            let Some(point) = outcome.point.as_ref().filter(|_| !outcome.feasible) else {
                break;
            };
            if !Self::tighten(&mut inner, case, snapshot, point) {
                break;
            }
        }
        let mut fallback = 0.0;
        if !outcome.feasible {
            let base = pf_outcome(case, snapshot, &PfSpec::from_case(case, snapshot), &self.pf, limits);
            if base.feasible || (outcome.point.is_none() && base.point.is_some()) {
                outcome = base;
                fallback = 1.0;
            }
        }
        outcome.diagnostics.extend(diag);
        outcome.diagnostics.insert("opf_rounds".into(), rounds as f64);
        outcome.diagnostics.insert("fallback_setpoints".into(), fallback);
        outcome
    }
}

/// Policy by CLI name.
pub fn policy_by_name(name: &str) -> Option<Box<dyn Policy>> {
    match name {
        "none" => Some(Box::new(NoPolicy::default())),
        "newton-pf" => Some(Box::new(NewtonPfPolicy::default())),
        "opf" => Some(Box::new(DispatchOpfPolicy::default())),
        _ => None,
    }
}
