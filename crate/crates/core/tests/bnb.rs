mod common;

use std::collections::BTreeSet;

use gridplan::bnb::*;
use gridplan::network::*;
use gridplan::operational::*;
use gridplan::policies::*;
use gridplan::relaxation::*;
use gridplan::Error;
use proptest::prelude::*;

fn lim() -> OperationalLimits {
    OperationalLimits::none()
}

fn run(inst: &common::Instance, policy: &dyn Policy, params: &BnbParams) -> BnbRun {
    branch_and_bound(&inst.case, &inst.catalog, &inst.scenarios, policy, &lim(), params).unwrap()
}

fn oracle(inst: &common::Instance, policy: &dyn Policy) -> OracleResult {
    brute_force_oracle(&inst.case, &inst.catalog, &inst.scenarios, policy, &lim()).unwrap()
}

fn set(plans: &[Plan]) -> BTreeSet<Vec<bool>> {
    plans.iter().map(|p| p.bits().to_vec()).collect()
}

/// The scenarios with every demand scaled by `f`.
fn scaled(inst: &common::Instance, f: f64) -> ScenarioSet {
    ScenarioSet::new(
        inst.scenarios
            .iter()
            .map(|s| Snapshot {
                demand: s.demand.iter().map(|d| d * f).collect(),
                v_recorded: None,
                ..s.clone()
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn matches_oracle_on_toys() {
    let policy = NewtonPfPolicy::default();
    for inst in common::toys() {
        let want = oracle(&inst, &policy);
        for greedy in [true, false] {
            let got = run(&inst, &policy, &BnbParams { greedy, ..BnbParams::default() }).result;
            assert_eq!(got.status, PlanStatus::Optimal, "{}", inst.name);
            assert_eq!(got.cost, want.result.cost, "{} greedy {greedy}", inst.name);
            assert!(want.feasible.contains(got.plan.as_ref().unwrap()));
            assert!(got.lower_bound <= got.upper_bound);
            assert_eq!(got.outcomes.len(), inst.scenarios.len());
            assert!(got.outcomes.iter().all(|o| o.feasible));
        }
    }
}

#[test]
fn accepted_set_equals_policy_feasible_set() {
    let policy = NewtonPfPolicy::default();
    for inst in common::toys() {
        let want = oracle(&inst, &policy);
        let params = BnbParams {
            enumerate_all: true,
            ..BnbParams::default()
        };
        let got = run(&inst, &policy, &params).result;
        assert_eq!(set(&got.accepted), set(&want.feasible), "{}", inst.name);
        assert_eq!(got.cost, want.result.cost);
        // No cut removes a policy-feasible plan.
        for cut in &got.cuts {
            assert!(!want.feasible.contains(cut), "{}: cut {cut}", inst.name);
        }
    }
}

#[test]
fn cuts_close_the_relaxation_onto_the_feasible_set() {
    // The plans whose relaxation is feasible, minus one cut per plan the
    // policy rejects, are exactly the policy-feasible plans.
    let policy = NewtonPfPolicy::default();
    for inst in common::toys() {
        let model = build_qcqp(&inst.case, &inst.catalog, &inst.scenarios, &lim(), &QcqpOptions::default()).unwrap();
        let want = oracle(&inst, &policy);
        let mut relaxed = Vec::new();
        for k in 0..1u64 << inst.catalog.n() {
            let plan = Plan::from_index(inst.catalog.n(), k);
            let node = NodeProblem::fixed(plan.bits(), Objective::UpgradeCost);
            let sol = solve_node_relaxation(&model, &node, &ClarabelBackend, &BackendSettings::default());
            if sol.status == SdpStatus::Optimal {
                relaxed.push(plan);
            }
        }
        let cuts: Vec<PolicyCut> = relaxed
            .iter()
            .filter(|p| !want.feasible.contains(p))
            .map(|p| make_policy_cut(&p.values()).unwrap())
            .collect();
        let survivors: Vec<Plan> = relaxed
            .iter()
            .filter(|p| cuts.iter().all(|c| !c.excludes(&p.values())))
            .cloned()
            .collect();
        assert_eq!(set(&survivors), set(&want.feasible), "{}", inst.name);
    }
}

#[test]
fn log_is_consistent() {
    let policy = NewtonPfPolicy::default();
    for inst in common::toys() {
        let r = run(&inst, &policy, &BnbParams { greedy: false, ..BnbParams::default() });
        let t = &r.result.trace;
        assert!(!t.is_empty());
        for w in t.windows(2) {
            assert!(w[1].lower >= w[0].lower - 1e-9, "{}: {t:?}", inst.name);
            assert!(w[1].upper <= w[0].upper);
        }
        assert!(t.iter().all(|b| b.lower <= b.upper));
        // Every incumbent follows a feasible policy evaluation of its plan.
        let mut checked = 0;
        for (k, e) in r.log.iter().enumerate() {
            if let LogEvent::Incumbent { a, .. } = e {
                let seen = r.log[..k]
                    .iter()
                    .any(|p| matches!(p, LogEvent::Policy { a: pa, feasible: true, .. } if pa == a));
                assert!(seen, "{}: incumbent {a} without evaluation", inst.name);
                checked += 1;
            }
            if let LogEvent::Cut { a_r, snapshot } = e {
                assert!(*snapshot < inst.scenarios.len());
                assert!(r.result.cuts.contains(a_r));
            }
        }
        assert!(checked >= 1);
        assert_eq!(r.result.counters.cuts_added, r.result.cuts.len());
    }
}

#[test]
fn no_policy_reduces_to_plain_branch_and_bound() {
    let policy = NoPolicy::default();
    for inst in common::toys() {
        let want = oracle(&inst, &policy);
        let got = run(&inst, &policy, &BnbParams::default()).result;
        assert_eq!(got.cost, want.result.cost, "{}", inst.name);
        assert!(got.cuts.is_empty());
    }
}

#[test]
fn batched_search_is_reproducible() {
    let inst = common::instance("toy4");
    let policy = NewtonPfPolicy::default();
    let base = BnbParams { greedy: false, ..BnbParams::default() };
    let one = run(&inst, &policy, &base).result;
    assert_eq!(one.canonical_json(), run(&inst, &policy, &base).result.canonical_json());
    let two = BnbParams { batch: 2, ..base.clone() };
    let a = run(&inst, &policy, &two).result;
    let b = run(&inst, &policy, &two).result;
    assert_eq!(a.canonical_json(), b.canonical_json());
    assert_eq!(a.cost, one.cost);
}

#[test]
fn node_budget_returns_certified_bounds() {
    let inst = common::instance("toy4");
    let params = BnbParams {
        greedy: false,
        node_budget: Some(1),
        ..BnbParams::default()
    };
    let r = run(&inst, &NewtonPfPolicy::default(), &params).result;
    assert_eq!(r.counters.relaxation_solves, 1);
    assert!(matches!(r.status, PlanStatus::BudgetExhausted | PlanStatus::FeasibleGap | PlanStatus::Optimal));
    assert!(r.lower_bound <= r.upper_bound);
    let best = oracle(&inst, &NewtonPfPolicy::default()).result.cost.unwrap();
    assert!(r.lower_bound <= best + 1e-6);
}

#[test]
fn greedy_keeps_a_feasible_zero_plan() {
    let inst = common::instance("toy4");
    let light = scaled(&inst, 0.1);
    let g = greedy_incumbent(&inst.case, &inst.catalog, &light, &NewtonPfPolicy::default(), &lim());
    assert_eq!(g.plan, Some(Plan::zeros(inst.catalog.n())));
    let r = branch_and_bound(&inst.case, &inst.catalog, &light, &NewtonPfPolicy::default(), &lim(), &BnbParams::default())
        .unwrap()
        .result;
    assert_eq!(r.cost, Some(0.0));
}

#[test]
fn greedy_upgrades_the_congested_branch() {
    let inst = common::instance("toy3");
    let g = greedy_incumbent(&inst.case, &inst.catalog, &inst.scenarios, &NewtonPfPolicy::default(), &lim());
    let plan = g.plan.unwrap();
    assert_eq!(plan.count(), 1);
    let i = plan.active().next().unwrap();
    assert_eq!(inst.catalog.options[i].branch, 1);
    assert!(oracle(&inst, &NewtonPfPolicy::default()).feasible.contains(&plan));
    assert_eq!(g.outcomes.len(), 1);
}

#[test]
fn hopeless_load_has_no_plan() {
    let inst = common::instance("toy2");
    let heavy = scaled(&inst, 20.0);
    let policy = NewtonPfPolicy::default();
    let g = greedy_incumbent(&inst.case, &inst.catalog, &heavy, &policy, &lim());
    assert!(g.plan.is_none());
    let o = brute_force_oracle(&inst.case, &inst.catalog, &heavy, &policy, &lim()).unwrap();
    assert!(o.feasible.is_empty());
    assert_eq!(o.result.status, PlanStatus::Infeasible);
    let r = branch_and_bound(&inst.case, &inst.catalog, &heavy, &policy, &lim(), &BnbParams::default()).unwrap();
    assert_eq!(r.result.status, PlanStatus::Infeasible);
    assert_eq!(r.result.plan, None);
}

#[test]
fn oracle_without_options_decides_the_zero_plan() {
    let inst = common::instance("toy2");
    let empty = UpgradeCatalog::empty();
    let policy = NewtonPfPolicy::default();
    let o = brute_force_oracle(&inst.case, &empty, &inst.scenarios, &policy, &lim()).unwrap();
    assert_eq!(o.admissible, 1);
    assert_eq!(o.result.status, PlanStatus::Infeasible);
    let light = scaled(&inst, 0.1);
    let o = brute_force_oracle(&inst.case, &empty, &light, &policy, &lim()).unwrap();
    assert_eq!(o.result.cost, Some(0.0));
    assert_eq!(o.result.plan, Some(Plan::zeros(0)));
}

#[test]
fn oracle_breaks_ties_lexicographically() {
    let inst = common::instance("toy3");
    let options = inst
        .catalog
        .options
        .iter()
        .map(|o| UpgradeOption { cost: 1.0, ..o.clone() })
        .collect();
    let flat = UpgradeCatalog::new(&inst.case, options, vec![]).unwrap();
    let o = brute_force_oracle(&inst.case, &flat, &inst.scenarios, &NewtonPfPolicy::default(), &lim()).unwrap();
    // Options 1 and 2 each repair the network alone; (0,0,1) < (0,1,0).
    assert_eq!(o.result.cost, Some(1.0));
    assert_eq!(o.result.plan, Some(Plan::from_bits(vec![false, false, true])));
}

#[test]
fn oracle_rejects_large_catalogs() {
    let inst = common::instance("case30");
    assert!(inst.catalog.n() > ORACLE_LIMIT);
    let err = brute_force_oracle(&inst.case, &inst.catalog, &inst.scenarios, &NewtonPfPolicy::default(), &lim()).unwrap_err();
    assert!(matches!(err, Error::TooManyUpgrades { .. }));
}

#[test]
fn cut_examples() {
    let cut = make_policy_cut(&[0.0, 0.0, 0.0]).unwrap();
    let row = cut.row();
    assert!(row.coeffs.iter().all(|&(_, c)| c == -1.0));
    assert_eq!(row.rhs, -1.0);
    assert!(cut.excludes(&[0.0; 3]));
    assert!(!cut.excludes(&[0.0, 1.0, 0.0]));
    assert!(make_policy_cut(&[0.5]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cut_excludes_exactly_its_plan(n in 1usize..=6, seed in any::<u64>()) {
        let a_r = Plan::from_index(n, seed % (1 << n));
        let cut = make_policy_cut(&a_r.values()).unwrap();
        let row = cut.row();
        for k in 0..1u64 << n {
            let a = Plan::from_index(n, k).values();
            let excluded = cut.excludes(&a);
            prop_assert_eq!(excluded, Plan::from_index(n, k) == a_r);
            prop_assert_eq!(row.eval(&a) > row.rhs + 1e-9, excluded);
            if !excluded {
                prop_assert!(cut.value(&a) >= 1.0);
            } else {
                prop_assert_eq!(cut.value(&a), 0.0);
            }
        }
    }
}
