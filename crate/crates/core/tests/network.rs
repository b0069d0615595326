mod common;

use approx::assert_abs_diff_eq;
use gridplan::io::{parse_matpower, read_text};
use gridplan::network::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn case_with(n: usize, branches: Vec<Branch>) -> NetworkCase {
    let mut buses = vec![Bus::slack(0, 0.9, 1.1, 1.0)];
    buses.extend((1..n).map(|j| Bus::load(j, 0.9, 1.1)));
    NetworkCase {
        name: "t".into(),
        base_mva: 100.0,
        units: Units::Pu,
        buses,
        branches,
    }
}

#[test]
fn star_network_entries() {
    let y = c(0.0, -5.0);
    let case = case_with(3, vec![Branch::new(0, 1, y, 1.0), Branch::new(0, 2, y, 1.0)]);
    let m = build_admittance(&case).unwrap();
    assert_eq!(m.get(0, 0), c(0.0, -10.0));
    assert_eq!(m.get(1, 1), c(0.0, -5.0));
    assert_eq!(m.get(0, 1), c(0.0, 5.0));
    assert_eq!(m.get(1, 2), c(0.0, 0.0));
    assert_eq!(m.nnz(), 7);
}

#[test]
fn duplicate_branch_rejected() {
    let case = case_with(2, vec![Branch::new(0, 1, c(1.0, -2.0), 1.0), Branch::new(1, 0, c(1.0, -2.0), 1.0)]);
    assert!(build_admittance(&case).is_err());
    assert!(case.validate().is_err());
}

/// Reads `mpc.<name> = [ ... ];` rows as numbers.
fn matpower_table(text: &str, name: &str) -> Vec<Vec<f64>> {
    let start = text.find(&format!("mpc.{name} = [")).unwrap();
    let body = &text[start..];
    let body = &body[body.find('[').unwrap() + 1..body.find("];").unwrap()];
    body.lines()
        .map(|l| l.split('%').next().unwrap().trim().trim_end_matches(';'))
        .filter(|l| !l.is_empty())
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect()
}

#[test]
fn case30_matches_double_loop_assembly() {
    let text = read_text(&common::data("case30.m")).unwrap();
    let parsed = parse_matpower(&text, "case30").unwrap();
    let y = build_admittance(&parsed.case).unwrap().to_dense();

    // Independent assembly from the published tables: bus ids are 1..=30.
    let base = 100.0;
    let bus = matpower_table(&text, "bus");
    let branch = matpower_table(&text, "branch");
    let n = bus.len();
    let mut oracle = vec![vec![c(0.0, 0.0); n]; n];
    for j in 0..n {
        for l in 0..n {
            let mut acc = c(0.0, 0.0);
            for br in &branch {
                let (f, t) = (br[0] as usize - 1, br[1] as usize - 1);
                let ys = c(1.0, 0.0) / c(br[2], br[3]);
                let half = c(0.0, br[4] / 2.0);
                if j == l && (f == j || t == j) {
                    acc += ys + half;
                } else if (f, t) == (j, l) || (t, f) == (j, l) {
                    acc -= ys;
                }
            }
            if j == l {
                acc += c(bus[j][4], bus[j][5]) / base;
            }
            oracle[j][l] = acc;
        }
    }
    for j in 0..n {
        for l in 0..n {
            assert_abs_diff_eq!(y[(j, l)].re, oracle[j][l].re, epsilon = 1e-12);
            assert_abs_diff_eq!(y[(j, l)].im, oracle[j][l].im, epsilon = 1e-12);
        }
    }
}

#[test]
fn zero_plan_is_identity() {
    let inst = common::instance("toy4");
    let up = apply_upgrades(&inst.case, &inst.catalog, &Plan::zeros(inst.catalog.n())).unwrap();
    assert_eq!(up, inst.case);
}

#[test]
fn case30_single_upgrade_scales_one_branch() {
    let inst = common::instance("case30");
    let m = 17;
    let opt = inst.catalog.per_branch[&m][0];
    let mut plan = Plan::zeros(inst.catalog.n());
    plan.set(opt, true);
    let up = apply_upgrades(&inst.case, &inst.catalog, &plan).unwrap();
    for (k, (b0, b1)) in inst.case.branches.iter().zip(&up.branches).enumerate() {
        if k == m {
            assert_abs_diff_eq!((b1.y - b0.y * 1.5).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(b1.i_max, 1.5 * b0.i_max, epsilon = 1e-12);
        } else {
            assert_eq!(b0, b1);
        }
    }
}

#[test]
fn plan_checks() {
    let inst = common::instance("toy2");
    let both = Plan::from_bits(vec![true, true]);
    assert!(apply_upgrades(&inst.case, &inst.catalog, &both).is_err());
    assert!(Plan::from_values(&[0.5, 0.0]).is_err());
    assert!(apply_upgrades(&inst.case, &inst.catalog, &Plan::zeros(3)).is_err());
}

#[test]
fn catalog_without_exclusivity_is_detected() {
    let inst = common::instance("toy2");
    let cat = UpgradeCatalog::without_exclusivity(&inst.case, inst.catalog.options.clone(), vec![]).unwrap();
    assert!(!cat.has_exclusivity_rows());
    assert!(inst.catalog.has_exclusivity_rows());
}

#[test]
fn json_round_trip_is_stable() {
    for inst in common::toys() {
        let text = inst.case.to_json();
        assert_eq!(NetworkCase::from_json(&text).unwrap().to_json(), text);
        let cat = inst.catalog.to_json();
        assert_eq!(UpgradeCatalog::from_json(&inst.case, &cat).unwrap().to_json(), cat);
    }
}

#[test]
fn mva_units_are_converted() {
    let text = r#"{"base_mva": 100, "units": "mva",
        "buses": [
          {"id": 0, "kind": "slack", "v_min": 0.9, "v_max": 1.1, "p_min": null, "p_max": null, "q_min": null, "q_max": null, "v_setpoint": 1.0},
          {"id": 1, "kind": "generator", "v_min": 0.9, "v_max": 1.1, "p_min": 0, "p_max": 50, "q_min": -20, "q_max": 20, "y_shunt": [0, 19], "p_setpoint": 30}
        ],
        "branches": [{"from": 0, "to": 1, "y": [1, -5], "i_max": 80}]}"#;
    let case = NetworkCase::from_json(text).unwrap();
    assert_abs_diff_eq!(case.buses[1].p_max, 0.5);
    assert_abs_diff_eq!(case.buses[1].q_min, -0.2);
    assert_abs_diff_eq!(case.buses[1].y_shunt.im, 0.19);
    assert_eq!(case.buses[1].p_setpoint, Some(0.3));
    assert_abs_diff_eq!(case.branches[0].i_max, 0.8);
}

/// A random connected network: a spanning path with random extra chords.
fn network() -> impl Strategy<Value = NetworkCase> {
    (3usize..7)
        .prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (j + 1..n).map(move |l| (j, l))).collect();
            let m = pairs.len();
            (
                Just(n),
                Just(pairs),
                proptest::collection::vec(any::<bool>(), m),
                proptest::collection::vec((0.1f64..5.0, -20.0f64..-0.5), m),
                proptest::collection::vec(-0.1f64..0.1, n),
            )
        })
        .prop_map(|(n, pairs, keep, ys, shunts)| {
            let branches = pairs
                .iter()
                .zip(keep.iter().zip(&ys))
                .filter(|((j, l), (k, _))| *l == j + 1 || **k)
                .map(|(&(j, l), (_, &(g, b)))| Branch::new(j, l, c(g, b), 1.0))
                .collect();
            let mut case = case_with(n, branches);
            for (bus, s) in case.buses.iter_mut().zip(shunts) {
                bus.y_shunt = c(0.0, s);
            }
            case
        })
}

proptest! {
    #[test]
    fn admittance_symmetric_with_graph_pattern(case in network()) {
        let y = build_admittance(&case).unwrap();
        let adj = case.adjacency();
        let n = case.n_bus();
        let mut shunt_sum = c(0.0, 0.0);
        for j in 0..n {
            for l in 0..n {
                prop_assert_eq!(y.get(j, l), y.get(l, j));
                if j != l {
                    prop_assert_eq!(y.get(j, l) != c(0.0, 0.0), adj[j].contains(&l));
                }
            }
            let row: Complex64 = (0..n).map(|l| y.get(j, l)).sum();
            prop_assert!((row - case.buses[j].y_shunt).norm() < 1e-12);
            shunt_sum += row;
        }
        let total: Complex64 = case.buses.iter().map(|b| b.y_shunt).sum();
        prop_assert!((shunt_sum - total).norm() < 1e-12);
    }

    #[test]
    fn upgrades_add_to_admittance(case in network(), factors in proptest::collection::vec(1.1f64..3.0, 2), pick in any::<u64>()) {
        let cat = UpgradeCatalog::scaled_lines(&case, &factors, 1.0).unwrap();
        // One option or none per branch, chosen by `pick`.
        let mut plan = Plan::zeros(cat.n());
        for (k, ids) in cat.per_branch.iter() {
            let choice = (pick >> (2 * (k % 32))) as usize % (ids.len() + 1);
            if choice > 0 {
                plan.set(ids[choice - 1], true);
            }
        }
        let up = apply_upgrades(&case, &cat, &plan).unwrap();
        let got = build_admittance(&up).unwrap().to_dense();
        let mut want = build_admittance(&case).unwrap().to_dense();
        for i in plan.active() {
            for (r, col, d) in cat.options[i].delta_entries(&case) {
                want[(r, col)] += d;
            }
        }
        prop_assert!((got - want).iter().all(|d| d.norm() < 1e-12));
        for (k, br) in up.branches.iter().enumerate() {
            let di: f64 = plan.active().filter(|&i| cat.options[i].branch == k).map(|i| cat.options[i].delta_i).sum();
            prop_assert!((br.i_max - (case.branches[k].i_max + di)).abs() < 1e-12);
        }
    }

    #[test]
    fn upgrade_order_is_irrelevant(case in network()) {
        let cat = UpgradeCatalog::scaled_lines(&case, &[2.0], 1.0).unwrap();
        let (i, j) = (0, cat.n() - 1);
        let mut a = Plan::zeros(cat.n());
        a.set(i, true);
        let mut b = Plan::zeros(cat.n());
        b.set(j, true);
        let ab = apply_upgrades(&apply_upgrades(&case, &cat, &a).unwrap(), &cat, &b).unwrap();
        let ba = apply_upgrades(&apply_upgrades(&case, &cat, &b).unwrap(), &cat, &a).unwrap();
        let mut both = a.clone();
        both.set(j, true);
        let once = apply_upgrades(&case, &cat, &both).unwrap();
        for ((x, y), z) in ab.branches.iter().zip(&ba.branches).zip(&once.branches) {
            prop_assert!((x.y - y.y).norm() < 1e-12 && (x.y - z.y).norm() < 1e-12);
        }
    }
}
