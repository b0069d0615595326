//! Build the three toy instances and write their case, catalog and snapshot
//! files. Each file is compared with the bundled copy under data/.
//!
//! cargo run --example build_toys -- [out_dir]

use std::path::{Path, PathBuf};

use gridplan::network::*;
use gridplan::operational::Snapshot;
use num_complex::Complex64 as C;

fn z(r: f64, x: f64) -> C {
    C::new(1.0, 0.0) / C::new(r, x)
}

/// An option that scales branch `br` by `f`.
fn scaled(id: usize, case: &NetworkCase, br: usize, f: f64, cost: f64) -> UpgradeOption {
    let b = &case.branches[br];
    UpgradeOption {
        id,
        branch: br,
        delta_y: b.y * (f - 1.0),
        delta_i: if b.i_max.is_finite() { (f - 1.0) * b.i_max } else { 0.0 },
        cost,
    }
}

fn toy2() -> gridplan::Result<(NetworkCase, UpgradeCatalog, Vec<Snapshot>)> {
    let case = NetworkCase {
        name: "toy2".into(),
        base_mva: 100.0,
        units: Units::Pu,
        buses: vec![Bus::slack(0, 0.95, 1.05, 1.0), Bus::load(1, 0.95, 1.05)],
        branches: vec![Branch::new(0, 1, z(0.05, 0.2), f64::INFINITY)],
    };
    let cat = UpgradeCatalog::new(&case, vec![scaled(0, &case, 0, 1.5, 1.0), scaled(1, &case, 0, 3.0, 2.0)], vec![])?;
    let peak = Snapshot::new(&case, "peak", &[(1, C::new(0.8, 0.3))], None)?;
    Ok((case, cat, vec![peak]))
}

fn toy3() -> gridplan::Result<(NetworkCase, UpgradeCatalog, Vec<Snapshot>)> {
    // A chain whose second branch carries a current limit.
    let case = NetworkCase {
        name: "toy3".into(),
        base_mva: 100.0,
        units: Units::Pu,
        buses: vec![Bus::slack(0, 0.95, 1.05, 1.02), Bus::load(1, 0.95, 1.05), Bus::load(2, 0.95, 1.05)],
        branches: vec![Branch::new(0, 1, z(0.01, 0.05), f64::INFINITY), Branch::new(1, 2, z(0.02, 0.1), 0.5)],
    };
    let options = vec![
        scaled(0, &case, 0, 2.0, 1.0),
        scaled(1, &case, 1, 1.5, 1.0),
        scaled(2, &case, 1, 3.0, 2.0),
    ];
    let cat = UpgradeCatalog::new(&case, options, vec![])?;
    let peak = Snapshot::new(&case, "peak", &[(1, C::new(0.3, 0.1)), (2, C::new(0.5, 0.15))], None)?;
    Ok((case, cat, vec![peak]))
}

fn toy4() -> gridplan::Result<(NetworkCase, UpgradeCatalog, Vec<Snapshot>)> {
    // A ring with a PV generator at bus 3 and two load snapshots.
    let mut gen = Bus::load(3, 0.95, 1.05);
    gen.kind = BusKind::Generator;
    gen.p_min = 0.0;
    gen.p_max = 1.0;
    gen.q_min = -0.5;
    gen.q_max = 0.5;
    gen.v_setpoint = Some(1.0);
    gen.p_setpoint = Some(0.3);
    let case = NetworkCase {
        name: "toy4".into(),
        base_mva: 100.0,
        units: Units::Pu,
        buses: vec![Bus::slack(0, 0.95, 1.05, 1.0), Bus::load(1, 0.95, 1.05), Bus::load(2, 0.95, 1.05), gen],
        branches: vec![
            Branch::new(0, 1, z(0.02, 0.08), f64::INFINITY),
            Branch::new(1, 2, z(0.04, 0.2), f64::INFINITY),
            Branch::new(2, 3, z(0.04, 0.25), f64::INFINITY),
            Branch::new(3, 0, z(0.02, 0.1), f64::INFINITY),
        ],
    };
    let costs = [1.0, 2.0, 1.0, 3.0];
    let cat = UpgradeCatalog::new(&case, (0..4).map(|k| scaled(k, &case, k, 2.0, costs[k])).collect(), vec![])?;
    let peak = Snapshot::new(&case, "peak", &[(1, C::new(0.4, 0.15)), (2, C::new(0.6, 0.25))], None)?;
    let evening = Snapshot::new(&case, "evening", &[(1, C::new(0.5, 0.2)), (2, C::new(0.4, 0.2))], None)?;
    Ok((case, cat, vec![peak, evening]))
}

fn write(out: &Path, name: &str, text: &str) -> gridplan::Result<()> {
    let path = out.join(name);
    gridplan::io::write_text(&path, text)?;
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name);
    let same = std::fs::read_to_string(&bundled).is_ok_and(|b| b == text);
    println!("{:<32} {}", name, if same { "matches data/" } else { "differs from data/" });
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/fixtures".into()).into();
    std::fs::create_dir_all(&out)?;
    for (case, cat, snaps) in [toy2()?, toy3()?, toy4()?] {
        write(&out, &format!("{}.case.json", case.name), &case.to_json())?;
        write(&out, &format!("{}.catalog.json", case.name), &cat.to_json())?;
        for s in &snaps {
            write(&out, &format!("{}.{}.snapshot.json", case.name, s.label), &s.to_json(&case))?;
        }
    }
    Ok(())
}
