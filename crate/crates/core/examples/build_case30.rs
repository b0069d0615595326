//! Ingest the MATPOWER 30-bus case, tighten the voltage band to
//! [1.01, 1.07], solve the base power flow to record a snapshot, and write
//! the instance with the x1.5 / x3 line catalog.
//!
//! cargo run --example build_case30 -- [out_dir]

use std::path::{Path, PathBuf};

use gridplan::io::{parse_matpower, read_text};
use gridplan::network::{build_admittance, UpgradeCatalog};
use gridplan::operational::Snapshot;
use gridplan::power_flow::{newton_power_flow, PfOptions, PfSpec};

const SETPOINTS: [(usize, f64); 6] = [(0, 1.05), (1, 1.05), (12, 1.05), (21, 1.04), (22, 1.04), (26, 1.035)];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/fixtures".into()).into();
    std::fs::create_dir_all(&out)?;
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let m = parse_matpower(&read_text(&data.join("case30.m"))?, "case30")?;
    let mut case = m.case.clone().with_voltage_band(1.01, 1.07);
    case.name = "case30-tight".into();
    for (bus, v) in SETPOINTS {
        case.buses[bus].v_setpoint = Some(v);
    }

    let base = &m.base_snapshot;
    let pf = newton_power_flow(&case, &PfSpec::from_case(&case, base), &PfOptions::default())?;
    println!("base power flow: {:?} in {} iterations", pf.status, pf.iterations);
    let snap = Snapshot {
        label: "recorded".into(),
        demand: base.demand.clone(),
        v_recorded: Some(pf.point.v.clone()),
    };
    snap.validate_voltages(&case, &build_admittance(&case)?)?;
    let catalog = UpgradeCatalog::scaled_lines(&case, &[1.5, 3.0], 1.0)?;
    println!("{} buses, {} branches, {} upgrade options", case.buses.len(), case.branches.len(), catalog.n());

    for (name, text) in [
        ("case30.case.json", case.to_json()),
        ("case30.recorded.snapshot.json", snap.to_json(&case)),
        ("case30.catalog.json", catalog.to_json()),
    ] {
        gridplan::io::write_text(&out.join(name), &text)?;
        let same = std::fs::read_to_string(data.join(name)).is_ok_and(|b| b == text);
        println!("{:<32} {}", name, if same { "matches data/" } else { "differs from data/" });
    }
    Ok(())
}
