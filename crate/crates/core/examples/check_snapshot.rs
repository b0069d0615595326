//! Check a recorded snapshot against the operating limits of its case.
//!
//! cargo run --example check_snapshot -- [case.json] [snapshot.json]

use std::path::PathBuf;

use gridplan::io::{read_case, read_snapshot};
use gridplan::network::build_admittance;
use gridplan::operational::{check_feasibility, OperatingPoint, OperationalLimits};

fn main() -> gridplan::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut args = std::env::args().skip(1);
    let case_path = args.next().map(PathBuf::from).unwrap_or_else(|| data.join("case30.case.json"));
    let snap_path = args.next().map(PathBuf::from).unwrap_or_else(|| data.join("case30.recorded.snapshot.json"));
    let case = read_case(&case_path)?;
    let snap = read_snapshot(&case, &snap_path)?;
    let v = snap.v_recorded.clone().expect("snapshot carries recorded voltages");
    let point = OperatingPoint::from_voltages(&build_admittance(&case)?, v);
    let report = check_feasibility(&case, &snap, &point, &OperationalLimits::none());
    if report.is_clean() {
        println!("{}: within limits", snap.label);
    }
    for viol in report.violations() {
        println!("{:<8} {:>3}  slack {:.5}", viol.kind, viol.index, viol.slack);
    }
    println!("total slack {:.5}, worst {:.5}", report.sum_slack, report.max_slack);
    Ok(())
}
