//! Evaluate every operational policy on the plans of a toy instance.
//!
//! cargo run --release --example policies -- [toy2|toy3|toy4]

mod fixtures;

use gridplan::network::{apply_upgrades, Plan};
use gridplan::operational::OperationalLimits;
use gridplan::policies::policy_by_name;

fn main() -> gridplan::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "toy4".into());
    let (case, catalog, scenarios) = fixtures::load(&name)?;
    let limits = OperationalLimits::none();
    let policies: Vec<_> = ["none", "opf", "newton-pf"].iter().map(|n| policy_by_name(n).unwrap()).collect();
    println!("{:<10} {:<10} {:>6} {:>6} {:>10}", "plan", "snapshot", "none", "opf", "newton-pf");
    for k in 0..1u64 << catalog.n() {
        let plan = Plan::from_index(catalog.n(), k);
        if !catalog.admits(&plan.values()) {
            continue;
        }
        let up = apply_upgrades(&case, &catalog, &plan)?;
        for snap in scenarios.iter() {
            let verdicts: Vec<&str> = policies
                .iter()
                .map(|p| if p.evaluate(&up, snap, &limits).feasible { "ok" } else { "-" })
                .collect();
            println!(
                "{:<10} {:<10} {:>6} {:>6} {:>10}",
                format!("[{plan}]"),
                snap.label,
                verdicts[0],
                verdicts[1],
                verdicts[2]
            );
        }
    }
    Ok(())
}
