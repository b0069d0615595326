//! Solve the root relaxation of an instance and try to read a power-flow
//! solution off each snapshot's voltage block.
//!
//! cargo run --release --example relax_root -- [toy2|toy3|toy4|case30]

mod fixtures;

use gridplan::operational::OperationalLimits;
use gridplan::relaxation::*;

fn main() -> gridplan::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "toy3".into());
    let (case, catalog, scenarios) = fixtures::load(&name)?;
    let limits = OperationalLimits::none();
    let model = build_qcqp(&case, &catalog, &scenarios, &limits, &QcqpOptions::default())?;
    let node = NodeProblem::root(catalog.n());
    let sol = solve_node_relaxation(&model, &node, &ClarabelBackend, &BackendSettings::default());
    println!("{:?}: lower bound {:.6} after {} iterations", sol.status, sol.lower_bound, sol.iterations);
    let a: Vec<String> = sol.a.iter().map(|x| format!("{x:.3}")).collect();
    println!("a = [{}]", a.join(", "));
    for (k, snap) in scenarios.iter().enumerate() {
        let r = extract_rank1_candidate(&sol.z[k], model.slack);
        let viol = model.max_violation(k, &r.z, &sol.y[k], &sol.a);
        println!(
            "{:<10} eigen-gap {:.2e}  max constraint violation {:.2e}",
            snap.label, r.gap, viol
        );
    }
    Ok(())
}
