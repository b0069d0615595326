//! Find the cheapest upgrade plan under the Newton power-flow policy and
//! print the bound trace and the summary table.
//!
//! cargo run --release --example plan -- [toy2|toy3|toy4]

mod fixtures;

use gridplan::bnb::{branch_and_bound, BnbParams};
use gridplan::cli::plan_table;
use gridplan::operational::OperationalLimits;
use gridplan::policies::NewtonPfPolicy;

fn main() -> gridplan::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "toy4".into());
    let (case, catalog, scenarios) = fixtures::load(&name)?;
    let run = branch_and_bound(
        &case,
        &catalog,
        &scenarios,
        &NewtonPfPolicy::default(),
        &OperationalLimits::none(),
        &BnbParams::default(),
    )?;
    let r = &run.result;
    for b in &r.trace {
        println!("node {:>3}  L {:.4}  U {:.4}", b.node, b.lower, b.upper);
    }
    println!("{} log events, {} cuts", run.log.len(), r.cuts.len());
    print!("{}", plan_table(&case, &catalog, &scenarios, r));
    Ok(())
}
