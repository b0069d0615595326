//! Decide every admissible plan of a small catalog by direct policy
//! evaluation and list the feasible ones.
//!
//! cargo run --release --example enumerate -- [toy2|toy3|toy4]

mod fixtures;

use gridplan::bnb::brute_force_oracle;
use gridplan::network::apply_upgrades;
use gridplan::operational::OperationalLimits;
use gridplan::policies::{policy_by_name, Policy};

fn main() -> gridplan::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "toy3".into());
    let policy: Box<dyn Policy> = policy_by_name(&args.next().unwrap_or_else(|| "newton-pf".into())).expect("known policy");
    let (case, catalog, scenarios) = fixtures::load(&name)?;
    let limits = OperationalLimits::none();
    let o = brute_force_oracle(&case, &catalog, &scenarios, policy.as_ref(), &limits)?;
    println!("{} of {} admissible plans are feasible under {}", o.feasible.len(), o.admissible, policy.name());
    for plan in &o.feasible {
        let up = apply_upgrades(&case, &catalog, plan)?;
        let worst = scenarios
            .iter()
            .map(|s| policy.evaluate(&up, s, &limits).report.max_slack)
            .fold(0.0, f64::max);
        println!("  [{}] cost {:.1}  worst slack {worst:.1e}", plan, catalog.cost_of(&plan.values()));
    }
    match (&o.result.plan, o.result.cost) {
        (Some(p), Some(c)) => println!("cheapest: [{p}] at cost {c}"),
        _ => println!("no feasible plan"),
    }
    Ok(())
}
