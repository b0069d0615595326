//! Solve the AC power flow of a MATPOWER case and print the bus voltages.
//!
//! cargo run --example power_flow -- data/case30.m

use gridplan::io::{parse_matpower, read_text};
use gridplan::power_flow::{newton_power_flow, PfOptions, PfSpec};

fn main() -> gridplan::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/case30.m".into());
    let m = parse_matpower(&read_text(path.as_ref())?, "case")?;
    let spec = PfSpec::from_case(&m.case, &m.base_snapshot);
    let res = newton_power_flow(&m.case, &spec, &PfOptions::default())?;
    println!(
        "status {:?} after {} iterations, residual {:.2e}",
        res.status, res.iterations, res.residual_inf
    );
    for (j, v) in res.point.v.iter().enumerate() {
        let s = res.point.s[j] * m.case.base_mva;
        println!(
            "bus {:>3}  |v| {:.5}  angle {:>8.4} deg  P {:>8.3} MW  Q {:>8.3} MVAr",
            j + 1,
            v.norm(),
            v.arg().to_degrees(),
            s.re,
            s.im
        );
    }
    Ok(())
}
