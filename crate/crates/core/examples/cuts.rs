//! Show the linear cut that removes a single binary plan from the hypercube.
//!
//! cargo run --example cuts -- 1 0 1

use gridplan::bnb::make_policy_cut;
use gridplan::network::Plan;

fn main() -> gridplan::Result<()> {
    let a_r: Vec<f64> = std::env::args()
        .skip(1)
        .map(|s| s.parse().expect("0 or 1"))
        .collect();
    let a_r = if a_r.is_empty() { vec![1.0, 0.0, 1.0] } else { a_r };
    let cut = make_policy_cut(&a_r)?;
    let row = cut.row();
    let terms: Vec<String> = row.coeffs.iter().map(|(i, c)| format!("{c:+} a{i}")).collect();
    println!("{} <= {}", terms.join(" "), row.rhs);
    for k in 0..1u64 << a_r.len() {
        let a = Plan::from_index(a_r.len(), k);
        let mark = if cut.excludes(&a.values()) { "cut" } else { "" };
        println!("[{a}]  distance {}  {mark}", cut.value(&a.values()));
    }
    Ok(())
}
