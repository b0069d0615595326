//! JSON export of a node program in coordinate form.
//!
//! The document describes `min cᵀx + offset` subject to
//! `lo <= A x <= hi` and, for every PSD block, the symmetric matrix whose
//! upper triangle (column by column, unscaled) occupies
//! `x[offset .. offset + dim(dim+1)/2]` being positive semidefinite.

use serde::Serialize;

use super::sdp::{ConicProgram, PsdBlock};

#[derive(Serialize)]
struct Doc<'a> {
    format: &'static str,
    n_var: usize,
    objective: Vec<(usize, f64)>,
    offset: f64,
    /// `(row, column, value)` triplets of `A`.
    a: Vec<(usize, usize, f64)>,
    lo: Vec<Option<f64>>,
    hi: Vec<Option<f64>>,
    psd: &'a [PsdBlock],
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn export_json(prog: &ConicProgram) -> String {
    let a = prog
        .rows
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.coeffs.iter().map(move |&(k, c)| (r, k, c)))
        .collect();
    let doc = Doc {
        format: "gridplan-conic-v1",
        n_var: prog.n_var,
        objective: prog.objective.clone(),
        offset: prog.offset,
        a,
        lo: prog.rows.iter().map(|r| finite(r.lo)).collect(),
        hi: prog.rows.iter().map(|r| finite(r.hi)).collect(),
        psd: &prog.psd,
    };
    serde_json::to_string_pretty(&doc).expect("program serializes")
}
