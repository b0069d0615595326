//! Semidefinite relaxation of a [`QcqpModel`] at a Branch-and-Bound node.
//!
//! Every block's `zzᵀ` is replaced by a PSD matrix `Z` whose upper triangle
//! is stored column by column (`Z_ij` with `i <= j` at `j(j+1)/2 + i`), so
//! each quadratic constraint becomes linear in the program variables.
//! Upgrade variables fixed by the node are substituted as constants.

use serde::{Deserialize, Serialize};

use super::qcqp::QcqpModel;
use crate::network::CombinationRow;

/// Domain of one upgrade variable at a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Free,
    Zero,
    One,
}

impl Domain {
    pub fn fixed_value(self) -> Option<f64> {
        match self {
            Domain::Free => None,
            Domain::Zero => Some(0.0),
            Domain::One => Some(1.0),
        }
    }
}

/// What the relaxation minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Objective {
    /// `sum c_i a_i`.
    UpgradeCost,
    /// Generation `sum (p + q)` over all blocks plus `rho` times the sum of
    /// the constraint slacks.
    Dispatch { rho: f64 },
}

/// Upgrade-variable domains and extra linear rows over `a` for one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeProblem {
    pub domains: Vec<Domain>,
    /// Additional rows `coeffs . a <= rhs` (policy cuts).
    pub cuts: Vec<CombinationRow>,
    pub objective: Objective,
}

impl NodeProblem {
    pub fn root(n_u: usize) -> Self {
        NodeProblem {
            domains: vec![Domain::Free; n_u],
            cuts: Vec::new(),
            objective: Objective::UpgradeCost,
        }
    }

    /// Every variable fixed to the given binary plan.
    pub fn fixed(plan: &[bool], objective: Objective) -> Self {
        NodeProblem {
            domains: plan
                .iter()
                .map(|&b| if b { Domain::One } else { Domain::Zero })
                .collect(),
            cuts: Vec::new(),
            objective,
        }
    }

    /// True when some combination row or cut cannot hold for any `a` in the
    /// node's box.
    pub fn box_infeasible(&self, model: &QcqpModel) -> bool {
        model.combination.iter().chain(&self.cuts).any(|row| {
            let min: f64 = row
                .coeffs
                .iter()
                .map(|&(i, c)| match self.domains[i].fixed_value() {
                    Some(v) => c * v,
                    None => c.min(0.0),
                })
                .sum();
            min > row.rhs + 1e-9
        })
    }
}

/// Location of an upgrade variable in the program.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AVar {
    Var(usize),
    Fixed(f64),
}

/// `lo <= coeffs . x <= hi`; `lo == hi` is an equality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    #[serde(with = "crate::serde_bounds::lower")]
    pub lo: f64,
    #[serde(with = "crate::serde_bounds::upper")]
    pub hi: f64,
}

/// A PSD block stored as an upper-triangle vector starting at `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub offset: usize,
    pub dim: usize,
}

impl PsdBlock {
    pub fn len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }

    /// Program index of `Z_ij`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = (i.min(j), i.max(j));
        self.offset + j * (j + 1) / 2 + i
    }
}

/// `min objective . x + offset` over linear rows and PSD blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub n_var: usize,
    pub objective: Vec<(usize, f64)>,
    pub offset: f64,
    pub rows: Vec<LinearRow>,
    pub psd: Vec<PsdBlock>,
    pub a_map: Vec<AVar>,
    /// Start of each block's `y` vector.
    pub y_offsets: Vec<usize>,
}

impl ConicProgram {
    pub fn a_values(&self, x: &[f64]) -> Vec<f64> {
        self.a_map
            .iter()
            .map(|v| match *v {
                AVar::Var(k) => x[k],
                AVar::Fixed(c) => c,
            })
            .collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().map(|&(k, c)| c * x[k]).sum::<f64>()
    }

    /// Largest bound violation over the linear rows at `x`.
    pub fn row_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let v: f64 = r.coeffs.iter().map(|&(k, c)| c * x[k]).sum();
                (r.lo - v).max(v - r.hi).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

struct RowBuilder {
    coeffs: Vec<(usize, f64)>,
    constant: f64,
}

impl RowBuilder {
    fn new() -> Self {
        RowBuilder {
            coeffs: Vec::new(),
            constant: 0.0,
        }
    }

    fn a(&mut self, map: &[AVar], i: usize, c: f64) {
        match map[i] {
            AVar::Var(k) => self.coeffs.push((k, c)),
            AVar::Fixed(v) => self.constant += c * v,
        }
    }

    fn finish(mut self, lo: f64, hi: f64) -> Option<LinearRow> {
        self.coeffs.sort_by_key(|&(k, _)| k);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.coeffs.len());
        for (k, c) in self.coeffs {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => merged.push((k, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        let (lo, hi) = (lo - self.constant, hi - self.constant);
        if merged.is_empty() {
            // Constant row: keep it only if violated so infeasibility shows.
            if lo <= 1e-9 && hi >= -1e-9 {
                return None;
            }
        }
        Some(LinearRow {
            coeffs: merged,
            lo,
            hi,
        })
    }
}

/// Lifts `model` at `node` to a conic program.
pub fn relax_to_sdp(model: &QcqpModel, node: &NodeProblem) -> ConicProgram {
    assert_eq!(node.domains.len(), model.n_u, "node domain size");
    let mut n_var = 0;
    let a_map: Vec<AVar> = node
        .domains
        .iter()
        .map(|d| match d.fixed_value() {
            Some(v) => AVar::Fixed(v),
            None => {
                n_var += 1;
                AVar::Var(n_var - 1)
            }
        })
        .collect();
    let dim = model.z_dim();
    let mut psd = Vec::new();
    let mut y_offsets = Vec::new();
    for b in &model.blocks {
        let blk = PsdBlock { offset: n_var, dim };
        n_var += blk.len();
        psd.push(blk);
        y_offsets.push(n_var);
        n_var += b.layout.len;
    }

    let mut rows = Vec::new();
    let mut objective = Vec::new();
    let mut offset = 0.0;

    // Box on free a, combination rows and cuts.
    for &v in &a_map {
        if let AVar::Var(k) = v {
            rows.push(LinearRow {
                coeffs: vec![(k, 1.0)],
                lo: 0.0,
                hi: 1.0,
            });
        }
    }
    for row in model.combination.iter().chain(&node.cuts) {
        let mut rb = RowBuilder::new();
        for &(i, c) in &row.coeffs {
            rb.a(&a_map, i, c);
        }
        rows.extend(rb.finish(f64::NEG_INFINITY, row.rhs));
    }

    for (k, b) in model.blocks.iter().enumerate() {
        let blk = psd[k];
        let yo = y_offsets[k];
        for (idx, &(lo, hi)) in b.y_bounds.iter().enumerate() {
            if lo.is_finite() || hi.is_finite() {
                rows.push(LinearRow {
                    coeffs: vec![(yo + idx, 1.0)],
                    lo,
                    hi,
                });
            }
        }
        for c in &b.constraints {
            let mut rb = RowBuilder::new();
            for ((p, q), coef) in c.quad.entries() {
                rb.coeffs.push((blk.index(p, q), coef));
            }
            for &(idx, coef) in &c.lin_y {
                rb.coeffs.push((yo + idx, coef));
            }
            for &(i, coef) in &c.lin_a {
                rb.a(&a_map, i, coef);
            }
            rows.extend(rb.finish(c.alpha, c.beta));
        }
        if let Objective::Dispatch { rho } = node.objective {
            for &(_, p, q) in &b.layout.generation {
                objective.push((yo + p, 1.0));
                objective.push((yo + q, 1.0));
            }
            for s in b.layout.slacks() {
                objective.push((yo + s, rho));
            }
        }
    }
    if node.objective == Objective::UpgradeCost {
        for (i, &c) in model.cost.iter().enumerate() {
            match a_map[i] {
                AVar::Var(k) => objective.push((k, c)),
                AVar::Fixed(v) => offset += c * v,
            }
        }
    }
    objective.retain(|&(_, c)| c != 0.0);

    ConicProgram {
        n_var,
        objective,
        offset,
        rows,
        psd,
        a_map,
        y_offsets,
    }
}

/// Reads block `k`'s `Z` as a dense symmetric matrix from a program vector.
pub fn block_matrix(prog: &ConicProgram, k: usize, x: &[f64]) -> nalgebra::DMatrix<f64> {
    let blk = prog.psd[k];
    nalgebra::DMatrix::from_fn(blk.dim, blk.dim, |i, j| x[blk.index(i, j)])
}

/// Writes a lifted point into a program vector (inverse of the readers).
pub fn embed_point(
    prog: &ConicProgram,
    a: &[f64],
    blocks: &[(nalgebra::DMatrix<f64>, Vec<f64>)],
) -> Vec<f64> {
    let mut x = vec![0.0; prog.n_var];
    for (i, v) in prog.a_map.iter().enumerate() {
        if let AVar::Var(k) = *v {
            x[k] = a[i];
        }
    }
    for (k, (zz, y)) in blocks.iter().enumerate() {
        let blk = prog.psd[k];
        for j in 0..blk.dim {
            for i in 0..=j {
                x[blk.index(i, j)] = zz[(i, j)];
            }
        }
        x[prog.y_offsets[k]..prog.y_offsets[k] + y.len()].copy_from_slice(y);
    }
    x
}
