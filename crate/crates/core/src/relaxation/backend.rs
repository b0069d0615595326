//! Conic solver interface and the Clarabel implementation.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use super::sdp::ConicProgram;

/// Terminal state reported by a backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendStatus {
    Solved,
    /// Solved to the backend's reduced accuracy thresholds.
    AlmostSolved,
    Infeasible,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendOutcome {
    pub status: BackendStatus,
    pub x: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: u32,
    /// Backend-specific status text.
    pub detail: String,
    pub seconds: f64,
}

/// Accuracy and effort settings for a relaxation solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendSettings {
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub max_iter: u32,
    /// Per-solve wall-clock limit in seconds (infinite for none).
    pub time_limit: f64,
}

impl Default for BackendSettings {
    fn default() -> Self {
        BackendSettings {
            tol_feas: 1e-8,
            tol_gap_abs: 1e-8,
            tol_gap_rel: 1e-8,
            max_iter: 200,
            time_limit: f64::INFINITY,
        }
    }
}

/// A solver for programs of the form produced by
/// [`relax_to_sdp`](super::sdp::relax_to_sdp). Implementations must be
/// deterministic. `retry` asks for a more conservative configuration after
/// a numerical failure.
pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, prog: &ConicProgram, settings: &BackendSettings, retry: bool) -> BackendOutcome;
}

/// The Clarabel interior-point solver, single-threaded.
#[derive(Clone, Debug, Default)]
pub struct ClarabelBackend;

struct Standard {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    q: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

/// Rewrites the program as `A x + s = b`, `s` in zero, nonnegative and PSD
/// triangle cones, in that order.
fn standard_form(prog: &ConicProgram) -> Standard {
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::new();
    let mut row = 0;
    let mut push = |coeffs: &[(usize, f64)], sign: f64, rhs: f64, trip: &mut Vec<_>, b: &mut Vec<f64>| {
        for &(k, c) in coeffs {
            trip.push((row, k, sign * c));
        }
        b.push(sign * rhs);
        row += 1;
    };
    for r in prog.rows.iter().filter(|r| r.lo == r.hi) {
        push(&r.coeffs, 1.0, r.lo, &mut trip, &mut b);
    }
    let n_eq = b.len();
    for r in prog.rows.iter().filter(|r| r.lo != r.hi) {
        if r.lo.is_finite() {
            push(&r.coeffs, -1.0, r.lo, &mut trip, &mut b);
        }
        if r.hi.is_finite() {
            push(&r.coeffs, 1.0, r.hi, &mut trip, &mut b);
        }
    }
    let n_ineq = b.len() - n_eq;
    let sqrt2 = std::f64::consts::SQRT_2;
    for blk in &prog.psd {
        for j in 0..blk.dim {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { sqrt2 };
                push(&[(blk.index(i, j), -scale)], 1.0, 0.0, &mut trip, &mut b);
            }
        }
    }
    let m = b.len();

    trip.sort_by_key(|&(r, c, _)| (c, r));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(trip.len());
    for t in trip {
        match merged.last_mut() {
            Some(l) if l.0 == t.0 && l.1 == t.1 => l.2 += t.2,
            _ => merged.push(t),
        }
    }
    merged.retain(|t| t.2 != 0.0);
    let n = prog.n_var;
    let mut colptr = vec![0usize; n + 1];
    for t in &merged {
        colptr[t.1 + 1] += 1;
    }
    for k in 0..n {
        colptr[k + 1] += colptr[k];
    }
    let a = CscMatrix::new(
        m,
        n,
        colptr,
        merged.iter().map(|t| t.0).collect(),
        merged.iter().map(|t| t.2).collect(),
    );

    let mut q = vec![0.0; n];
    for &(k, c) in &prog.objective {
        q[k] += c;
    }
    let mut cones = Vec::new();
    if n_eq > 0 {
        cones.push(SupportedConeT::ZeroConeT(n_eq));
    }
    if n_ineq > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(n_ineq));
    }
    for blk in &prog.psd {
        cones.push(SupportedConeT::PSDTriangleConeT(blk.dim));
    }
    Standard { a, b, q, cones }
}

fn clarabel_settings(s: &BackendSettings, retry: bool) -> DefaultSettings<f64> {
    let mut b = DefaultSettingsBuilder::default();
    b.verbose(false)
        .direct_solve_method("faer".to_string())
        .max_threads(1)
        .tol_feas(s.tol_feas)
        .tol_gap_abs(s.tol_gap_abs)
        .tol_gap_rel(s.tol_gap_rel)
        .max_iter(s.max_iter)
        .time_limit(s.time_limit);
    if retry {
        b.max_iter(s.max_iter * 2)
            .static_regularization_constant(1e-7)
            .iterative_refinement_max_iter(30)
            .equilibrate_max_iter(50)
            .max_step_fraction(0.95);
    }
    b.build().expect("valid solver settings")
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, prog: &ConicProgram, settings: &BackendSettings, retry: bool) -> BackendOutcome {
        let start = Instant::now();
        let std = standard_form(prog);
        let p = CscMatrix::<f64>::zeros((prog.n_var, prog.n_var));
        let failed = |detail: String| BackendOutcome {
            status: BackendStatus::Failed,
            x: vec![0.0; prog.n_var],
            primal_objective: f64::NAN,
            dual_objective: f64::NEG_INFINITY,
            iterations: 0,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        };
        let mut solver = match DefaultSolver::new(
            &p,
            &std.q,
            &std.a,
            &std.b,
            &std.cones,
            clarabel_settings(settings, retry),
        ) {
            Ok(s) => s,
            Err(e) => return failed(format!("setup: {e:?}")),
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => BackendStatus::Solved,
            SolverStatus::AlmostSolved => BackendStatus::AlmostSolved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => BackendStatus::Infeasible,
            _ => BackendStatus::Failed,
        };
        BackendOutcome {
            status,
            x: sol.x.clone(),
            primal_objective: sol.obj_val + prog.offset,
            dual_objective: sol.obj_val_dual + prog.offset,
            iterations: sol.iterations,
            detail: format!("{:?}", sol.status),
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}
