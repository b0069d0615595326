//! Node relaxation solves.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::backend::{BackendSettings, BackendStatus, ConicBackend};
use super::qcqp::QcqpModel;
use super::sdp::{block_matrix, relax_to_sdp, NodeProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Result of one node relaxation.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Upgrade values, fixed entries included.
    pub a: Vec<f64>,
    /// One `Z` per snapshot block.
    pub z: Vec<DMatrix<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Objective at the returned point (`+inf` when infeasible).
    pub objective: f64,
    /// Valid lower bound for the node: `+inf` when infeasible, `-inf` on a
    /// numerical failure.
    pub lower_bound: f64,
    pub iterations: u32,
    pub attempts: u32,
    pub seconds: f64,
    pub detail: String,
}

impl SdpSolution {
    fn infeasible(n_u: usize, detail: &str) -> Self {
        SdpSolution {
            status: SdpStatus::Infeasible,
            a: vec![0.0; n_u],
            z: Vec::new(),
            y: Vec::new(),
            objective: f64::INFINITY,
            lower_bound: f64::INFINITY,
            iterations: 0,
            attempts: 0,
            seconds: 0.0,
            detail: detail.to_string(),
        }
    }
}

/// Solves the relaxation of `model` at `node`.
///
/// A failed or reduced-accuracy solve is retried once with conservative
/// settings; a second failure yields `NumericalFailure` with bound `-inf`.
pub fn solve_node_relaxation(
    model: &QcqpModel,
    node: &NodeProblem,
    backend: &dyn ConicBackend,
    settings: &BackendSettings,
) -> SdpSolution {
    if node.box_infeasible(model) {
        return SdpSolution::infeasible(model.n_u, "fixings violate a combination row or cut");
    }
    let prog = relax_to_sdp(model, node);
    let mut out = backend.solve(&prog, settings, false);
    let mut attempts = 1;
    let mut seconds = out.seconds;
    let mut iterations = out.iterations;
    if matches!(out.status, BackendStatus::Failed | BackendStatus::AlmostSolved) {
        let second = backend.solve(&prog, settings, true);
        attempts += 1;
        seconds += second.seconds;
        iterations += second.iterations;
        let keep_first = out.status == BackendStatus::AlmostSolved && second.status == BackendStatus::Failed;
        if !keep_first {
            out = second;
        }
    }
    match out.status {
        BackendStatus::Infeasible => SdpSolution {
            attempts,
            seconds,
            iterations,
            ..SdpSolution::infeasible(model.n_u, &out.detail)
        },
        BackendStatus::Failed => SdpSolution {
            status: SdpStatus::NumericalFailure,
            a: prog.a_values(&out.x),
            z: Vec::new(),
            y: Vec::new(),
            objective: f64::NAN,
            lower_bound: f64::NEG_INFINITY,
            iterations,
            attempts,
            seconds,
            detail: out.detail,
        },
        BackendStatus::Solved | BackendStatus::AlmostSolved => {
            let x = &out.x;
            let objective = prog.objective_value(x);
            let lower_bound = if prog.objective.is_empty() {
                objective
            } else {
                objective.min(out.dual_objective)
            };
            SdpSolution {
                status: SdpStatus::Optimal,
                a: prog.a_values(x),
                z: (0..model.blocks.len()).map(|k| block_matrix(&prog, k, x)).collect(),
                y: model
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(k, b)| x[prog.y_offsets[k]..prog.y_offsets[k] + b.layout.len].to_vec())
                    .collect(),
                objective,
                lower_bound,
                iterations,
                attempts,
                seconds,
                detail: out.detail,
            }
        }
    }
}
