//! Quadratic model of the planning problem, its semidefinite relaxation and
//! node solves.

pub mod backend;
pub mod export;
pub mod qcqp;
pub mod rank1;
pub mod sdp;
pub mod solve;

pub use backend::{BackendSettings, BackendStatus, ClarabelBackend, ConicBackend};
pub use export::export_json;
pub use qcqp::{build_qcqp, QcqpModel, QcqpOptions, QuadForm, QuadraticConstraint, Role, Tag};
pub use rank1::{extract_rank1_candidate, Rank1};
pub use sdp::{relax_to_sdp, ConicProgram, Domain, NodeProblem, Objective};
pub use solve::{solve_node_relaxation, SdpSolution, SdpStatus};
