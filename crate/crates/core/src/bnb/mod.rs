//! Branch-and-Bound search for a minimum-cost upgrade plan.

pub mod cut;
pub mod greedy;
pub mod log;
pub mod oracle;
pub mod result;
pub mod tree;

pub use cut::{make_policy_cut, PolicyCut};
pub use greedy::{greedy_incumbent, greedy_incumbent_until, GreedyResult};
pub use log::{write_log, LogEvent, NodeState};
pub use oracle::{brute_force_oracle, OracleResult, ORACLE_LIMIT};
pub use result::{BoundRecord, Counters, Metadata, PlanResult, PlanStatus};
pub use tree::{branch_and_bound, BnbParams, BnbRun, Gap};
