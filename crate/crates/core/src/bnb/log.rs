//! Structured run log written as JSON lines.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Plan;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum LogEvent {
    Node {
        id: usize,
        i0: Vec<usize>,
        i1: Vec<usize>,
        #[serde(with = "crate::serde_bounds::lower")]
        bound: f64,
        status: NodeState,
    },
    Policy {
        a: Plan,
        feasible: bool,
        /// First failing snapshot, if any.
        snapshot: Option<usize>,
    },
    Cut {
        a_r: Plan,
        snapshot: usize,
    },
    Incumbent {
        a: Plan,
        cost: f64,
        source: String,
        diagnostics: Vec<BTreeMap<String, f64>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeState {
    Open,
    Solved,
    Pruned,
    Branched,
    Infeasible,
    Requeued,
    Unresolved,
}

pub fn write_log(path: &Path, events: &[LogEvent]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for e in events {
        let line = serde_json::to_string(e)?;
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}
