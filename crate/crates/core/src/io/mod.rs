//! File ingestion for cases, snapshots and upgrade catalogs.

pub mod matpower;

use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{NetworkCase, UpgradeCatalog};
use crate::operational::{ScenarioSet, Snapshot};

pub use matpower::{parse_matpower, MatpowerCase};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn located<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::parse(path.display().to_string(), other.to_string()),
    })
}

/// Reads a case from JSON or, for `.m` files, MATPOWER text.
pub fn read_case(path: &Path) -> Result<NetworkCase> {
    let text = read_text(path)?;
    if path.extension().is_some_and(|e| e == "m") {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        located(path, parse_matpower(&text, &name).map(|m| m.case))
    } else {
        located(path, NetworkCase::from_json(&text))
    }
}

pub fn read_snapshot(case: &NetworkCase, path: &Path) -> Result<Snapshot> {
    let text = read_text(path)?;
    located(path, Snapshot::from_json(case, &text))
}

pub fn read_scenarios(case: &NetworkCase, paths: &[impl AsRef<Path>]) -> Result<ScenarioSet> {
    let snaps = paths
        .iter()
        .map(|p| read_snapshot(case, p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    ScenarioSet::new(snaps)
}

pub fn read_catalog(case: &NetworkCase, path: &Path) -> Result<UpgradeCatalog> {
    let text = read_text(path)?;
    located(path, UpgradeCatalog::from_json(case, &text))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
