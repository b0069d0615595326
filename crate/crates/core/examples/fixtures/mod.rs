//! Loading of the bundled instances, shared by the examples.

use std::path::{Path, PathBuf};

use gridplan::io::{read_case, read_catalog, read_scenarios};
use gridplan::network::{NetworkCase, UpgradeCatalog};
use gridplan::operational::ScenarioSet;

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn load(name: &str) -> gridplan::Result<(NetworkCase, UpgradeCatalog, ScenarioSet)> {
    let labels: &[&str] = match name {
        "toy4" => &["peak", "evening"],
        "case30" => &["recorded"],
        _ => &["peak"],
    };
    let case = read_case(&data(&format!("{name}.case.json")))?;
    let catalog = read_catalog(&case, &data(&format!("{name}.catalog.json")))?;
    let snaps: Vec<PathBuf> = labels.iter().map(|l| data(&format!("{name}.{l}.snapshot.json"))).collect();
    let scenarios = read_scenarios(&case, &snaps)?;
    Ok((case, catalog, scenarios))
}
