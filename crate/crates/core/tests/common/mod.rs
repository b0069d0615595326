#![allow(dead_code)]

use std::path::{Path, PathBuf};

use gridplan::io::{read_case, read_catalog, read_scenarios};
use gridplan::network::{NetworkCase, UpgradeCatalog};
use gridplan::operational::ScenarioSet;

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub struct Instance {
    pub name: &'static str,
    pub case: NetworkCase,
    pub catalog: UpgradeCatalog,
    pub scenarios: ScenarioSet,
}

pub fn snapshot_files(name: &str) -> Vec<PathBuf> {
    let labels: &[&str] = match name {
        "toy4" => &["peak", "evening"],
        "case30" => &["recorded"],
        _ => &["peak"],
    };
    labels
        .iter()
        .map(|l| data(&format!("{name}.{l}.snapshot.json")))
        .collect()
}

pub fn instance(name: &'static str) -> Instance {
    let case = read_case(&data(&format!("{name}.case.json"))).unwrap();
    let catalog = read_catalog(&case, &data(&format!("{name}.catalog.json"))).unwrap();
    let scenarios = read_scenarios(&case, &snapshot_files(name)).unwrap();
    Instance {
        name,
        case,
        catalog,
        scenarios,
    }
}

pub fn toys() -> Vec<Instance> {
    ["toy2", "toy3", "toy4"].into_iter().map(instance).collect()
}
