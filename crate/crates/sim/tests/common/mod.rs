#![allow(dead_code)]

use std::path::PathBuf;

use mfgkit_core::format::{load_scenario, parse_scenario, validate_scenario};
use mfgkit_core::{Horizon, KernelMode, PayoffSpec, Scenario, Simplex, StateSpace, TransitionKernelSpec};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn bundled(name: &str) -> Scenario {
    load_scenario(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// A bundled file with textual substitutions applied before validation.
pub fn bundled_with(name: &str, edits: &[(&str, &str)]) -> Scenario {
    let mut text = std::fs::read_to_string(scenario_path(name)).unwrap();
    for (from, to) in edits {
        assert!(text.contains(from), "{name} has no `{from}`");
        text = text.replace(from, to);
    }
    validate_scenario(&parse_scenario(&text).unwrap()).unwrap()
}

/// Single-action scenario whose kernel is the same matrix in every stage.
pub fn table_scenario(mode: KernelMode, matrix: Vec<Vec<f64>>, horizon: Horizon<f64>, m0: Vec<f64>) -> Scenario {
    let n = matrix.len();
    let labels: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let space = StateSpace::simple(&refs, &["stay"]).unwrap();
    let table = vec![matrix.into_iter().map(|row| vec![row]).collect()];
    Scenario::single_type(
        "table",
        space,
        TransitionKernelSpec::from_table(mode, table).unwrap(),
        PayoffSpec::from_tables(vec![vec![vec![0.0]; n]], vec![vec![0.0; n]]),
        horizon,
        Simplex::new(m0).unwrap(),
    )
    .unwrap()
}
