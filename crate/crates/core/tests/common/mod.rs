#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use refactor_effort::analyzer::{compute_all, extract_dependencies, CkMetrics};
use refactor_effort::pipeline::snapshot_from_dir;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// Hand-computed metric table for the `ck` fixture, keyed by class name.
pub fn expected_ck() -> BTreeMap<String, [u32; 9]> {
    let text = std::fs::read_to_string(fixture("ck/expected.csv")).unwrap();
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut cells = line.split(',');
            let fqn = cells.next().unwrap().to_string();
            let values: Vec<u32> = cells.map(|c| c.trim().parse().unwrap()).collect();
            (fqn, values.try_into().unwrap())
        })
        .collect()
}

pub fn measured_ck() -> BTreeMap<String, CkMetrics> {
    let snapshot = snapshot_from_dir(&fixture("ck")).unwrap();
    let edges = extract_dependencies(&snapshot);
    compute_all(&snapshot, &edges)
}

/// Lines describing every cell where the measured table departs from the expected one.
pub fn ck_mismatches() -> Vec<String> {
    let expected = expected_ck();
    let measured = measured_ck();
    let mut out = Vec::new();
    for (fqn, want) in &expected {
        match measured.get(fqn) {
            None => out.push(format!("{fqn}: not found")),
            Some(m) => {
                for (i, (got, want)) in m.values().iter().zip(want).enumerate() {
                    if got != want {
                        out.push(format!("{fqn}.{}: got {got}, expected {want}", CkMetrics::NAMES[i]));
                    }
                }
            }
        }
    }
    for fqn in measured.keys().filter(|k| !expected.contains_key(*k)) {
        out.push(format!("{fqn}: unexpected class"));
    }
    out
}
