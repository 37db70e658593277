//! Flat numeric training data: one row per effort target.
//!
//! Column layout (the serialization order):
//!
//! | group        | columns                                                        |
//! |--------------|----------------------------------------------------------------|
//! | software     | `wmc dit noc cbo rfc lcom loc fan_in fan_out` of the before-class |
//! | refactoring  | `kind_*` one-hot (4), `ops_in_commit`, `cloc`                  |
//! | dependencies | `dep_*` outgoing edge counts of the before-class, per kind (8) |
//!
//! All class features are taken from the parent snapshot of the commit that
//! applied the refactoring.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analyzer::{CkMetrics, DependencyEdge, DependencyKind};
use crate::detector::RefactoringKind;
use crate::effort::EffortTarget;
use crate::error::{Error, Result};

pub const FEATURE_COUNT: usize = 23;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
}

impl FeatureSchema {
    /// The fixed 23-column schema.
    pub fn standard() -> Self {
        let mut names: Vec<String> = CkMetrics::NAMES.iter().map(|s| s.to_string()).collect();
        names.extend([
            "kind_move_class",
            "kind_rename_class",
            "kind_move_and_rename_class",
            "kind_extract_class",
            "ops_in_commit",
            "cloc",
        ]
        .map(String::from));
        names.extend(
            DependencyKind::ALL
                .iter()
                .map(|k| format!("dep_{}", k.as_str().to_lowercase())),
        );
        debug_assert_eq!(names.len(), FEATURE_COUNT);
        Self { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn ensure_matches(&self, other: &FeatureSchema) -> Result<()> {
        if self != other {
            return Err(Error::SchemaMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Outgoing edge multiplicities of `fqn`, indexed by [`DependencyKind::index`].
pub fn outgoing_dependency_counts(fqn: &str, edges: &[DependencyEdge]) -> [u32; 8] {
    let mut counts = [0u32; 8];
    for e in edges.iter().filter(|e| e.from_fqn == fqn) {
        counts[e.kind.index()] += e.count;
    }
    counts
}

/// Builds a row in [`FeatureSchema::standard`] order.
pub fn build_features(
    metrics: &CkMetrics,
    kind: RefactoringKind,
    ops_in_commit: usize,
    cloc: u64,
    outgoing: &[u32; 8],
) -> FeatureVector {
    let mut values: Vec<f64> = metrics.values().iter().map(|&v| f64::from(v)).collect();
    values.extend(RefactoringKind::ALL.iter().map(|&k| if k == kind { 1.0 } else { 0.0 }));
    values.push(ops_in_commit as f64);
    values.push(cloc as f64);
    values.extend(outgoing.iter().map(|&v| f64::from(v)));
    FeatureVector::new(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub commit_id: String,
    pub op_kind: RefactoringKind,
    pub before_fqn: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub features: FeatureVector,
    pub target_hours: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Row>,
}

impl Dataset {
    pub fn empty() -> Self {
        Self {
            schema: FeatureSchema::standard(),
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target_hours).collect()
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Class metrics and edges of one snapshot.
#[derive(Debug, Clone, Default)]
pub struct SnapshotFeatures {
    pub metrics: BTreeMap<String, CkMetrics>,
    pub edges: Vec<DependencyEdge>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssemblyDiagnostics {
    /// Rows whose before-class had no metrics and were filled with zeros.
    pub imputed_rows: usize,
}

/// Joins targets with the features of their commit's parent snapshot.
/// `parent_features` is keyed by the commit id of the refactoring commit.
pub fn assemble(
    targets: &[EffortTarget],
    parent_features: &HashMap<String, SnapshotFeatures>,
) -> (Dataset, AssemblyDiagnostics) {
    let mut diagnostics = AssemblyDiagnostics::default();
    let mut ordered: Vec<&EffortTarget> = targets.iter().collect();
    ordered.sort_by(|a, b| {
        a.commit_timestamp
            .cmp(&b.commit_timestamp)
            .then_with(|| a.op.after_fqn.cmp(&b.op.after_fqn))
    });

    let rows = ordered
        .into_iter()
        .map(|t| {
            let snapshot = parent_features.get(&t.op.commit_id);
            let metrics = snapshot.and_then(|s| s.metrics.get(&t.op.before_fqn));
            if metrics.is_none() {
                diagnostics.imputed_rows += 1;
                log::warn!(
                    "no parent metrics for {} in {}; imputing zeros",
                    t.op.before_fqn,
                    t.op.commit_id
                );
            }
            let outgoing = snapshot
                .map(|s| outgoing_dependency_counts(&t.op.before_fqn, &s.edges))
                .unwrap_or_default();
            Row {
                features: build_features(
                    &metrics.copied().unwrap_or_default(),
                    t.op.kind,
                    t.ops_in_commit,
                    t.cloc,
                    &outgoing,
                ),
                target_hours: t.rtt_hours,
                provenance: Provenance {
                    commit_id: t.op.commit_id.clone(),
                    op_kind: t.op.kind,
                    before_fqn: t.op.before_fqn.clone(),
                },
            }
        })
        .collect();

    (
        Dataset {
            schema: FeatureSchema::standard(),
            rows,
        },
        diagnostics,
    )
}

/// Seeded shuffle split into `(train, test)`; the test side holds
/// `round(n × test_fraction)` rows, at least one.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let n = ds.len();
    if n < 2 {
        return Err(Error::Empty(format!("cannot split {n} row(s)")));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).max(1);
    if n_test >= n {
        return Err(Error::Empty(format!(
            "test fraction {test_fraction} leaves no training rows out of {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at(n - n_test);
    Ok((ds.subset(train), ds.subset(test)))
}

const LEADING: [&str; 3] = ["commit_id", "op_kind", "before_fqn"];
const TARGET: &str = "rtt_hours";

pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    write_csv_to(ds, BufWriter::new(File::create(path)?))
}

pub fn write_csv_to<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(out);
    let mut header: Vec<&str> = LEADING.to_vec();
    header.extend(ds.schema.names.iter().map(String::as_str));
    header.push(TARGET);
    w.write_record(&header)?;
    for row in &ds.rows {
        let mut record = vec![
            row.provenance.commit_id.clone(),
            row.provenance.op_kind.as_str().to_string(),
            row.provenance.before_fqn.clone(),
        ];
        record.extend(row.features.values.iter().map(f64::to_string));
        record.push(row.target_hours.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| {
        Error::config(format!("cannot open dataset {}: {e}", path.display()))
    })?;
    read_csv_from(BufReader::new(file), path)
}

/// `origin` only labels error messages.
pub fn read_csv_from<R: Read>(input: R, origin: &Path) -> Result<Dataset> {
    let malformed = |line: u64, message: String| Error::Malformed {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();

    let header = match records.next() {
        Some(h) => h?,
        None => return Err(malformed(1, "missing header row".into())),
    };
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < LEADING.len() + 1
        || cols[..LEADING.len()] != LEADING
        || cols.last() != Some(&TARGET)
    {
        return Err(malformed(
            1,
            format!("header must be {} + features + {TARGET}", LEADING.join(",")),
        ));
    }
    let schema = FeatureSchema {
        names: cols[LEADING.len()..cols.len() - 1]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let width = cols.len();

    let mut rows = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(malformed(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let number = |i: usize| -> Result<f64> {
            let cell = &record[i];
            cell.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("column {:?}: {cell:?} is not a finite number", cols[i])))
        };
        let kind: RefactoringKind = record[1]
            .parse()
            .map_err(|_| malformed(line, format!("unknown op_kind {:?}", &record[1])))?;
        let values = (LEADING.len()..width - 1).map(number).collect::<Result<Vec<_>>>()?;
        let target = number(width - 1)?;
        if target <= 0.0 {
            return Err(malformed(line, format!("target must be positive, got {target}")));
        }
        rows.push(Row {
            features: FeatureVector::new(values),
            target_hours: target,
            provenance: Provenance {
                commit_id: record[0].to_string(),
                op_kind: kind,
                before_fqn: record[2].to_string(),
            },
        });
    }
    Ok(Dataset { schema, rows })
}
