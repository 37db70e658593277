//! Turns a clustering of the current classes into priced move-class operations.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analyzer::{ClassSummary, CkMetrics, DependencyEdge};
use crate::baselines::Estimator;
use crate::dataset::{build_features, outgoing_dependency_counts, FeatureSchema, FeatureVector};
use crate::detector::RefactoringKind;
use crate::error::{Error, Result};

/// Moves predicted above this many person-hours are flagged `LARGE`.
pub const LARGE_MOVE_HOURS: f64 = 8.0;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub entries: BTreeMap<String, String>,
}

impl ClusterAssignment {
    /// One `fqn,clusterId` per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            let malformed = |message: String| Error::Malformed {
                path: origin.to_path_buf(),
                line: line_no,
                message,
            };
            let line = raw.trim().trim_start_matches('\u{feff}');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (fqn, cluster) = line
                .split_once(',')
                .ok_or_else(|| malformed("expected `fqn,clusterId`".into()))?;
            let (fqn, cluster) = (fqn.trim(), cluster.trim());
            if fqn.is_empty() || cluster.is_empty() {
                return Err(malformed("empty class name or cluster id".into()));
            }
            if entries.insert(fqn.to_string(), cluster.to_string()).is_some() {
                return Err(malformed(format!("{fqn} assigned twice")));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read cluster file {}: {e}", path.display()))
        })?;
        Self::parse(&text, path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Move {
    pub class_fqn: String,
    pub from_package: String,
    pub to_package: String,
}

/// Maps each cluster to the package holding most of its classes (ties go to
/// the lexicographically smallest) and moves every class living elsewhere.
pub fn derive_moves(assignment: &ClusterAssignment, classes: &[ClassSummary]) -> Result<Vec<Move>> {
    let packages: BTreeMap<&str, &str> = classes
        .iter()
        .map(|c| (c.fqn.as_str(), c.package.as_str()))
        .collect();
    let missing: Vec<&str> = assignment
        .entries
        .keys()
        .filter(|f| !packages.contains_key(f.as_str()))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::contract(format!(
            "classes not found in snapshot: {}",
            missing.join(", ")
        )));
    }

    let mut votes: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for (fqn, cluster) in &assignment.entries {
        *votes
            .entry(cluster.as_str())
            .or_default()
            .entry(packages[fqn.as_str()])
            .or_default() += 1;
    }
    let plurality: BTreeMap<&str, &str> = votes
        .into_iter()
        .map(|(cluster, counts)| {
            // BTreeMap order makes the first maximum the smallest package
            let mut best = ("", 0usize);
            for (pkg, n) in counts {
                if n > best.1 {
                    best = (pkg, n);
                }
            }
            (cluster, best.0)
        })
        .collect();

    Ok(assignment
        .entries
        .iter()
        .filter_map(|(fqn, cluster)| {
            let from = packages[fqn.as_str()];
            let to = plurality[cluster.as_str()];
            (from != to).then(|| Move {
                class_fqn: fqn.clone(),
                from_package: from.to_string(),
                to_package: to.to_string(),
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedMove {
    pub class_fqn: String,
    pub from_package: String,
    pub to_package: String,
    pub features: FeatureVector,
    pub predicted_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefactoringPlan {
    pub moves: Vec<PlannedMove>,
    pub total_hours: f64,
}

/// Prices each move with features built as for a mined MoveClass op:
/// `ops_in_commit` is the number of planned moves and `cloc` the class's loc.
pub fn estimate_plan(
    moves: &[Move],
    metrics: &BTreeMap<String, CkMetrics>,
    edges: &[DependencyEdge],
    model: &dyn Estimator,
) -> Result<RefactoringPlan> {
    if let Some(schema) = model.schema() {
        FeatureSchema::standard().ensure_matches(schema)?;
    }
    let mut planned = Vec::with_capacity(moves.len());
    for mv in moves {
        let m = metrics.get(&mv.class_fqn).ok_or_else(|| {
            Error::contract(format!("no metrics for moved class {}", mv.class_fqn))
        })?;
        let features = build_features(
            m,
            RefactoringKind::MoveClass,
            moves.len(),
            u64::from(m.loc),
            &outgoing_dependency_counts(&mv.class_fqn, edges),
        );
        let predicted_hours = model.predict(&features.values)?.max(0.0);
        planned.push(PlannedMove {
            class_fqn: mv.class_fqn.clone(),
            from_package: mv.from_package.clone(),
            to_package: mv.to_package.clone(),
            features,
            predicted_hours,
        });
    }
    planned.sort_by(|a, b| {
        b.predicted_hours
            .total_cmp(&a.predicted_hours)
            .then_with(|| a.class_fqn.cmp(&b.class_fqn))
    });
    let total_hours = planned.iter().fold(0.0, |acc, m| acc + m.predicted_hours);
    Ok(RefactoringPlan {
        moves: planned,
        total_hours,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

fn package_label(p: &str) -> &str {
    if p.is_empty() {
        "(default)"
    } else {
        p
    }
}

pub fn render_report(plan: &RefactoringPlan, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Text => Ok(render_text(plan)),
        ReportFormat::Csv => render_csv(plan),
    }
}

fn render_text(plan: &RefactoringPlan) -> String {
    let mut out = String::new();
    let n = plan.moves.len();
    let _ = writeln!(
        out,
        "{n} move{}, total {:.2} person-hours",
        if n == 1 { "" } else { "s" },
        plan.total_hours
    );
    if n > 0 {
        let width = plan.moves.iter().map(|m| m.class_fqn.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>4}  {:<width$}  {:>8}  move", "rank", "class", "hours");
        for (i, m) in plan.moves.iter().enumerate() {
            let flag = if m.predicted_hours > LARGE_MOVE_HOURS { "  LARGE" } else { "" };
            let _ = writeln!(
                out,
                "{:>4}  {:<width$}  {:>8.2}  {} -> {}{flag}",
                i + 1,
                m.class_fqn,
                m.predicted_hours,
                package_label(&m.from_package),
                package_label(&m.to_package),
            );
        }
        let _ = writeln!(
            out,
            "\nnote: commit lines are approximated by each class's loc and \
             ops_in_commit by the number of planned moves"
        );
    }
    out
}

fn render_csv(plan: &RefactoringPlan) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class", "from", "to", "predicted_hours"])?;
    for m in &plan.moves {
        w.write_record([
            m.class_fqn.as_str(),
            m.from_package.as_str(),
            m.to_package.as_str(),
            &m.predicted_hours.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

/// Reads the rows of a CSV report back: `(class, from, to, hours)`.
pub fn parse_csv_report(text: &str) -> Result<Vec<(String, String, String, f64)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != ["class", "from", "to", "predicted_hours"] {
        return Err(Error::contract(format!("unexpected report header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let hours: f64 = rec[3]
            .parse()
            .map_err(|_| Error::contract(format!("bad hours {:?}", &rec[3])))?;
        rows.push((rec[0].to_string(), rec[1].to_string(), rec[2].to_string(), hours));
    }
    Ok(rows)
}

/// Classes of a snapshot that the assignment leaves out; useful as a warning.
pub fn unassigned<'a>(assignment: &ClusterAssignment, classes: &'a [ClassSummary]) -> Vec<&'a str> {
    let assigned: HashSet<&str> = assignment.entries.keys().map(String::as_str).collect();
    classes
        .iter()
        .filter(|c| c.outer_fqn.is_none() && !assigned.contains(c.fqn.as_str()))
        .map(|c| c.fqn.as_str())
        .collect()
}
