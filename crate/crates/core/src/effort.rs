//! Proxy effort targets.
//!
//! The Refactoring Time Taken of an operation is the share of its commit's
//! time proportional to the share of changed lines it accounts for:
//! `rtt = tct × rloc / cloc`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::detector::RefactoringOp;
use crate::error::{Error, Result};
use crate::history::{commit_loc, CommitRecord};

pub fn compute_rtt(tct_hours: f64, rloc: u64, cloc: u64) -> Result<f64> {
    if !(tct_hours > 0.0 && tct_hours.is_finite()) {
        return Err(Error::contract(format!("tct must be positive, got {tct_hours}")));
    }
    if cloc == 0 {
        return Err(Error::ZeroCommitLoc("<unknown>".into()));
    }
    if rloc > cloc {
        return Err(Error::contract(format!(
            "refactored lines ({rloc}) exceed commit lines ({cloc})"
        )));
    }
    Ok(tct_hours * rloc as f64 / cloc as f64)
}

/// One regression target: an op and the person-hours attributed to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortTarget {
    pub op: RefactoringOp,
    pub commit_timestamp: i64,
    pub tct_hours: f64,
    pub cloc: u64,
    /// Ops detected in the same commit, this one included.
    pub ops_in_commit: usize,
    pub rtt_hours: f64,
}

/// Targets for every op with a non-zero RTT, ordered by commit timestamp
/// then `after_fqn`.
pub fn build_targets(commits: &[CommitRecord], ops: &[RefactoringOp]) -> Result<Vec<EffortTarget>> {
    let by_id: HashMap<&str, &CommitRecord> =
        commits.iter().map(|c| (c.commit_id.as_str(), c)).collect();
    let mut per_commit: HashMap<&str, usize> = HashMap::new();
    for op in ops {
        *per_commit.entry(op.commit_id.as_str()).or_default() += 1;
    }

    let mut targets = Vec::new();
    for op in ops {
        let commit = by_id.get(op.commit_id.as_str()).ok_or_else(|| {
            Error::contract(format!("op {} -> {} references unknown commit {}", op.before_fqn, op.after_fqn, op.commit_id))
        })?;
        let tct = commit.tct_hours.ok_or_else(|| {
            Error::contract(format!("commit {} has no TCT estimate", commit.commit_id))
        })?;
        let cloc = commit_loc(commit);
        let rtt = compute_rtt(tct, op.touched_lines, cloc).map_err(|e| match e {
            Error::ZeroCommitLoc(_) => Error::ZeroCommitLoc(commit.commit_id.clone()),
            other => other,
        })?;
        if rtt > 0.0 {
            targets.push(EffortTarget {
                op: op.clone(),
                commit_timestamp: commit.timestamp_utc,
                tct_hours: tct,
                cloc,
                ops_in_commit: per_commit[op.commit_id.as_str()],
                rtt_hours: rtt,
            });
        }
    }
    targets.sort_by(|a, b| {
        a.commit_timestamp
            .cmp(&b.commit_timestamp)
            .then_with(|| a.op.after_fqn.cmp(&b.op.after_fqn))
    });
    Ok(targets)
}

/// Drops targets above `max_hours`; `None` keeps everything.
pub fn filter_targets(targets: Vec<EffortTarget>, max_hours: Option<f64>) -> Vec<EffortTarget> {
    match max_hours {
        Some(max) => targets.into_iter().filter(|t| t.rtt_hours <= max).collect(),
        None => targets,
    }
}
