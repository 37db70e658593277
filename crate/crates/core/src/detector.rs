//! Class-level refactoring detection between a commit's parent snapshot and
//! its own snapshot.
//!
//! Disappeared classes are paired with newly appearing ones by Jaccard
//! similarity of member signatures (`name/arity` for methods, field names).
//! Pairing is greedy by descending similarity, ties going to the
//! lexicographically smaller `after_fqn`, and each class takes part in at
//! most one pair. A pair is a move, a rename or both depending on which
//! half of the fully-qualified name changed. A new class whose members were
//! removed from a class that survives the commit is an extraction.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analyzer::{ClassSummary, Snapshot};
use crate::error::{Error, Result};
use crate::history::CommitRecord;

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RefactoringKind {
    MoveClass,
    RenameClass,
    MoveAndRenameClass,
    ExtractClass,
}

impl RefactoringKind {
    pub const ALL: [RefactoringKind; 4] = [
        RefactoringKind::MoveClass,
        RefactoringKind::RenameClass,
        RefactoringKind::MoveAndRenameClass,
        RefactoringKind::ExtractClass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RefactoringKind::MoveClass => "MoveClass",
            RefactoringKind::RenameClass => "RenameClass",
            RefactoringKind::MoveAndRenameClass => "MoveAndRenameClass",
            RefactoringKind::ExtractClass => "ExtractClass",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RefactoringKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RefactoringKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::contract(format!("unknown refactoring kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefactoringOp {
    pub kind: RefactoringKind,
    pub commit_id: String,
    pub before_fqn: String,
    pub after_fqn: String,
    pub touched_lines: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub similarity_threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
        }
    }
}

/// |a ∩ b| / |a ∪ b|; two empty sets carry no evidence and score 0.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn classify(before: &ClassSummary, after: &ClassSummary) -> RefactoringKind {
    match (before.package == after.package, before.local_name() == after.local_name()) {
        (false, true) => RefactoringKind::MoveClass,
        (true, false) => RefactoringKind::RenameClass,
        _ => RefactoringKind::MoveAndRenameClass,
    }
}

/// Detects class-level refactorings applied by `commit`. `touched_lines` is
/// left at 0; see [`attribute_refactored_loc`].
pub fn detect(
    before: &Snapshot,
    after: &Snapshot,
    commit: &CommitRecord,
    cfg: &DetectorConfig,
) -> Vec<RefactoringOp> {
    let removed: Vec<&ClassSummary> = before
        .classes()
        .iter()
        .filter(|c| !after.contains(&c.fqn))
        .collect();
    let added: Vec<&ClassSummary> = after
        .classes()
        .iter()
        .filter(|c| !before.contains(&c.fqn))
        .collect();
    if added.is_empty() {
        return Vec::new();
    }

    let added_members: Vec<BTreeSet<String>> = added.iter().map(|c| c.member_signatures()).collect();

    let mut candidates = Vec::new();
    for (ri, r) in removed.iter().enumerate() {
        let members = r.member_signatures();
        for (ai, a_members) in added_members.iter().enumerate() {
            let sim = jaccard(&members, a_members);
            if sim >= cfg.similarity_threshold {
                candidates.push((sim, ri, ai));
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then_with(|| added[x.2].fqn.cmp(&added[y.2].fqn))
            .then_with(|| removed[x.1].fqn.cmp(&removed[y.1].fqn))
    });

    let mut removed_used = vec![false; removed.len()];
    let mut added_used = vec![false; added.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (_, ri, ai) in candidates {
        if removed_used[ri] || added_used[ai] {
            continue;
        }
        removed_used[ri] = true;
        added_used[ai] = true;
        pairs.push((ri, ai));
    }

    // A nested type carried along by its enclosing type is not a refactoring
    // of its own.
    let renamed: HashMap<&str, &str> = pairs
        .iter()
        .map(|&(ri, ai)| (removed[ri].fqn.as_str(), added[ai].fqn.as_str()))
        .collect();
    let carried = |r: &ClassSummary, a: &ClassSummary| -> bool {
        let (Some(ro), Some(ao)) = (r.outer_fqn.as_deref(), a.outer_fqn.as_deref()) else {
            return false;
        };
        renamed.get(ro) == Some(&ao) && r.fqn[ro.len()..] == a.fqn[ao.len()..]
    };

    let mut ops: Vec<RefactoringOp> = pairs
        .iter()
        .filter(|&&(ri, ai)| !carried(removed[ri], added[ai]))
        .map(|&(ri, ai)| RefactoringOp {
            kind: classify(removed[ri], added[ai]),
            commit_id: commit.commit_id.clone(),
            before_fqn: removed[ri].fqn.clone(),
            after_fqn: added[ai].fqn.clone(),
            touched_lines: 0,
        })
        .collect();

    // Extraction sources: surviving classes that lost members.
    let mut shrunk: Vec<(&ClassSummary, BTreeSet<String>)> = Vec::new();
    for old in before.classes() {
        let Some(new) = after.get(&old.fqn) else { continue };
        let lost: BTreeSet<String> = old
            .member_signatures()
            .difference(&new.member_signatures())
            .cloned()
            .collect();
        if !lost.is_empty() {
            shrunk.push((old, lost));
        }
    }
    for (ai, a) in added.iter().enumerate() {
        if added_used[ai] {
            continue;
        }
        let best = shrunk
            .iter()
            .map(|(src, lost)| (jaccard(&added_members[ai], lost), src))
            .filter(|(sim, _)| *sim >= cfg.similarity_threshold)
            .min_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.fqn.cmp(&y.1.fqn)));
        if let Some((_, src)) = best {
            ops.push(RefactoringOp {
                kind: RefactoringKind::ExtractClass,
                commit_id: commit.commit_id.clone(),
                before_fqn: src.fqn.clone(),
                after_fqn: a.fqn.clone(),
                touched_lines: 0,
            });
        }
    }

    ops.sort_by(|x, y| {
        x.after_fqn
            .cmp(&y.after_fqn)
            .then_with(|| x.before_fqn.cmp(&y.before_fqn))
    });
    ops
}

/// Indices of the commit's file changes touched by `op`.
fn touched_changes(
    op: &RefactoringOp,
    commit: &CommitRecord,
    before: &Snapshot,
    after: &Snapshot,
) -> BTreeSet<usize> {
    let paths: Vec<&str> = [
        before.get(&op.before_fqn).map(|c| c.path.as_str()),
        after.get(&op.after_fqn).map(|c| c.path.as_str()),
    ]
    .into_iter()
    .flatten()
    .collect();
    commit
        .file_changes
        .iter()
        .enumerate()
        .filter(|(_, fc)| paths.iter().any(|p| fc.touches(p)))
        .map(|(i, _)| i)
        .collect()
}

/// Sets `touched_lines` (RLoC) on every op of one commit: the changed lines
/// of the files holding each op's before and after class. A file shared by
/// k ops is split equally, the integer remainder going to the earliest ops.
pub fn attribute_refactored_loc(
    ops: &mut [RefactoringOp],
    commit: &CommitRecord,
    before: &Snapshot,
    after: &Snapshot,
) {
    let touched: Vec<BTreeSet<usize>> = ops
        .iter()
        .map(|op| touched_changes(op, commit, before, after))
        .collect();
    for op in ops.iter_mut() {
        op.touched_lines = 0;
    }
    for (ci, change) in commit.file_changes.iter().enumerate() {
        let sharers: Vec<usize> = (0..ops.len()).filter(|&oi| touched[oi].contains(&ci)).collect();
        if sharers.is_empty() {
            continue;
        }
        let lines = change.changed_lines();
        let k = sharers.len() as u64;
        for (rank, &oi) in sharers.iter().enumerate() {
            ops[oi].touched_lines += lines / k + u64::from((rank as u64) < lines % k);
        }
    }
    for (op, files) in ops.iter().zip(&touched) {
        if files.is_empty() {
            log::debug!(
                "{} {} -> {}: no changed file in {}",
                op.kind,
                op.before_fqn,
                op.after_fqn,
                commit.commit_id
            );
        }
    }
}

/// RLoC of a single op, as if it were the only op of its commit.
pub fn refactored_loc(
    op: &mut RefactoringOp,
    commit: &CommitRecord,
    before: &Snapshot,
    after: &Snapshot,
) -> u64 {
    attribute_refactored_loc(std::slice::from_mut(op), commit, before, after);
    op.touched_lines
}

/// Ops dump: `commit_id,kind,before_fqn,after_fqn,touched_lines`.
pub fn write_ops<W: Write>(ops: &[RefactoringOp], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["commit_id", "kind", "before_fqn", "after_fqn", "touched_lines"])?;
    for op in ops {
        w.write_record([
            op.commit_id.as_str(),
            op.kind.as_str(),
            &op.before_fqn,
            &op.after_fqn,
            &op.touched_lines.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
