//! Commit history mining and the Total Commit Time (TCT) heuristic.
//!
//! `walk_history` shells out to `git`, one `diff-tree` per commit against its
//! first parent with rename detection at 50% similarity. `estimate_tct`
//! assigns each commit the person-hours spent producing it using a
//! per-author session model: a commit that follows the same author's
//! previous commit within `session_gap_hours` is credited with the elapsed
//! time (capped), otherwise it opens a new session worth `seed_hours`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::git;

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    /// Post-image path; for deletions the pre-image path.
    pub path: String,
    /// Pre-image path when rename detection collapsed a delete+add pair.
    pub old_path: Option<String>,
    pub lines_added: u64,
    pub lines_deleted: u64,
    /// `(start, length)` hunks in the post-image, sorted and disjoint.
    pub changed_line_ranges: Vec<(u64, u64)>,
}

impl FileChange {
    pub fn changed_lines(&self) -> u64 {
        self.lines_added + self.lines_deleted
    }

    /// True when either side of this change is `path`.
    pub fn touches(&self, path: &str) -> bool {
        self.path == path || self.old_path.as_deref() == Some(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub commit_id: String,
    /// Lowercased author email.
    pub author_key: String,
    /// Author time, seconds since the epoch.
    pub timestamp_utc: i64,
    pub parent_ids: Vec<String>,
    pub file_changes: Vec<FileChange>,
    pub tct_hours: Option<f64>,
}

impl CommitRecord {
    pub fn is_merge(&self) -> bool {
        self.parent_ids.len() > 1
    }

    pub fn first_parent(&self) -> Option<&str> {
        self.parent_ids.first().map(String::as_str)
    }
}

/// Total changed lines (added + deleted) of a commit: its CLoC.
pub fn commit_loc(commit: &CommitRecord) -> u64 {
    commit.file_changes.iter().map(FileChange::changed_lines).sum()
}

/// Parameters of the session heuristic, all in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TctParams {
    pub session_gap_hours: f64,
    pub seed_hours: f64,
    pub cap_hours: f64,
}

impl Default for TctParams {
    fn default() -> Self {
        Self {
            session_gap_hours: 4.0,
            seed_hours: 0.5,
            // Above one working day: single commits of 9 person-hours are
            // observed in practice.
            cap_hours: 12.0,
        }
    }
}

impl TctParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.session_gap_hours, self.seed_hours, self.cap_hours]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.session_gap_hours <= 0.0 {
            return Err(Error::config("session gap must be a positive number of hours"));
        }
        if !(self.seed_hours > 0.0 && self.seed_hours <= self.cap_hours) {
            return Err(Error::config("require 0 < seed hours <= cap hours"));
        }
        Ok(())
    }
}

/// Assigns `tct_hours` to every commit.
///
/// Commits must be sorted by `timestamp_utc` ascending. Sessions are tracked
/// per author, so interleaving of other authors has no effect. A commit with
/// the same timestamp as its author's previous one has no measurable elapsed
/// time and is credited with `seed_hours`.
pub fn estimate_tct(commits: &mut [CommitRecord], params: &TctParams) -> Result<()> {
    params.validate()?;
    if let Some(w) = commits
        .windows(2)
        .find(|w| w[1].timestamp_utc < w[0].timestamp_utc)
    {
        return Err(Error::contract(format!(
            "commits not sorted by timestamp: {} ({}) precedes {} ({})",
            w[0].commit_id, w[0].timestamp_utc, w[1].commit_id, w[1].timestamp_utc
        )));
    }

    let mut last_seen: HashMap<&str, i64> = HashMap::new();
    let mut assigned = Vec::with_capacity(commits.len());
    for commit in commits.iter() {
        let tct = match last_seen.insert(&commit.author_key, commit.timestamp_utc) {
            Some(prev) => {
                let elapsed = (commit.timestamp_utc - prev) as f64 / SECONDS_PER_HOUR;
                if elapsed <= 0.0 || elapsed > params.session_gap_hours {
                    params.seed_hours
                } else {
                    elapsed.min(params.cap_hours)
                }
            }
            None => params.seed_hours,
        };
        assigned.push(tct);
    }
    for (commit, tct) in commits.iter_mut().zip(assigned) {
        commit.tct_hours = Some(tct);
    }
    Ok(())
}

/// Reads the history of `branch` in `repo_path`, oldest first.
///
/// Parents always precede children; otherwise commits are in commit-date
/// order. `max_commits` keeps the most recent N. Merge commits are included,
/// diffed against their first parent.
pub fn walk_history(
    repo_path: &Path,
    branch: &str,
    max_commits: Option<usize>,
) -> Result<Vec<CommitRecord>> {
    if !repo_path.is_dir() {
        return Err(Error::config(format!(
            "repository path {} is not a directory",
            repo_path.display()
        )));
    }
    if git::try_run(repo_path, ["rev-parse", "--git-dir"])?.is_none() {
        return Err(Error::config(format!(
            "{} is not a readable git repository",
            repo_path.display()
        )));
    }

    let spec = format!("{branch}^{{commit}}");
    let resolved = git::try_run(repo_path, ["rev-parse", "--verify", "-q", spec.as_str()])?;
    if resolved.is_none() {
        let any_commit = git::run(repo_path, ["rev-list", "--all", "--max-count=1"])?;
        if any_commit.iter().all(u8::is_ascii_whitespace) {
            return Ok(Vec::new());
        }
        return Err(Error::config(format!("branch {branch:?} does not resolve to a commit")));
    }

    let mut args = vec![
        "log".to_string(),
        "--date-order".into(),
        "--reverse".into(),
        "--format=%H%x00%ae%x00%at%x00%P%x1e".into(),
    ];
    if let Some(n) = max_commits {
        args.push(format!("--max-count={n}"));
    }
    args.push(branch.to_string());
    args.push("--".into());
    let log = git::run(repo_path, &args)?;
    let headers = parse_log(&String::from_utf8_lossy(&log))?;

    headers
        .into_par_iter()
        .map(|mut commit| {
            commit.file_changes = diff_commit(repo_path, &commit)?;
            Ok(commit)
        })
        .collect()
}

fn parse_log(log: &str) -> Result<Vec<CommitRecord>> {
    let mut commits = Vec::new();
    for record in log.split('\x1e') {
        let record = record.trim_matches(|c| c == '\n' || c == '\r');
        if record.is_empty() {
            continue;
        }
        let fields: Vec<&str> = record.split('\0').collect();
        if fields.len() != 4 {
            return Err(Error::Git {
                command: "log".into(),
                stderr: format!("unexpected log record {record:?}"),
            });
        }
        let timestamp_utc: i64 = fields[2].parse().map_err(|_| Error::Git {
            command: "log".into(),
            stderr: format!("bad timestamp {:?}", fields[2]),
        })?;
        commits.push(CommitRecord {
            commit_id: fields[0].to_string(),
            author_key: fields[1].trim().to_lowercase(),
            timestamp_utc,
            parent_ids: fields[3].split_whitespace().map(str::to_string).collect(),
            file_changes: Vec::new(),
            tct_hours: None,
        });
    }
    Ok(commits)
}

fn diff_commit(repo: &Path, commit: &CommitRecord) -> Result<Vec<FileChange>> {
    let mut args = vec!["diff-tree", "-r", "-M50%", "-U0", "--no-ext-diff", "--no-textconv"];
    match commit.first_parent() {
        Some(parent) => {
            args.push(parent);
            args.push(&commit.commit_id);
        }
        None => {
            args.push("--root");
            args.push(&commit.commit_id);
        }
    }
    let patch = git::run(repo, &args)?;
    Ok(parse_patch(&String::from_utf8_lossy(&patch)))
}

#[derive(Default)]
struct PendingFile {
    old_path: Option<String>,
    new_path: Option<String>,
    renamed: bool,
    added: u64,
    deleted: u64,
    ranges: Vec<(u64, u64)>,
}

impl PendingFile {
    fn finish(self) -> Option<FileChange> {
        if self.added + self.deleted == 0 {
            return None;
        }
        let path = self.new_path.clone().or_else(|| self.old_path.clone())?;
        let old_path = if self.renamed { self.old_path } else { None };
        Some(FileChange {
            path,
            old_path,
            lines_added: self.added,
            lines_deleted: self.deleted,
            changed_line_ranges: self.ranges,
        })
    }
}

/// Parses a zero-context unified diff into per-file change stats.
///
/// Binary files and pure renames produce no hunks and are therefore not
/// recorded.
pub(crate) fn parse_patch(patch: &str) -> Vec<FileChange> {
    let mut changes = Vec::new();
    let mut current: Option<PendingFile> = None;
    let (mut old_left, mut new_left) = (0u64, 0u64);

    for line in patch.lines() {
        if old_left > 0 || new_left > 0 {
            match line.as_bytes().first() {
                Some(b'-') => old_left = old_left.saturating_sub(1),
                Some(b'+') => new_left = new_left.saturating_sub(1),
                Some(b'\\') => {}
                _ => {
                    old_left = old_left.saturating_sub(1);
                    new_left = new_left.saturating_sub(1);
                }
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(done) = current.take().and_then(PendingFile::finish) {
                changes.push(done);
            }
            let mut file = PendingFile::default();
            if let Some((a, b)) = split_git_header(rest) {
                file.old_path = Some(a);
                file.new_path = Some(b);
            }
            current = Some(file);
            continue;
        }
        let Some(file) = current.as_mut() else {
            continue;
        };
        if let Some(p) = line.strip_prefix("rename from ") {
            file.old_path = Some(unquote(p));
            file.renamed = true;
        } else if let Some(p) = line.strip_prefix("rename to ") {
            file.new_path = Some(unquote(p));
            file.renamed = true;
        } else if let Some(p) = line.strip_prefix("--- ") {
            file.old_path = strip_side(p, "a/");
        } else if let Some(p) = line.strip_prefix("+++ ") {
            file.new_path = strip_side(p, "b/");
        } else if let Some(header) = line.strip_prefix("@@ ") {
            if let Some((old_len, new_start, new_len)) = parse_hunk_header(header) {
                file.deleted += old_len;
                file.added += new_len;
                if new_len > 0 {
                    file.ranges.push((new_start, new_len));
                }
                old_left = old_len;
                new_left = new_len;
            }
        }
    }
    if let Some(done) = current.and_then(PendingFile::finish) {
        changes.push(done);
    }
    changes
}

fn strip_side(p: &str, prefix: &str) -> Option<String> {
    let p = unquote(p.trim_end_matches('\t'));
    if p == "/dev/null" {
        return None;
    }
    Some(p.strip_prefix(prefix).map(str::to_string).unwrap_or(p))
}

fn split_git_header(rest: &str) -> Option<(String, String)> {
    if rest.starts_with('"') {
        return None;
    }
    let rest = rest.strip_prefix("a/")?;
    let idx = rest.find(" b/")?;
    Some((rest[..idx].to_string(), rest[idx + 3..].to_string()))
}

/// `@@ -a[,b] +c[,d] @@` → `(b, c, d)`; omitted lengths default to 1.
fn parse_hunk_header(header: &str) -> Option<(u64, u64, u64)> {
    let mut parts = header.split_whitespace();
    let old = parts.next()?.strip_prefix('-')?;
    let new = parts.next()?.strip_prefix('+')?;
    let span = |s: &str| -> Option<(u64, u64)> {
        match s.split_once(',') {
            Some((start, len)) => Some((start.parse().ok()?, len.parse().ok()?)),
            None => Some((s.parse().ok()?, 1)),
        }
    };
    let (_, old_len) = span(old)?;
    let (new_start, new_len) = span(new)?;
    Some((old_len, new_start, new_len))
}

/// Undoes git's C-style path quoting.
fn unquote(p: &str) -> String {
    let Some(inner) = p.strip_prefix('"').and_then(|s| s.strip_suffix('"')) else {
        return p.to_string();
    };
    let mut bytes = Vec::with_capacity(inner.len());
    let mut it = inner.bytes().peekable();
    while let Some(b) = it.next() {
        if b != b'\\' {
            bytes.push(b);
            continue;
        }
        match it.next() {
            Some(b'n') => bytes.push(b'\n'),
            Some(b't') => bytes.push(b'\t'),
            Some(b'r') => bytes.push(b'\r'),
            Some(d @ b'0'..=b'7') => {
                let mut v = (d - b'0') as u32;
                for _ in 0..2 {
                    match it.peek() {
                        Some(&n @ b'0'..=b'7') => {
                            v = v * 8 + (n - b'0') as u32;
                            it.next();
                        }
                        _ => break,
                    }
                }
                bytes.push(v as u8);
            }
            Some(other) => bytes.push(other),
            None => bytes.push(b'\\'),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

/// Writes the commits manifest: `commit_id,author_key,timestamp_utc,cloc,tct_hours`.
pub fn write_manifest<W: Write>(commits: &[CommitRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["commit_id", "author_key", "timestamp_utc", "cloc", "tct_hours"])?;
    for c in commits {
        let tct = c.tct_hours.map(|h| h.to_string()).unwrap_or_default();
        w.write_record([
            c.commit_id.clone(),
            c.author_key.clone(),
            c.timestamp_utc.to_string(),
            commit_loc(c).to_string(),
            tct,
        ])?;
    }
    w.flush()?;
    Ok(())
}
