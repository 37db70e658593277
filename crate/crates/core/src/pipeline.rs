//! Repository mining: history, refactorings, effort targets and features.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::analyzer::{compute_all, extract_dependencies, parse_source_bytes, ClassSummary, Snapshot};
use crate::dataset::{assemble, Dataset, SnapshotFeatures};
use crate::detector::{attribute_refactored_loc, detect, DetectorConfig, RefactoringOp};
use crate::effort::{build_targets, filter_targets, EffortTarget};
use crate::error::Result;
use crate::git;
use crate::history::{commit_loc, estimate_tct, walk_history, CommitRecord, TctParams};

#[derive(Debug, Clone)]
pub struct MineConfig {
    pub branch: String,
    pub max_commits: Option<usize>,
    pub tct: TctParams,
    pub detector: DetectorConfig,
    pub max_target_hours: Option<f64>,
}

impl Default for MineConfig {
    fn default() -> Self {
        Self {
            branch: "HEAD".into(),
            max_commits: None,
            tct: TctParams::default(),
            detector: DetectorConfig::default(),
            max_target_hours: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MineDiagnostics {
    pub commits: usize,
    /// Non-merge commits touching Java sources whose snapshots were compared.
    pub commits_analyzed: usize,
    pub ops_detected: usize,
    /// Ops in commits with no measurable change, which cannot carry a target.
    pub ops_skipped_zero_cloc: usize,
    pub targets_filtered: usize,
    pub imputed_rows: usize,
}

#[derive(Debug, Clone)]
pub struct MineOutput {
    pub commits: Vec<CommitRecord>,
    pub ops: Vec<RefactoringOp>,
    pub targets: Vec<EffortTarget>,
    pub dataset: Dataset,
    pub diagnostics: MineDiagnostics,
}

/// Parsed Java files keyed by `(path, blob)`, so unchanged files are parsed once.
#[derive(Default)]
struct SnapshotCache {
    parsed: HashMap<(String, String), Vec<ClassSummary>>,
}

impl SnapshotCache {
    fn snapshot(&mut self, repo: &Path, commit: &str) -> Result<Snapshot> {
        let entries = git::list_blobs(repo, commit, ".java")?;
        let missing: Vec<&git::TreeEntry> = entries
            .iter()
            .filter(|e| !self.parsed.contains_key(&(e.path.clone(), e.blob.clone())))
            .collect();
        if !missing.is_empty() {
            let ids: Vec<String> = missing.iter().map(|e| e.blob.clone()).collect();
            let contents = git::read_blobs(repo, &ids)?;
            let parsed: Vec<Vec<ClassSummary>> = missing
                .par_iter()
                .zip(contents.par_iter())
                .map(|(e, bytes)| parse_source_bytes(bytes, &e.path).unwrap_or_default())
                .collect();
            for (e, classes) in missing.iter().zip(parsed) {
                self.parsed.insert((e.path.clone(), e.blob.clone()), classes);
            }
        }
        Ok(Snapshot::new(
            entries
                .iter()
                .flat_map(|e| self.parsed[&(e.path.clone(), e.blob.clone())].iter().cloned())
                .collect(),
        ))
    }
}

pub fn mine(repo: &Path, cfg: &MineConfig) -> Result<MineOutput> {
    cfg.tct.validate()?;
    let mut commits = walk_history(repo, &cfg.branch, cfg.max_commits)?;
    commits.sort_by_key(|c| c.timestamp_utc);
    estimate_tct(&mut commits, &cfg.tct)?;

    let mut diagnostics = MineDiagnostics {
        commits: commits.len(),
        ..Default::default()
    };
    let mut cache = SnapshotCache::default();
    let mut ops = Vec::new();
    let mut parent_features: HashMap<String, SnapshotFeatures> = HashMap::new();

    for commit in &commits {
        let Some(parent) = commit.first_parent() else {
            continue;
        };
        if commit.is_merge() || !commit.file_changes.iter().any(|f| is_java(f)) {
            continue;
        }
        diagnostics.commits_analyzed += 1;
        let before = cache.snapshot(repo, parent)?;
        let after = cache.snapshot(repo, &commit.commit_id)?;
        let mut found = detect(&before, &after, commit, &cfg.detector);
        if found.is_empty() {
            continue;
        }
        diagnostics.ops_detected += found.len();
        if commit_loc(commit) == 0 {
            log::warn!("commit {} has refactorings but no changed lines; skipped", commit.commit_id);
            diagnostics.ops_skipped_zero_cloc += found.len();
            continue;
        }
        attribute_refactored_loc(&mut found, commit, &before, &after);
        let edges = extract_dependencies(&before);
        let metrics = compute_all(&before, &edges);
        parent_features.insert(commit.commit_id.clone(), SnapshotFeatures { metrics, edges });
        ops.extend(found);
    }

    let targets = build_targets(&commits, &ops)?;
    let before_filter = targets.len();
    let targets = filter_targets(targets, cfg.max_target_hours);
    diagnostics.targets_filtered = before_filter - targets.len();
    let (dataset, assembly) = assemble(&targets, &parent_features);
    diagnostics.imputed_rows = assembly.imputed_rows;

    Ok(MineOutput {
        commits,
        ops,
        targets,
        dataset,
        diagnostics,
    })
}

fn is_java(change: &crate::history::FileChange) -> bool {
    change.path.ends_with(".java") || change.old_path.as_deref().is_some_and(|p| p.ends_with(".java"))
}

/// Parses every `.java` file under `root`, skipping VCS and build directories.
pub fn snapshot_from_dir(root: &Path) -> Result<Snapshot> {
    if !root.is_dir() {
        return Err(crate::error::Error::config(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let mut sources = Vec::new();
    let walker = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            let name = e.file_name().to_string_lossy();
            !(e.depth() > 0 && e.file_type().is_dir() && (name.starts_with('.') || name == "target" || name == "build"))
        });
    for entry in walker {
        let entry = entry.map_err(|e| crate::error::Error::config(e.to_string()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "java") {
            let rel = entry
                .path()
                .strip_prefix(root)
                .unwrap_or(entry.path())
                .to_string_lossy()
                .replace('\\', "/");
            sources.push((rel, std::fs::read(entry.path())?));
        }
    }
    Ok(Snapshot::from_sources(&sources))
}
