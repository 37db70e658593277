//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Criterion 7 mines the repository named by `REFACTOR_EFFORT_REAL_REPO` when set,
//! otherwise a generated 320-commit corpus.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use refactor_effort::analyzer::{compute_all, extract_dependencies};
use refactor_effort::baselines::{load_estimator, mean_fit, Estimator};
use refactor_effort::dataset::{
    build_features, outgoing_dependency_counts, split, Dataset, FeatureSchema, FeatureVector, Provenance, Row,
    FEATURE_COUNT,
};
use refactor_effort::detector::RefactoringKind;
use refactor_effort::effort::compute_rtt;
use refactor_effort::gbm::{evaluate, fit, GbmHyperparams};
use refactor_effort::pipeline::{mine, snapshot_from_dir, MineConfig};
use refactor_effort::planner::{derive_moves, estimate_plan, parse_csv_report, ClusterAssignment};
use refactor_effort::synthetic::{build_large_corpus, build_small_corpus};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, rtt_exactness),
        (2, detector_oracle),
        (3, metric_oracle),
        (4, learner_signal),
        (5, learner_null),
        (6, evaluate_arithmetic),
        (7, benchmark_shape),
        (8, train_determinism),
        (9, end_to_end_plan),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, check) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({detail}; {secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("criterion {n}: FAIL ({why}; {secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown".into())
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    if elapsed > Duration::from_secs(limit_secs) {
        Err(format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64()))
    } else {
        Ok(())
    }
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_refactor-effort"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "refactor-effort {} exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn rtt_exactness() -> Outcome {
    let rtt = compute_rtt(9.0, 25, 102).map_err(|e| e.to_string())?;
    ensure!((rtt - 2.2059).abs() <= 0.001, "compute_rtt(9, 25, 102) = {rtt}");
    Ok(format!("rtt = {rtt:.4}"))
}

fn detector_oracle() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = build_small_corpus(dir.path()).map_err(|e| e.to_string())?;
    let out = mine(&corpus.path, &MineConfig::default()).map_err(|e| e.to_string())?;
    within(start.elapsed(), 30)?;

    let found: BTreeSet<_> = out
        .ops
        .iter()
        .map(|o| (o.commit_id.clone(), o.kind, o.before_fqn.clone(), o.after_fqn.clone()))
        .collect();
    let planted: BTreeSet<_> = corpus
        .planted
        .iter()
        .map(|p| (p.commit_id.clone(), p.kind, p.before_fqn.clone(), p.after_fqn.clone()))
        .collect();
    let hits = found.intersection(&planted).count() as f64;
    let precision = if found.is_empty() { 0.0 } else { hits / found.len() as f64 };
    let recall = hits / planted.len() as f64;
    ensure!(planted.len() == 20, "corpus plants {} ops", planted.len());
    ensure!(
        precision == 1.0 && recall == 1.0,
        "precision {precision:.3}, recall {recall:.3}"
    );
    Ok(format!(
        "{} planted ops over {} commits, precision 1.0, recall 1.0",
        planted.len(),
        corpus.commit_ids.len()
    ))
}

fn metric_oracle() -> Outcome {
    let mismatches = common::ck_mismatches();
    ensure!(mismatches.is_empty(), "{}", mismatches.join("; "));
    Ok(format!("{} classes match", common::expected_ck().len()))
}

/// Random integer features; `target` maps a feature row to its noiseless value.
fn synthetic_dataset(n: usize, seed: u64, target: impl Fn(&[f64], &mut ChaCha8Rng) -> f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = FeatureSchema::standard();
    let rows = (0..n)
        .map(|i| {
            let mut values: Vec<f64> = (0..FEATURE_COUNT).map(|_| f64::from(rng.gen_range(0..30u32))).collect();
            values[0] = f64::from(rng.gen_range(1..20u32));
            values[3] = f64::from(rng.gen_range(0..10u32));
            let y = target(&values, &mut rng);
            Row {
                features: FeatureVector::new(values),
                target_hours: y,
                provenance: Provenance {
                    commit_id: format!("synthetic{i}"),
                    op_kind: RefactoringKind::MoveClass,
                    before_fqn: format!("p.C{i}"),
                },
            }
        })
        .collect();
    Dataset { schema, rows }
}

fn gbm_vs_mean(ds: &Dataset) -> Result<(f64, f64), String> {
    let (train, test) = split(ds, 0.2, 42).map_err(|e| e.to_string())?;
    let gbm = fit(&train, None, &GbmHyperparams::default()).map_err(|e| e.to_string())?;
    let mean = mean_fit(&train).map_err(|e| e.to_string())?;
    let score = |m: &dyn Estimator| -> Result<f64, String> {
        let p = m.predict_dataset(&test).map_err(|e| e.to_string())?;
        Ok(evaluate(&p, &test.targets()).map_err(|e| e.to_string())?.mae)
    };
    Ok((score(&gbm)?, score(&mean)?))
}

fn learner_signal() -> Outcome {
    let start = Instant::now();
    let noise = Normal::new(0.0, 0.1).unwrap();
    let ds = synthetic_dataset(500, 11, |x, rng| 3.0 * x[0] + 0.5 * x[3] + noise.sample(rng));
    let (gbm, mean) = gbm_vs_mean(&ds)?;
    let (gbm_again, _) = gbm_vs_mean(&ds)?;
    within(start.elapsed(), 60)?;
    ensure!(gbm == gbm_again, "refit gave MAE {gbm_again} after {gbm}");
    ensure!(gbm < mean && gbm < 0.5, "GBM MAE {gbm:.4}, mean MAE {mean:.4}");
    Ok(format!("GBM MAE {gbm:.4} < mean MAE {mean:.4}"))
}

fn learner_null() -> Outcome {
    let start = Instant::now();
    let noise = Normal::new(10.0, 1.0).unwrap();
    let ds = synthetic_dataset(500, 13, |_, rng| noise.sample(rng));
    let (gbm, mean) = gbm_vs_mean(&ds)?;
    within(start.elapsed(), 60)?;
    let ratio = gbm / mean;
    ensure!(
        (ratio - 1.0).abs() <= 0.2,
        "GBM MAE {gbm:.4} vs mean MAE {mean:.4} (ratio {ratio:.3})"
    );
    Ok(format!("GBM MAE {gbm:.4}, mean MAE {mean:.4}, ratio {ratio:.3}"))
}

fn evaluate_arithmetic() -> Outcome {
    let r = evaluate(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    ensure!(
        (r.mae - 0.666667).abs() <= 1e-6 && (r.rmse - 0.816497).abs() <= 1e-6 && r.r2.abs() <= 1e-6,
        "MAE {} RMSE {} R2 {}",
        r.mae,
        r.rmse,
        r.r2
    );
    Ok(format!("MAE {:.6} RMSE {:.6} R2 {:.6}", r.mae, r.rmse, r.r2))
}

/// Parses the `evaluate` table into `(estimator, MAE)` pairs.
fn evaluate_table(report: &str) -> Vec<(String, f64)> {
    report
        .lines()
        .skip_while(|l| !l.starts_with("estimator"))
        .skip(1)
        .filter_map(|l| {
            let mut cells = l.split_whitespace();
            let name = cells.next()?.to_string();
            let mae = cells.next()?.parse().ok()?;
            Some((name, mae))
        })
        .collect()
}

fn benchmark_shape() -> Outcome {
    let start = Instant::now();
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (repo, origin): (PathBuf, String) = match std::env::var_os("REFACTOR_EFFORT_REAL_REPO") {
        Some(p) => (PathBuf::from(&p), format!("repository {}", PathBuf::from(&p).display())),
        None => {
            let corpus = build_large_corpus(&work.path().join("corpus"), 320, 7).map_err(|e| e.to_string())?;
            (corpus.path, "generated 320-commit corpus".into())
        }
    };
    let data = work.path().join("data.csv");
    let manifest = work.path().join("commits.csv");
    let model = work.path().join("model.json");
    cli(&["mine", path_str(&repo), "-o", path_str(&data), "--manifest", path_str(&manifest)])?;
    let commits = std::fs::read_to_string(&manifest).map_err(|e| e.to_string())?.lines().count() - 1;
    let samples = std::fs::read_to_string(&data).map_err(|e| e.to_string())?.lines().count() - 1;
    ensure!(commits >= 300 && samples >= 30, "{origin}: {commits} commits, {samples} samples");

    cli(&["train", path_str(&data), "-o", path_str(&model)])?;
    let report = cli(&["evaluate", path_str(&data), "--model-file", path_str(&model), "--baselines"])?;
    within(start.elapsed(), 600)?;

    let table = evaluate_table(&report);
    let mae = |name: &str| table.iter().find(|(n, _)| n == name).map(|(_, m)| *m);
    let names: Vec<&str> = table.iter().map(|(n, _)| n.as_str()).collect();
    ensure!(
        ["GBM", "Mean", "COCOMOII", "GeneticP"].iter().all(|n| names.contains(n)),
        "estimators in report: {names:?}"
    );
    let (gbm, cocomo) = (mae("GBM").unwrap(), mae("COCOMOII").unwrap());
    ensure!(cocomo > gbm, "COCOMO II MAE {cocomo} does not exceed GBM MAE {gbm}");
    Ok(format!(
        "{origin}, {commits} commits, {samples} samples, MAE GBM {gbm:.3} Mean {:.3} COCOMOII {cocomo:.3} GeneticP {:.3}",
        mae("Mean").unwrap(),
        mae("GeneticP").unwrap()
    ))
}

/// Mines the small corpus through the CLI; returns the corpus and dataset paths.
fn small_corpus_dataset(work: &Path) -> Result<(PathBuf, PathBuf), String> {
    let corpus = build_small_corpus(&work.join("corpus")).map_err(|e| e.to_string())?;
    let data = work.join("data.csv");
    cli(&["mine", path_str(&corpus.path), "-o", path_str(&data)])?;
    Ok((corpus.path, data))
}

fn train_determinism() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_, data) = small_corpus_dataset(work.path())?;
    let mut checked = Vec::new();
    for kind in ["gbm", "gp"] {
        let a = work.path().join(format!("{kind}-a.json"));
        let b = work.path().join(format!("{kind}-b.json"));
        for out in [&a, &b] {
            cli(&["train", path_str(&data), "--model", kind, "--seed", "9", "-o", path_str(out)])?;
        }
        let (a, b) = (std::fs::read(&a).map_err(|e| e.to_string())?, std::fs::read(&b).map_err(|e| e.to_string())?);
        ensure!(a == b, "{kind} model files differ");
        checked.push(format!("{kind} {} bytes", a.len()));
    }
    Ok(format!("identical files: {}", checked.join(", ")))
}

fn end_to_end_plan() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (repo, data) = small_corpus_dataset(work.path())?;
    let model_path = work.path().join("model.json");
    cli(&["train", path_str(&data), "-o", path_str(&model_path)])?;
    let clusters = common::fixture("plan/clusters.csv");
    let predict = |format: &str| {
        cli(&[
            "predict",
            path_str(&repo),
            "--clusters",
            path_str(&clusters),
            "--model-file",
            path_str(&model_path),
            "--format",
            format,
        ])
    };
    let rows = parse_csv_report(&predict("csv")?).map_err(|e| e.to_string())?;
    let text = predict("text")?;

    let expected_text = std::fs::read_to_string(common::fixture("plan/expected_moves.csv")).map_err(|e| e.to_string())?;
    let expected: BTreeSet<(String, String, String)> = expected_text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].to_string(), c[1].to_string(), c[2].to_string())
        })
        .collect();
    let got: BTreeSet<(String, String, String)> = rows.iter().map(|(c, f, t, _)| (c.clone(), f.clone(), t.clone())).collect();
    ensure!(got == expected, "move set {got:?}");

    // One predict call per moved class, outside the planner.
    let model = load_estimator(&model_path).map_err(|e| e.to_string())?;
    let snapshot = snapshot_from_dir(&repo).map_err(|e| e.to_string())?;
    let edges = extract_dependencies(&snapshot);
    let metrics = compute_all(&snapshot, &edges);
    let mut independent = 0.0;
    for (class, _, _, hours) in &rows {
        let m = metrics.get(class).ok_or(format!("no metrics for {class}"))?;
        let x = build_features(
            m,
            RefactoringKind::MoveClass,
            rows.len(),
            u64::from(m.loc),
            &outgoing_dependency_counts(class, &edges),
        );
        let h = model.predict(&x.values).map_err(|e| e.to_string())?.max(0.0);
        ensure!((h - hours).abs() <= 1e-9, "{class}: report {hours}, direct {h}");
        independent += h;
    }

    let assignment = ClusterAssignment::read(&clusters).map_err(|e| e.to_string())?;
    let moves = derive_moves(&assignment, snapshot.classes()).map_err(|e| e.to_string())?;
    let plan = estimate_plan(&moves, &metrics, &edges, model.as_ref()).map_err(|e| e.to_string())?;
    ensure!(
        (plan.total_hours - independent).abs() <= 1e-9,
        "plan total {} vs summed predictions {independent}",
        plan.total_hours
    );
    let headline = format!("{} moves, total {:.2} person-hours", rows.len(), independent);
    ensure!(text.starts_with(&headline), "text report begins {:?}", text.lines().next());
    Ok(format!("{} moves, total {:.4} person-hours", rows.len(), plan.total_hours))
}
