use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use refactor_effort::analyzer::{compute_all, extract_dependencies};
use refactor_effort::baselines::{
    gp_fit, load_estimator, mean_fit, save_baseline, BaselineModel, CocomoConfig, CocomoEstimator,
    Estimator, GpConfig,
};
use refactor_effort::dataset::{read_csv, split, write_csv, write_csv_to};
use refactor_effort::detector::{write_ops, DetectorConfig};
use refactor_effort::gbm::{evaluate, fit, save_model, EvalReport, GbmHyperparams};
use refactor_effort::history::{write_manifest, TctParams};
use refactor_effort::pipeline::{mine, snapshot_from_dir, MineConfig};
use refactor_effort::planner::{
    derive_moves, estimate_plan, render_report, unassigned, ClusterAssignment, ReportFormat,
};
use refactor_effort::Result;

#[derive(Parser)]
#[command(name = "refactor-effort", version, about = "Estimate the person-hours of refactoring plans from mined history")]
struct Cli {
    /// Log progress (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine a git repository into an effort dataset (CSV)
    Mine(MineArgs),
    /// Fit an estimator on a dataset and report held-out error
    Train(TrainArgs),
    /// Compare a trained model against the baseline estimators
    Evaluate(EvaluateArgs),
    /// Price the move-class plan implied by a clustering of a source tree
    Predict(PredictArgs),
}

#[derive(clap::Args)]
struct MineArgs {
    repo: PathBuf,
    #[arg(long, default_value = "HEAD")]
    branch: String,
    #[arg(long)]
    max_commits: Option<usize>,
    /// Hours between commits that start a new work session
    #[arg(long, default_value_t = 4.0)]
    session_gap: f64,
    /// Hours credited to the first commit of a session
    #[arg(long, default_value_t = 0.5)]
    seed_hours: f64,
    /// Upper bound on one commit's hours
    #[arg(long, default_value_t = 12.0)]
    cap_hours: f64,
    /// Member-set similarity needed to pair a removed and an added class
    #[arg(long, default_value_t = 0.7)]
    similarity: f64,
    /// Drop targets above this many person-hours
    #[arg(long)]
    max_target_hours: Option<f64>,
    /// Dataset destination (stdout if omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write the commit manifest (id, author, time, cloc, tct)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Also write the detected refactorings
    #[arg(long)]
    ops: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Gbm,
    Mean,
    Cocomo,
    Gp,
}

#[derive(clap::Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
}

#[derive(clap::Args)]
struct TrainArgs {
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Gbm)]
    model: ModelKind,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 300)]
    trees: usize,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 0.05)]
    rate: f64,
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    #[arg(long, default_value_t = 0.8)]
    subsample: f64,
    /// Stop after this many rounds without improvement on the held-out split
    #[arg(long)]
    early_stopping: Option<usize>,
    #[command(flatten)]
    gp: GpArgs,
    #[arg(short, long, default_value = "model.json")]
    output: PathBuf,
}

#[derive(clap::Args)]
struct GpArgs {
    #[arg(long, default_value_t = 200)]
    gp_population: usize,
    #[arg(long, default_value_t = 50)]
    gp_generations: usize,
}

impl GpArgs {
    fn config(&self, seed: u64) -> GpConfig {
        GpConfig {
            population: self.gp_population,
            generations: self.gp_generations,
            seed,
            ..Default::default()
        }
    }
}

#[derive(clap::Args)]
struct EvaluateArgs {
    dataset: PathBuf,
    #[arg(long)]
    model_file: PathBuf,
    /// Also fit and score the mean, COCOMO II and GP estimators
    #[arg(long)]
    baselines: bool,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    gp: GpArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

#[derive(clap::Args)]
struct PredictArgs {
    /// Directory holding the current Java sources
    snapshot: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let outcome = match cli.command {
        Command::Mine(args) => run_mine(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Predict(args) => run_predict(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_mine(args: MineArgs) -> Result<()> {
    let cfg = MineConfig {
        branch: args.branch,
        max_commits: args.max_commits,
        tct: TctParams {
            session_gap_hours: args.session_gap,
            seed_hours: args.seed_hours,
            cap_hours: args.cap_hours,
        },
        detector: DetectorConfig {
            similarity_threshold: args.similarity,
        },
        max_target_hours: args.max_target_hours,
    };
    let out = mine(&args.repo, &cfg)?;
    let d = out.diagnostics;
    eprintln!(
        "{} commits, {} analyzed, {} refactorings, {} samples ({} imputed, {} over the target cap, {} in empty commits)",
        d.commits,
        d.commits_analyzed,
        d.ops_detected,
        out.dataset.len(),
        d.imputed_rows,
        d.targets_filtered,
        d.ops_skipped_zero_cloc
    );
    if let Some(path) = &args.manifest {
        write_manifest(&out.commits, fs::File::create(path)?)?;
    }
    if let Some(path) = &args.ops {
        write_ops(&out.ops, fs::File::create(path)?)?;
    }
    match &args.output {
        Some(path) => write_csv(&out.dataset, path),
        None => write_csv_to(&out.dataset, io::stdout().lock()),
    }
}

fn run_train(args: TrainArgs) -> Result<()> {
    let ds = read_csv(&args.dataset)?;
    let (train, test) = split(&ds, args.split.test_fraction, args.split.seed)?;
    let estimator: Box<dyn Estimator> = match args.model {
        ModelKind::Gbm => {
            let hp = GbmHyperparams {
                n_trees: args.trees,
                max_depth: args.depth,
                learning_rate: args.rate,
                min_samples_leaf: args.min_leaf,
                subsample: args.subsample,
                seed: args.split.seed,
                early_stopping_rounds: args.early_stopping,
            };
            let valid = hp.early_stopping_rounds.map(|_| &test);
            let model = fit(&train, valid, &hp)?;
            save_model(&model, &args.output)?;
            Box::new(model)
        }
        ModelKind::Mean => {
            let model = BaselineModel::Mean(mean_fit(&train)?);
            save_baseline(&model, &args.output)?;
            boxed(model)
        }
        ModelKind::Cocomo => {
            let model = BaselineModel::Cocomo(CocomoEstimator {
                config: CocomoConfig::default(),
            });
            save_baseline(&model, &args.output)?;
            boxed(model)
        }
        ModelKind::Gp => {
            let model = BaselineModel::Gp(gp_fit(&train, &args.gp.config(args.split.seed))?);
            save_baseline(&model, &args.output)?;
            boxed(model)
        }
    };
    let report = score(estimator.as_ref(), &test)?;
    println!(
        "{} trained on {} rows, tested on {}: {report}",
        estimator.name(),
        train.len(),
        test.len()
    );
    println!("model written to {}", args.output.display());
    Ok(())
}

fn boxed(model: BaselineModel) -> Box<dyn Estimator> {
    match model {
        BaselineModel::Mean(m) => Box::new(m),
        BaselineModel::Cocomo(c) => Box::new(c),
        BaselineModel::Gp(g) => Box::new(g),
    }
}

fn score(estimator: &dyn Estimator, test: &refactor_effort::dataset::Dataset) -> Result<EvalReport> {
    let predictions = estimator.predict_dataset(test)?;
    evaluate(&predictions, &test.targets())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let ds = read_csv(&args.dataset)?;
    let model = load_estimator(&args.model_file)?;
    if let Some(schema) = model.schema() {
        schema.ensure_matches(&ds.schema)?;
    }
    let (train, test) = split(&ds, args.split.test_fraction, args.split.seed)?;

    let mut rows: Vec<(String, EvalReport)> = vec![(model.name().to_string(), score(model.as_ref(), &test)?)];
    if args.baselines {
        let mean = mean_fit(&train)?;
        rows.push((mean.name().into(), score(&mean, &test)?));
        let cocomo = CocomoEstimator {
            config: CocomoConfig::default(),
        };
        rows.push((cocomo.name().into(), score(&cocomo, &test)?));
        let gp = gp_fit(&train, &args.gp.config(args.split.seed))?;
        rows.push((gp.name().into(), score(&gp, &test)?));
    }

    println!(
        "held-out split: {} of {} rows (seed {}, fraction {})",
        test.len(),
        ds.len(),
        args.split.seed,
        args.split.test_fraction
    );
    println!("{:<10} {:>12} {:>12} {:>10}", "estimator", "MAE", "RMSE", "R2");
    for (name, r) in &rows {
        println!("{name:<10} {:>12.3} {:>12.3} {:>10}", r.mae, r.rmse, r.r2_display());
    }
    if args.baselines {
        println!("note: COCOMO II size per sample is the commit's changed lines divided by its refactoring count");
    }
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<()> {
    let model = load_estimator(&args.model_file)?;
    let assignment = ClusterAssignment::read(&args.clusters)?;
    let snapshot = snapshot_from_dir(&args.snapshot)?;
    let left_out = unassigned(&assignment, snapshot.classes());
    if !left_out.is_empty() {
        log::warn!("{} classes have no cluster and stay in place", left_out.len());
    }
    let moves = derive_moves(&assignment, snapshot.classes())?;
    let edges = extract_dependencies(&snapshot);
    let metrics = compute_all(&snapshot, &edges);
    let plan = estimate_plan(&moves, &metrics, &edges, model.as_ref())?;
    let format = match args.format {
        FormatArg::Text => ReportFormat::Text,
        FormatArg::Csv => ReportFormat::Csv,
    };
    emit(args.output.as_deref(), &render_report(&plan, format)?)
}
