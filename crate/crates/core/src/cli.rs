//! Command-line surface: gen → fit → predict → eval → curve / radar, plus
//! selftest. Exit codes: 0 success, 1 validation error, 2 runtime failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::episodes::{read_dataset, read_predictions, write_dataset, write_prediction, DatasetPlan, Episode, EpisodeError, Split};
use crate::harness::{self, radar_ratios, read_report, write_curves, write_radar, write_report, EvalReport, HarnessError};
use crate::predictors::{self, fit_linear, fit_neural_derivative, FittedModel, NeuralConfig, PredictError};
use crate::selftest;
use crate::tasks::{default_spec, ParamRange, TaskError, TaskId};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::InvalidSpec(_) | TaskError::UnknownTask(_) | TaskError::MissingParam(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EpisodeError> for CliError {
    fn from(e: EpisodeError) -> Self {
        match e {
            EpisodeError::AlreadyExists(_) | EpisodeError::OverlappingSeeds(_) => CliError::Validation(e.to_string()),
            EpisodeError::Task(t) => t.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::Unknown(_) | PredictError::Shape(_) | PredictError::NoData => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Episode(inner) => inner.into(),
            HarnessError::ZeroReference { .. } | HarnessError::MissingCell { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wmbench", version, about = "Physics world-model benchmark: generate episodes, fit baselines, score rollouts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset split: one JSON file per episode plus manifest.json.
    Gen(GenArgs),
    /// Fit a learned baseline (linear or neural) on a training split.
    Fit(FitArgs),
    /// Write one prediction file per episode of an evaluation split.
    Predict(PredictArgs),
    /// Score predictors and/or prediction files; writes report.json, table.csv, curves and radar.csv.
    Eval(EvalArgs),
    /// Re-emit horizon-curve CSVs from a report.
    Curve(CurveArgs),
    /// Compute normalised error ratios against a reference predictor from a report.
    Radar(RadarArgs),
    /// Run the built-in conservation and closed-form checks.
    Selftest,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Task id (free_fall, projectile, bouncing_ball, elastic_collision, circular, inclined_plane,
    /// pendulum, rolling, rotation, spin, reprojection)
    #[arg(long)]
    task: Option<String>,
    /// Number of episodes [default: 1000]
    #[arg(long)]
    count: Option<usize>,
    /// Base seed; episode i uses a child seed of (seed, i) [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step, seconds [default: 0.02]
    #[arg(long)]
    dt: Option<f64>,
    /// Transitions per episode (T; episodes hold T+1 states) [default: 100]
    #[arg(long)]
    steps: Option<usize>,
    /// Parameter range override, repeatable: name=lo:hi in the parameter's SI unit
    #[arg(long = "range", value_name = "KEY=LO:HI")]
    range: Vec<String>,
    /// Split label recorded in the manifest: train or eval [default: train]
    #[arg(long)]
    split: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 = all cores; output does not depend on it [default: 0]
    #[arg(long)]
    jobs: Option<usize>,
    /// Replace existing files
    #[arg(long)]
    overwrite: bool,
    /// TOML file with the same keys as the flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Model to fit: linear or neural
    #[arg(long)]
    predictor: Option<String>,
    /// Training split directory (contains manifest.json)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output model file (JSON)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ridge penalty for the linear model [default: 1e-6]
    #[arg(long)]
    lambda: Option<f64>,
    /// Training epochs for the neural model [default: 50]
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size for the neural model [default: 256]
    #[arg(long)]
    batch: Option<usize>,
    /// Seed for weight init and shuffling [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Replace an existing model file
    #[arg(long)]
    overwrite: bool,
    /// TOML file with the same keys as the flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Built-in predictor (oracle, zoh, constvel) or a fitted model file
    #[arg(long)]
    predictor: Option<String>,
    /// Evaluation split directory
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for prediction files
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ground-truth states shown to the predictor [default: 10]
    #[arg(long = "condition-steps")]
    condition_steps: Option<usize>,
    /// Worker threads, 0 = all cores [default: 0]
    #[arg(long)]
    jobs: Option<usize>,
    /// Replace existing files
    #[arg(long)]
    overwrite: bool,
    /// TOML file with the same keys as the flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predictor to score, repeatable: oracle, zoh, constvel, or a fitted model file
    #[arg(long)]
    predictor: Vec<String>,
    /// Directory of external prediction files to score, repeatable
    #[arg(long)]
    predictions: Vec<PathBuf>,
    /// Evaluation split directory, repeatable (one per task)
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Ground-truth states shown to predictors [default: 10]
    #[arg(long = "condition-steps")]
    condition_steps: Option<usize>,
    /// Imagined steps scored [default: 90]
    #[arg(long = "rollout-steps")]
    rollout_steps: Option<usize>,
    /// Reference predictor for radar ratios [default: linear, when scored]
    #[arg(long)]
    reference: Option<String>,
    /// Report directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 = all cores [default: 0]
    #[arg(long)]
    jobs: Option<usize>,
    /// Replace existing report files
    #[arg(long)]
    overwrite: bool,
    /// TOML file with the same keys as the flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// report.json written by eval
    #[arg(long)]
    report: PathBuf,
    /// Output directory [default: the report's directory]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace existing files
    #[arg(long)]
    overwrite: bool,
}

#[derive(Debug, Args)]
struct RadarArgs {
    /// report.json written by eval
    #[arg(long)]
    report: PathBuf,
    /// Reference predictor [default: linear]
    #[arg(long)]
    reference: Option<String>,
    /// Output directory [default: the report's directory]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace existing files
    #[arg(long)]
    overwrite: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Config file keys; identical to the long flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct ConfigFile {
    task: Option<String>,
    count: Option<usize>,
    seed: Option<u64>,
    dt: Option<f64>,
    steps: Option<usize>,
    range: Option<OneOrMany>,
    split: Option<String>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    overwrite: Option<bool>,
    predictor: Option<OneOrMany>,
    predictions: Option<OneOrMany>,
    data: Option<OneOrMany>,
    lambda: Option<f64>,
    epochs: Option<usize>,
    batch: Option<usize>,
    condition_steps: Option<usize>,
    rollout_steps: Option<usize>,
    reference: Option<String>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else { return Ok(ConfigFile::default()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Validation(format!("--{flag} is required")))
}

/// Flag values win; the config fills in the rest.
fn merge_list(flags: Vec<String>, config: Option<OneOrMany>) -> Vec<String> {
    if flags.is_empty() {
        config.map(OneOrMany::into_vec).unwrap_or_default()
    } else {
        flags
    }
}

fn parse_range(s: &str) -> Result<(String, ParamRange), CliError> {
    let bad = || CliError::Validation(format!("--range `{s}` is not KEY=LO:HI"));
    let (key, bounds) = s.split_once('=').ok_or_else(bad)?;
    let (lo, hi) = bounds.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let r = ParamRange(lo, hi);
    if !r.is_valid() {
        return Err(CliError::Validation(format!("--range `{s}`: need finite lo ≤ hi")));
    }
    Ok((key.trim().to_string(), r))
}

fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn cmd_gen(a: GenArgs) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let task: TaskId = required(a.task.or(cfg.task), "task")?.parse()?;
    let count = a.count.or(cfg.count).unwrap_or(1000);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let split: Split = a.split.or(cfg.split).unwrap_or_else(|| "train".into()).parse().map_err(CliError::Validation)?;
    let out = required(a.out.or(cfg.out), "out")?;
    let jobs = a.jobs.or(cfg.jobs).unwrap_or(0);
    let overwrite = a.overwrite || cfg.overwrite.unwrap_or(false);
    let ranges = merge_list(a.range, cfg.range);

    let mut spec = default_spec(task);
    if let Some(dt) = a.dt.or(cfg.dt) {
        spec.dt = dt;
    }
    if let Some(steps) = a.steps.or(cfg.steps) {
        spec.horizon = steps;
    }
    let overrides: BTreeMap<String, ParamRange> = ranges.iter().map(|r| parse_range(r)).collect::<Result<_, _>>()?;
    let spec = spec.with_ranges(&overrides)?;

    let mut invocation = BTreeMap::new();
    invocation.insert("task".into(), task.to_string());
    invocation.insert("count".into(), count.to_string());
    invocation.insert("seed".into(), seed.to_string());
    invocation.insert("dt".into(), spec.dt.to_string());
    invocation.insert("steps".into(), spec.horizon.to_string());
    invocation.insert("split".into(), format!("{split:?}").to_lowercase());
    if !ranges.is_empty() {
        invocation.insert("range".into(), ranges.join(" "));
    }

    let plan = DatasetPlan { spec, count, base_seed: seed, split };
    let manifest = with_pool(jobs, || write_dataset(&plan, &out, overwrite, invocation))??;
    for f in &manifest.failures {
        eprintln!("episode {} (seed {}) failed: {}", f.index, f.seed, f.error);
    }
    println!("wrote {} episodes of {} to {}", manifest.episodes.len(), task, out.display());
    if !manifest.failures.is_empty() {
        return Err(CliError::Runtime(format!("{} episode(s) failed", manifest.failures.len())));
    }
    Ok(())
}

fn load_split(dir: &Path) -> Result<Vec<Episode>, CliError> {
    Ok(read_dataset(dir)?.1)
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let kind = required(a.predictor.or(cfg.predictor.and_then(|p| p.into_vec().into_iter().next())), "predictor")?;
    let data = required(a.data.or(cfg.data.and_then(|d| d.into_vec().into_iter().next().map(PathBuf::from))), "data")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let overwrite = a.overwrite || cfg.overwrite.unwrap_or(false);
    if !overwrite && out.exists() {
        return Err(EpisodeError::AlreadyExists(out).into());
    }
    let train = load_split(&data)?;
    let model = match kind.as_str() {
        "linear" => FittedModel::Linear(fit_linear(&train, a.lambda.or(cfg.lambda).unwrap_or(predictors::DEFAULT_RIDGE))?),
        "neural" => {
            let defaults = NeuralConfig::default();
            let nc = NeuralConfig {
                epochs: a.epochs.or(cfg.epochs).unwrap_or(defaults.epochs),
                batch: a.batch.or(cfg.batch).unwrap_or(defaults.batch),
                seed: a.seed.or(cfg.seed).unwrap_or(defaults.seed),
                ..defaults
            };
            let m = fit_neural_derivative(&train, &nc)?;
            if let Some(l) = m.epoch_losses.last() {
                println!("final training loss {l}");
            }
            FittedModel::Neural(m)
        }
        other => return Err(CliError::Validation(format!("cannot fit `{other}` (linear or neural)"))),
    };
    model.save(&out)?;
    println!("wrote {kind} model to {}", out.display());
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let name = required(a.predictor.or(cfg.predictor.and_then(|p| p.into_vec().into_iter().next())), "predictor")?;
    let data = required(a.data.or(cfg.data.and_then(|d| d.into_vec().into_iter().next().map(PathBuf::from))), "data")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let c = a.condition_steps.or(cfg.condition_steps).unwrap_or(predictors::DEFAULT_CONDITION_STEPS);
    let jobs = a.jobs.or(cfg.jobs).unwrap_or(0);
    let overwrite = a.overwrite || cfg.overwrite.unwrap_or(false);
    let p = predictors::resolve(&name)?;
    let eval = load_split(&data)?;
    let records = with_pool(jobs, || {
        eval.par_iter().map(|e| predictors::predict(p.as_ref(), e, c)).collect::<Result<Vec<_>, _>>()
    })??;
    fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    for r in &records {
        write_prediction(r, &out.join(format!("{}.json", r.episode_id)), overwrite)?;
    }
    println!("wrote {} prediction files to {}", records.len(), out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let cfg = load_config(a.config.as_deref())?;
    let names = merge_list(a.predictor, cfg.predictor);
    let external: Vec<PathBuf> = if a.predictions.is_empty() {
        cfg.predictions.map(OneOrMany::into_vec).unwrap_or_default().into_iter().map(PathBuf::from).collect()
    } else {
        a.predictions
    };
    let data: Vec<PathBuf> = if a.data.is_empty() {
        cfg.data.map(OneOrMany::into_vec).unwrap_or_default().into_iter().map(PathBuf::from).collect()
    } else {
        a.data
    };
    let c = a.condition_steps.or(cfg.condition_steps).unwrap_or(predictors::DEFAULT_CONDITION_STEPS);
    let rollout = a.rollout_steps.or(cfg.rollout_steps).unwrap_or(harness::DEFAULT_ROLLOUT_STEPS);
    let out = required(a.out.or(cfg.out), "out")?;
    let jobs = a.jobs.or(cfg.jobs).unwrap_or(0);
    let overwrite = a.overwrite || cfg.overwrite.unwrap_or(false);
    let reference = a.reference.or(cfg.reference);
    if data.is_empty() {
        return Err(CliError::Validation("--data is required".into()));
    }
    if names.is_empty() && external.is_empty() {
        return Err(CliError::Validation("give at least one --predictor or --predictions".into()));
    }
    let resolved = names.iter().map(|n| predictors::resolve(n)).collect::<Result<Vec<_>, _>>()?;
    let mut eval = Vec::new();
    for d in &data {
        eval.extend(load_split(d)?);
    }
    let mut report = EvalReport::new(c, rollout);
    with_pool(jobs, || -> Result<(), CliError> {
        for (name, p) in names.iter().zip(&resolved) {
            // A model fitted on one task is scored only on that task's episodes.
            let subset: Vec<Episode> = match predictors::FittedModel::load(Path::new(name)) {
                Ok(m) => {
                    let task = match m {
                        FittedModel::Linear(l) => l.task,
                        FittedModel::Neural(n) => n.task,
                    };
                    eval.iter().filter(|e| e.task.task == task).cloned().collect()
                }
                Err(_) => eval.clone(),
            };
            report.merge(harness::evaluate(p.as_ref(), &subset, c, rollout)?)?;
        }
        for dir in &external {
            let records = read_predictions(dir)?;
            let ids: std::collections::BTreeSet<&str> = records.iter().map(|r| r.episode_id.as_str()).collect();
            let tasks: std::collections::BTreeSet<TaskId> =
                eval.iter().filter(|e| ids.contains(e.episode_id.as_str())).map(|e| e.task.task).collect();
            let subset: Vec<Episode> = eval.iter().filter(|e| tasks.contains(&e.task.task)).cloned().collect();
            report.merge(harness::score_external(&records, &subset, rollout)?)?;
        }
        Ok(())
    })??;
    let reference = match reference {
        Some(r) => Some(r),
        None => report.predictors().into_iter().find(|p| p == "linear"),
    };
    if let Some(r) = reference {
        report.radar = Some(radar_ratios(&report, &r)?);
    }
    let paths = write_report(&report, &out, overwrite)?;
    for cell in &report.cells {
        println!("{:<18} {:<10} mse {}", cell.task.as_str(), cell.predictor, cell.mse);
    }
    println!("wrote {} files to {}", paths.len(), out.display());
    Ok(())
}

fn report_dir(report: &Path, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| report.parent().map(Path::to_path_buf).unwrap_or_default())
}

fn cmd_curve(a: CurveArgs) -> Result<(), CliError> {
    let report = read_report(&a.report)?;
    let paths = write_curves(&report, &report_dir(&a.report, a.out), a.overwrite)?;
    for p in &paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_radar(a: RadarArgs) -> Result<(), CliError> {
    let mut report = read_report(&a.report)?;
    let reference = a.reference.unwrap_or_else(|| "linear".into());
    let table = radar_ratios(&report, &reference)?;
    for (t, task) in table.tasks.iter().enumerate() {
        for (p, pred) in table.predictors.iter().enumerate() {
            println!("{task},{pred},{},{}", table.ratios[t][p], table.normalized[t][p]);
        }
    }
    report.radar = Some(table);
    let dir = report_dir(&a.report, a.out);
    fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    write_radar(&report, &dir, a.overwrite)?;
    Ok(())
}

fn cmd_selftest() -> Result<(), CliError> {
    let checks = selftest::run_all();
    for c in &checks {
        println!("{} {} — {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} selftest check(s) failed")));
    }
    Ok(())
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Radar(a) => cmd_radar(a),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let (CliError::Validation(m) | CliError::Runtime(m)) = &e;
            eprintln!("error: {m}");
            e.code()
        }
    }
}
