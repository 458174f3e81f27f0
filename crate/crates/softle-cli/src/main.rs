//! `softle`: reproducible teacher/student soft-label debiasing runs.
//!
//! Exit codes: 0 success, 2 unknown verb or bad usage, 3 invalid config,
//! 4 IO failure, 5 training divergence.

mod config_file;
mod error;
mod experiment;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use softle_core::baselines::BaselineKind;

use config_file::FullConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "softle",
    version,
    about = "Soft-label-encoding debiasing: synthetic benchmarks, teacher/student training, baselines, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key = value config file; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for all artifacts.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the schedule row: F<n>, L<n>, or none.
    #[arg(long)]
    schedule: Option<String>,
    /// Override the over-confidence threshold.
    #[arg(long)]
    xi: Option<f64>,
    /// Override the shortcut-degree log base.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the shortcut-degree offset.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate the synthetic train/ID/OOD splits.
    GenData(CommonArgs),
    /// Train the biased linear teacher on hard labels.
    TrainTeacher(CommonArgs),
    /// Score the training set with the teacher and persist annotations.
    Encode(CommonArgs),
    /// Train the (K+1)-class student on the encoded labels.
    TrainStudent(CommonArgs),
    /// Train a comparison model sharing the same teacher.
    TrainBaseline {
        #[command(flatten)]
        common: CommonArgs,
        /// Which baseline: none (standard hard-label), reweighting, poe.
        #[arg(long)]
        baseline: String,
    },
    /// Score every checkpoint in the run directory on the test splits.
    Evaluate(CommonArgs),
    /// Render the human-readable report from the metrics tables.
    Report(CommonArgs),
    /// The full chain: gen-data, train-teacher, encode, train-student,
    /// evaluate, report.
    RunAll(CommonArgs),
}

impl Verb {
    fn common(&self) -> &CommonArgs {
        match self {
            Verb::GenData(c)
            | Verb::TrainTeacher(c)
            | Verb::Encode(c)
            | Verb::TrainStudent(c)
            | Verb::Evaluate(c)
            | Verb::Report(c)
            | Verb::RunAll(c) => c,
            Verb::TrainBaseline { common, .. } => common,
        }
    }
}

/// Defaults, then the config file, then flag overrides; validated before
/// any output is touched.
fn resolve_config(args: &CommonArgs) -> Result<FullConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => FullConfig::parse(&formats::read_to_string(path)?)?,
        None => FullConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(schedule) = &args.schedule {
        cfg.set_schedule(schedule)?;
    }
    if let Some(xi) = args.xi {
        cfg.run.xi = xi;
    }
    if let Some(alpha) = args.alpha {
        cfg.run.alpha = alpha;
    }
    if let Some(beta) = args.beta {
        cfg.run.beta = beta;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let args = cli.verb.common();
    let cfg = resolve_config(args)?;
    let dir = args.out_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    match &cli.verb {
        Verb::GenData(_) => experiment::gen_data(&cfg, &dir),
        Verb::TrainTeacher(_) => experiment::train_teacher(&cfg, &dir),
        Verb::Encode(_) => experiment::encode(&cfg, &dir),
        Verb::TrainStudent(_) => experiment::train_student(&cfg, &dir),
        Verb::TrainBaseline { baseline, .. } => {
            let kind = BaselineKind::parse(baseline).ok_or_else(|| {
                CliError::config(format!(
                    "unknown baseline '{baseline}' (expected none, reweighting, or poe)"
                ))
            })?;
            experiment::train_baseline(&cfg, &dir, kind)
        }
        Verb::Evaluate(_) => experiment::evaluate(&cfg, &dir),
        Verb::Report(_) => experiment::report(&cfg, &dir),
        Verb::RunAll(_) => experiment::run_all(&cfg, &dir),
    }
}

fn main() -> ExitCode {
    // clap exits with code 2 on unknown verbs and bad usage
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
