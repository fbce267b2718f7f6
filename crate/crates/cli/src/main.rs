//! Command-line front end: learns sparse-coding dictionaries with random
//! sigmoid features, labels queries, reconstructs images, reports
//! sparsity statistics, and runs hyperparameter sweeps.
//!
//! Every run is driven by a JSON config (see `docs/formats.md`) and
//! writes `report.json` plus command-specific CSVs into the output
//! directory. With a fixed seed all of those files are byte-identical
//! across runs; wall-clock facts are quarantined in `meta.json`.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or config error,
//! 3 data error.

mod commands;
mod config;
mod reports;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rvfldl::{Error, Result};

use config::{RunConfig, TaskTag};
use reports::{unix_ms_now, write_json, Meta};

#[derive(Parser)]
#[command(name = "rvfldl")]
#[command(version)]
#[command(about = "Sparse-coding dictionary learner with random sigmoid features")]
struct Cli {
    /// Path to the JSON run configuration
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the config value
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for (fold, run) jobs and per-class machines
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Directory the output files go to (created if missing)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a dictionary, and a label map when labels are given
    Train,
    /// Label query samples with a trained model
    Classify {
        /// Predict by the argmax of the label map instead of the margin
        /// classifier
        #[arg(long)]
        argmax: bool,

        /// Polynomial kernel degree, overriding the config value
        #[arg(long)]
        degree: Option<u32>,

        /// Soft-margin regularization, overriding the config value
        #[arg(long, value_name = "C")]
        reg_c: Option<f64>,
    },
    /// Code queries against the dictionary and write reconstructions
    Reconstruct,
    /// Report sparsity and reconstruction statistics on a dataset
    Eval,
    /// Run the full pipeline over hyperparameter grids
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Classify { .. } => "classify",
            Command::Reconstruct => "reconstruct",
            Command::Eval => "eval",
            Command::Sweep => "sweep",
        }
    }

    fn accepts(&self, task: TaskTag) -> bool {
        match self {
            Command::Train => matches!(task, TaskTag::TrainUnsup | TaskTag::TrainSup),
            Command::Classify { .. } => task == TaskTag::Classify,
            Command::Reconstruct => task == TaskTag::Reconstruct,
            Command::Eval => task == TaskTag::Eval,
            Command::Sweep => task == TaskTag::Sweep,
        }
    }
}

#[cfg(feature = "parallel")]
fn setup_threads(requested: Option<usize>) -> usize {
    if let Some(n) = requested {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("thread pool already initialized: {e}");
            }
        }
    }
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
fn setup_threads(requested: Option<usize>) -> usize {
    if requested.is_some_and(|n| n > 1) {
        log::warn!("built without the parallel feature; --threads is ignored");
    }
    1
}

fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::InvalidArgument { .. } => 2,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
        Error::Parse { .. }
        | Error::IdxMagic { .. }
        | Error::IdxTruncated { .. }
        | Error::IdxCountMismatch { .. }
        | Error::ModelMagic { .. }
        | Error::ModelVersion { .. }
        | Error::ModelDims { .. }
        | Error::ShapeMismatch { .. }
        | Error::SingleClass { .. }
        | Error::MissingClassInFold { .. }
        | Error::ZeroNormColumn { .. } => 3,
        _ => 1,
    }
}

fn category(error: &Error) -> &'static str {
    match exit_code(error) {
        2 => "config",
        3 => "data",
        _ => "internal",
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg = RunConfig::load(config_path)?;
    if !cli.command.accepts(cfg.task) {
        return Err(Error::Config(format!(
            "config task \"{}\" does not match the \"{}\" command",
            cfg.task.as_str(),
            cli.command.name()
        )));
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    let threads = setup_threads(cli.threads);

    let started_unix_ms = unix_ms_now();
    let started = Instant::now();
    let report = match &cli.command {
        Command::Train => commands::cmd_train(&cfg, &out, cli.seed)?,
        Command::Classify {
            argmax,
            degree,
            reg_c,
        } => commands::cmd_classify(
            &cfg,
            &out,
            &commands::SvcOverrides {
                argmax: *argmax,
                degree: *degree,
                reg_c: *reg_c,
            },
        )?,
        Command::Reconstruct => commands::cmd_reconstruct(&cfg, &out)?,
        Command::Eval => commands::cmd_eval(&cfg, &out)?,
        Command::Sweep => commands::cmd_sweep(&cfg, &out, cli.seed)?,
    };

    let report_path = out.join("report.json");
    write_json(&report_path, &report)?;
    let meta = Meta {
        command: cli.command.name(),
        package_version: env!("CARGO_PKG_VERSION"),
        threads,
        started_unix_ms,
        wall_ms: started.elapsed().as_millis(),
    };
    write_json(&out.join("meta.json"), &meta)?;
    println!(
        "{}: report written to {}",
        report.task,
        report_path.display()
    );
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(error) = run(&cli) {
        eprintln!("error: {}: {error}", category(&error));
        std::process::exit(exit_code(&error));
    }
}
