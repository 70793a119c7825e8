//! The `ragtune` command line: run configs, artifacts and reports.

pub mod artifact;
pub mod config;
pub mod report;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ragtune_core::{summarize, Algorithm};
use serde_json::json;
use thiserror::Error;

pub const OUT_DIR_ENV: &str = "RAGTUNE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "ragtune-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid search space: {0}")]
    Space(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Records { path: String, line: usize, message: String },
    #[error("no run artifact in {0}")]
    NoArtifact(String),
    #[error("optimization failed: {0}")]
    Optimizer(String),
    #[error("report failed: {0}")]
    Report(String),
    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Space(_) => "space",
            CliError::Io { .. } => "io",
            CliError::Records { .. } => "records",
            CliError::NoArtifact(_) => "no_artifact",
            CliError::Optimizer(_) => "optimizer",
            CliError::Report(_) => "report",
            CliError::Serialize(_) => "serialize",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// One-line JSON error record.
    pub fn to_json(&self) -> String {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        if let CliError::Records { path, line, .. } = self {
            body["path"] = json!(path);
            body["line"] = json!(line);
        }
        json!({ "error": body }).to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "ragtune", version, about = "Multi-objective tuning of RAG pipeline configurations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one optimization and write its artifact.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the algorithm in the config file.
        #[arg(long)]
        algorithm: Option<Algorithm>,
        #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
        out: PathBuf,
    },
    /// Run every algorithm on every seed and write summary tables.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "nehvi,sobol,uniform")]
        algorithms: Vec<Algorithm>,
        #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
        out: PathBuf,
    },
    /// Write Pareto projections and the selection table for a run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Check a search-space file, or the space a run config uses.
    ValidateSpace {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Executes a parsed command and returns what should go to stdout.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run { config, seed, algorithm, out } => {
            let mut cfg = config::load_run_config(&config, seed)?;
            if let Some(a) = algorithm {
                cfg.run.algorithm = a;
            }
            let history = artifact::execute_run(&cfg, &out)?;
            let last = history.records.last().expect("validated config runs at least one iteration");
            Ok(json!({
                "status": "complete",
                "out": out.display().to_string(),
                "records": history.records.len(),
                "train_hv": last.train_hv,
                "test_hv": last.test_hv,
            })
            .to_string()
                + "\n")
        }
        Command::Bench { config, seeds, algorithms, out } => bench(&config, &seeds, &algorithms, &out),
        Command::Report { input } => report::write_report(&input),
        Command::ValidateSpace { config } => {
            let space = config::load_space(&config)?;
            let params: Vec<_> = space.parameters().iter().map(|p| json!({ "name": p.name, "kind": p.kind })).collect();
            Ok(json!({
                "valid": true,
                "parameters": params,
                "encoded_dim": space.encoded_dim(),
                "constraints": space.constraints(),
            })
            .to_string()
                + "\n")
        }
    }
}

fn bench(config: &Path, seeds: &[u64], algorithms: &[Algorithm], out: &Path) -> Result<String, CliError> {
    let mut histories = Vec::new();
    for &a in algorithms {
        for &seed in seeds {
            let mut cfg = config::load_run_config(config, seed)?;
            cfg.run.algorithm = a;
            let dir = out.join(a.name()).join(format!("seed-{seed}"));
            log::info!("running {a} seed {seed} into {}", dir.display());
            histories.push(artifact::execute_run(&cfg, &dir)?);
        }
    }
    let summary = summarize(&histories).map_err(|e| CliError::Report(e.to_string()))?;
    let summary_text = report::summary_csv(&summary)?;
    let finals = report::finals_csv(&histories, &summary)?;
    for (name, text) in [("summary.csv", &summary_text), ("final.csv", &finals)] {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(finals)
}

/// Parses arguments, runs, and reports failures as a JSON line on stderr.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
