//! On-disk run artifacts.
//!
//! A run directory holds `run.json` (metadata and status), `records.jsonl`
//! (one evaluation record per line), `timings.jsonl`, `hv.csv` and
//! `selection.json`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ragtune_core::optimizer::IterationTiming;
use ragtune_core::{run_with, Algorithm, EvaluationRecord, ObjectiveSpec, RunHistory, SelectionMode, SimEvaluator};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::LoadedConfig;
use crate::report;
use crate::CliError;

pub const RUN_FILE: &str = "run.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const HV_FILE: &str = "hv.csv";
pub const SELECTION_FILE: &str = "selection.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Incomplete,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub status: Status,
    pub version: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub iterations: usize,
    pub initial: usize,
    pub config_path: String,
    pub config_sha256: String,
    pub parameters: Vec<String>,
    pub objectives: Vec<ObjectiveSpec>,
    pub records: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunMeta {
    pub fn new(cfg: &LoadedConfig) -> Self {
        let run = &cfg.run;
        Self {
            status: Status::Incomplete,
            version: env!("CARGO_PKG_VERSION").into(),
            algorithm: run.algorithm,
            seed: run.seed,
            iterations: run.iterations,
            initial: run.initial,
            config_path: cfg.path.display().to_string(),
            config_sha256: cfg.sha256.clone(),
            parameters: run.space.parameters().iter().map(|p| p.name.clone()).collect(),
            objectives: run.objectives.clone(),
            records: 0,
            error: None,
        }
    }

    pub fn objective_names(&self) -> Vec<String> {
        self.objectives.iter().map(|o| o.name.clone()).collect()
    }
}

fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| CliError::Serialize(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

fn read_json_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let reader = BufReader::new(File::open(path).map_err(|e| CliError::io(path, e))?);
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let item = serde_json::from_str(&line).map_err(|e| CliError::Records {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

pub fn write_records(path: &Path, records: &[EvaluationRecord]) -> Result<(), CliError> {
    write_json_lines(path, records)
}

pub fn read_records(path: &Path) -> Result<Vec<EvaluationRecord>, CliError> {
    read_json_lines(path)
}

pub fn write_timings(path: &Path, timings: &[IterationTiming]) -> Result<(), CliError> {
    write_json_lines(path, timings)
}

pub fn read_timings(path: &Path) -> Result<Vec<IterationTiming>, CliError> {
    read_json_lines(path)
}

pub fn write_meta(dir: &Path, meta: &RunMeta) -> Result<(), CliError> {
    let path = dir.join(RUN_FILE);
    let text = serde_json::to_string_pretty(meta).map_err(|e| CliError::Serialize(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
}

pub fn read_meta(dir: &Path) -> Result<RunMeta, CliError> {
    let path = dir.join(RUN_FILE);
    if !path.is_file() {
        return Err(CliError::NoArtifact(dir.display().to_string()));
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Records {
        path: path.display().to_string(),
        line: 1,
        message: e.to_string(),
    })
}

/// Writes a whole history into `dir`.
pub fn write_history(dir: &Path, history: &RunHistory) -> Result<(), CliError> {
    write_records(&dir.join(RECORDS_FILE), &history.records)?;
    write_timings(&dir.join(TIMINGS_FILE), &history.timings)
}

/// Reads back a complete run artifact.
pub fn read_history(dir: &Path) -> Result<(RunMeta, RunHistory), CliError> {
    let meta = read_meta(dir)?;
    let records = read_records(&dir.join(RECORDS_FILE))?;
    let timings_path = dir.join(TIMINGS_FILE);
    let timings = if timings_path.is_file() { read_timings(&timings_path)? } else { Vec::new() };
    let history = RunHistory { algorithm: meta.algorithm, seed: meta.seed, records, timings };
    Ok((meta, history))
}

/// Runs one optimization and writes its artifact into `dir`. Records are
/// appended as they complete; `run.json` stays `incomplete` unless the whole
/// run and its summaries succeed.
pub fn execute_run(cfg: &LoadedConfig, dir: &Path) -> Result<RunHistory, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut meta = RunMeta::new(cfg);
    write_meta(dir, &meta)?;
    let records_path = dir.join(RECORDS_FILE);
    match run_and_record(cfg, dir, &records_path) {
        Ok(h) => {
            meta.records = h.records.len();
            meta.status = Status::Complete;
            write_meta(dir, &meta)?;
            Ok(h)
        }
        Err(e) => {
            meta.records = read_records(&records_path).map(|r| r.len()).unwrap_or(0);
            meta.error = Some(e.to_string());
            write_meta(dir, &meta)?;
            Err(e)
        }
    }
}

fn run_and_record(cfg: &LoadedConfig, dir: &Path, records_path: &Path) -> Result<RunHistory, CliError> {
    let mut out = BufWriter::new(File::create(records_path).map_err(|e| CliError::io(records_path, e))?);
    let mut write_error: Option<CliError> = None;
    let result = run_with(&cfg.run, &mut SimEvaluator::new(&cfg.run), |record| {
        if write_error.is_some() {
            return;
        }
        let line = serde_json::to_string(record).map_err(|e| CliError::Serialize(e.to_string()));
        let written = line
            .and_then(|l| writeln!(out, "{l}").and_then(|_| out.flush()).map_err(|e| CliError::io(records_path, e)));
        if let Err(e) = written {
            write_error = Some(e);
        }
    });
    drop(out);
    if let Some(e) = write_error {
        return Err(e);
    }
    let history = result.map_err(|e| CliError::Optimizer(e.to_string()))?;
    finish(cfg, dir, &history)?;
    Ok(history)
}

fn finish(cfg: &LoadedConfig, dir: &Path, history: &RunHistory) -> Result<(), CliError> {
    write_timings(&dir.join(TIMINGS_FILE), &history.timings)?;
    report::write_hv_trace(&dir.join(HV_FILE), &history.records)?;
    let meta = RunMeta::new(cfg);
    let mut rows = report::selection_rows(&meta, &history.records, SelectionMode::PerObjectiveBest)?;
    rows.extend(report::selection_rows(&meta, &history.records, SelectionMode::Knee)?);
    let path = dir.join(SELECTION_FILE);
    let text = serde_json::to_string_pretty(&rows).map_err(|e| CliError::Serialize(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
}
