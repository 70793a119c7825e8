//! Plot-ready tables derived from run artifacts.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use ragtune_core::optimizer::{select_from_front, SummaryRow};
use ragtune_core::pareto::{pareto_set, ReferencePoint};
use ragtune_core::{EvaluationRecord, ObjectiveValues, ObjectiveVector, ParamValue, RunHistory, SelectionMode};
use serde::{Deserialize, Serialize};

use crate::artifact::{read_history, RunMeta};
use crate::CliError;

pub const REPORT_DIR: &str = "report";
pub const SELECTION_TABLE: &str = "selection.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub label: String,
    pub iteration: usize,
    pub config: Vec<(String, ParamValue)>,
    /// Test-split values in reporting units.
    pub objectives: ObjectiveValues,
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Serialize(e.to_string())
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Serialize(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn param_text(v: &ParamValue) -> String {
    match v {
        ParamValue::Int(i) => i.to_string(),
        ParamValue::Real(x) => x.to_string(),
        ParamValue::Label(s) => s.clone(),
    }
}

pub fn hv_trace_csv(records: &[EvaluationRecord]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "train_hv", "test_hv"]).map_err(csv_err)?;
    for r in records {
        w.write_record([r.iteration.to_string(), r.train_hv.to_string(), r.test_hv.to_string()]).map_err(csv_err)?;
    }
    into_string(w)
}

pub fn write_hv_trace(path: &Path, records: &[EvaluationRecord]) -> Result<(), CliError> {
    write_text(path, &hv_trace_csv(records)?)
}

fn canonical_test(meta: &RunMeta, r: &EvaluationRecord) -> ObjectiveVector {
    ObjectiveVector(meta.objectives.iter().map(|o| o.orient(r.test.get(&o.name).unwrap_or(f64::NAN))).collect())
}

fn reference(meta: &RunMeta) -> ReferencePoint {
    ReferencePoint(meta.objectives.iter().map(|o| o.orient(o.reference)).collect())
}

/// Indices of records on the test Pareto set over the given objectives.
fn front_indices(
    meta: &RunMeta,
    records: &[EvaluationRecord],
    objectives: &[usize],
) -> Result<BTreeSet<usize>, CliError> {
    let full: Vec<(usize, ObjectiveVector)> =
        records.iter().enumerate().map(|(i, r)| (i, canonical_test(meta, r))).collect();
    let projected: Vec<(usize, ObjectiveVector)> =
        full.iter().map(|(i, f)| (*i, ObjectiveVector(objectives.iter().map(|&j| f.0[j]).collect()))).collect();
    let reference = ReferencePoint(objectives.iter().map(|&j| reference(meta).0[j]).collect());
    let front = pareto_set(&projected, reference).map_err(|e| CliError::Report(e.to_string()))?;
    Ok(front.members().iter().map(|(i, _)| *i).collect())
}

/// Selections from the test Pareto set, in reporting units.
pub fn selection_rows(
    meta: &RunMeta,
    records: &[EvaluationRecord],
    mode: SelectionMode,
) -> Result<Vec<SelectionRow>, CliError> {
    let all: Vec<usize> = (0..meta.objectives.len()).collect();
    let front: Vec<(usize, ObjectiveVector)> =
        front_indices(meta, records, &all)?.into_iter().map(|i| (i, canonical_test(meta, &records[i]))).collect();
    let picks =
        select_from_front(&front, &meta.objective_names(), mode).map_err(|e| CliError::Report(e.to_string()))?;
    Ok(picks
        .into_iter()
        .map(|s| {
            let r = &records[s.item];
            SelectionRow {
                label: s.label,
                iteration: r.iteration,
                config: meta.parameters.iter().cloned().zip(r.config.values().iter().cloned()).collect(),
                objectives: r.test,
            }
        })
        .collect())
}

/// One row per selection: label, iteration, parameter values, then all
/// objectives in reporting units.
pub fn selection_csv(meta: &RunMeta, rows: &[SelectionRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["selected_for".to_string(), "iteration".to_string()];
    header.extend(meta.parameters.iter().cloned());
    header.extend(ObjectiveValues::NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut fields = vec![row.label.clone(), row.iteration.to_string()];
        fields.extend(row.config.iter().map(|(_, v)| param_text(v)));
        fields.extend(ObjectiveValues::NAMES.iter().map(|n| row.objectives.get(n).unwrap_or(f64::NAN).to_string()));
        w.write_record(&fields).map_err(csv_err)?;
    }
    into_string(w)
}

/// Every test result projected onto two objectives, flagged by membership
/// of the full and the two-objective Pareto sets.
pub fn projection_csv(meta: &RunMeta, records: &[EvaluationRecord], a: usize, b: usize) -> Result<String, CliError> {
    let all: Vec<usize> = (0..meta.objectives.len()).collect();
    let full = front_indices(meta, records, &all)?;
    let pair = front_indices(meta, records, &[a, b])?;
    let (na, nb) = (&meta.objectives[a].name, &meta.objectives[b].name);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", na.as_str(), nb.as_str(), "pareto", "pareto_2d"]).map_err(csv_err)?;
    for (i, r) in records.iter().enumerate() {
        let get = |n: &str| r.test.get(n).unwrap_or(f64::NAN).to_string();
        w.write_record([
            r.iteration.to_string(),
            get(na),
            get(nb),
            full.contains(&i).to_string(),
            pair.contains(&i).to_string(),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

/// Writes projections and the selection table under `dir/report` and
/// returns the selection table.
pub fn write_report(dir: &Path) -> Result<String, CliError> {
    let (meta, history) = read_history(dir)?;
    if history.records.is_empty() {
        return Err(CliError::Report(format!("{} has no records", dir.display())));
    }
    let out = dir.join(REPORT_DIR);
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let k = meta.objectives.len();
    for a in 0..k {
        for b in a + 1..k {
            let name = format!("front_{}_{}.csv", meta.objectives[a].name, meta.objectives[b].name);
            write_text(&out.join(name), &projection_csv(&meta, &history.records, a, b)?)?;
        }
    }
    let mut rows = selection_rows(&meta, &history.records, SelectionMode::PerObjectiveBest)?;
    rows.extend(selection_rows(&meta, &history.records, SelectionMode::Knee)?);
    let table = selection_csv(&meta, &rows)?;
    write_text(&out.join(SELECTION_TABLE), &table)?;
    write_hv_trace(&out.join("hv.csv"), &history.records)?;
    Ok(table)
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "iteration",
        "runs",
        "train_q1",
        "train_median",
        "train_q3",
        "test_q1",
        "test_median",
        "test_q3",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.algorithm.to_string(),
            r.iteration.to_string(),
            r.runs.to_string(),
            r.train.q1.to_string(),
            r.train.median.to_string(),
            r.train.q3.to_string(),
            r.test.q1.to_string(),
            r.test.median.to_string(),
            r.test.q3.to_string(),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

/// Final train and test hypervolume of every run, then one `median` row
/// per algorithm.
pub fn finals_csv(histories: &[RunHistory], summary: &[SummaryRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algorithm", "seed", "train_hv", "test_hv"]).map_err(csv_err)?;
    for h in histories {
        let Some(last) = h.records.last() else { continue };
        w.write_record([
            h.algorithm.to_string(),
            h.seed.to_string(),
            last.train_hv.to_string(),
            last.test_hv.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let last_iteration = summary.iter().map(|r| r.iteration).max().unwrap_or(0);
    for r in summary.iter().filter(|r| r.iteration == last_iteration) {
        w.write_record([
            r.algorithm.to_string(),
            "median".into(),
            r.train.median.to_string(),
            r.test.median.to_string(),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}
