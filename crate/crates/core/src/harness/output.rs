//! File formats emitted by the experiment drivers.
//!
//! Per-run metrics CSV, one row per (run, epoch):
//! `run_id,schedule,sparsity_target,alpha,beta,seed,epoch,step,lr,target_sparsity,actual_sparsity,train_loss,eval_accuracy`.
//! `alpha` and `beta` are empty for schedules other than one-cycle. Floats
//! use Rust's shortest round-trip formatting, so identical runs produce
//! identical bytes.
//!
//! Aggregate JSON: an array of
//! `{schedule, sparsity, mean_acc, std_acc, n_seeds, relative_budget?}`
//! objects, accuracies in percent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiments::{AggregateCell, BudgetRow, RunOutcome};
use crate::error::{Error, Result};
use crate::schedule::ScheduleKind;

pub const METRICS_COLUMNS: [&str; 13] = [
    "run_id",
    "schedule",
    "sparsity_target",
    "alpha",
    "beta",
    "seed",
    "epoch",
    "step",
    "lr",
    "target_sparsity",
    "actual_sparsity",
    "train_loss",
    "eval_accuracy",
];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes metrics rows for every completed run. Diverged runs contribute no
/// rows.
pub fn write_metrics_csv<W: Write>(out: W, runs: &[RunOutcome]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for run in runs {
        let Ok(result) = &run.result else { continue };
        let spec = &run.schedule;
        let (alpha, beta) = if spec.kind == ScheduleKind::OneCycle {
            (spec.alpha.to_string(), spec.beta.to_string())
        } else {
            (String::new(), String::new())
        };
        for r in &result.records {
            w.write_record([
                run.run_id.clone(),
                spec.kind.to_string(),
                spec.s_f.to_string(),
                alpha.clone(),
                beta.clone(),
                run.seed.to_string(),
                r.epoch.to_string(),
                r.step.to_string(),
                r.lr.to_string(),
                r.target_sparsity.to_string(),
                r.actual_sparsity.to_string(),
                r.train_loss.to_string(),
                r.eval_accuracy.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_metrics_csv(path: &Path, runs: &[RunOutcome]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_csv(BufWriter::new(file), runs).map_err(|e| csv_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateJson {
    pub schedule: String,
    pub sparsity: f64,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub n_seeds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_budget: Option<f64>,
}

impl From<&AggregateCell> for AggregateJson {
    fn from(c: &AggregateCell) -> Self {
        AggregateJson {
            schedule: c.schedule.clone(),
            sparsity: c.sparsity,
            mean_acc: c.mean_acc,
            std_acc: c.std_acc,
            n_seeds: c.n_seeds,
            relative_budget: None,
        }
    }
}

impl From<&BudgetRow> for AggregateJson {
    fn from(row: &BudgetRow) -> Self {
        AggregateJson {
            relative_budget: row.relative_budget,
            ..AggregateJson::from(&row.cell)
        }
    }
}

/// Pretty-printed JSON array. Cells without completed seeds carry NaN
/// statistics, which JSON cannot represent; those are written as `null`.
pub fn aggregate_json(cells: &[AggregateJson]) -> String {
    let values: Vec<serde_json::Value> = cells
        .iter()
        .map(|c| serde_json::to_value(c).expect("aggregate serializes"))
        .collect();
    serde_json::to_string_pretty(&values).expect("aggregate serializes")
}

pub fn save_aggregate_json(path: &Path, cells: &[AggregateJson]) -> Result<()> {
    std::fs::write(path, aggregate_json(cells)).map_err(|e| Error::io(path, e))
}
