//! CSV and JSON artifacts.
//!
//! Long-format trajectory CSV, one row per time × direction × statistic:
//!
//! ```text
//! experiment_id,t,direction,statistic,value
//! ```
//!
//! `statistic` is one of `mean`, `std`, `theory`, `abs_err`; directions are
//! numbered from 1 in descending order of the cosines. `std` rows are only
//! written for two or more trials. Raw per-trial data goes to a separate file
//! with columns `experiment_id,trial,t,direction,cosine`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::compare::TheoryCurves;
use super::experiment::TrajectoryRecord;
use crate::error::{Error, Result};

/// First 12 hex digits of the SHA-256 of the canonical JSON of `value`.
pub fn experiment_id(value: &impl Serialize) -> Result<String> {
    let json = serde_json::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
    let digest = Sha256::digest(json.as_bytes());
    Ok(digest.iter().take(6).map(|b| format!("{b:02x}")).collect())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Write a CSV with `header` and string rows.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["experiment_id", "t", "direction", "statistic", "value"];

/// Long-format rows for an empirical record, optionally against a prediction
/// on the same grid.
pub fn trajectory_rows(id: &str, record: &TrajectoryRecord, theory: Option<&TheoryCurves>) -> Vec<[String; 5]> {
    let mut rows = Vec::new();
    for (ti, &t) in record.times.iter().enumerate() {
        for l in 0..record.d {
            let mut push = |stat: &str, v: f64| rows.push([id.to_string(), t.to_string(), (l + 1).to_string(), stat.to_string(), v.to_string()]);
            let mean = record.mean[ti][l];
            push("mean", mean);
            if record.n_trials() > 1 {
                push("std", record.std[ti][l]);
            }
            if let Some(th) = theory {
                let v = th.cosines[ti][l];
                push("theory", v);
                push("abs_err", (mean - v).abs());
            }
        }
    }
    rows
}

/// Long-format `theory` rows.
pub fn theory_rows(id: &str, curves: &TheoryCurves) -> Vec<[String; 5]> {
    let mut rows = Vec::new();
    for (t, cos) in curves.times.iter().zip(&curves.cosines) {
        for (l, c) in cos.iter().enumerate() {
            rows.push([id.to_string(), t.to_string(), (l + 1).to_string(), "theory".into(), c.to_string()]);
        }
    }
    rows
}

pub fn write_trajectory_csv(path: &Path, id: &str, record: &TrajectoryRecord, theory: Option<&TheoryCurves>) -> Result<()> {
    write_table(path, &TRAJECTORY_HEADER, trajectory_rows(id, record, theory))
}

pub fn write_theory_csv(path: &Path, id: &str, curves: &TheoryCurves) -> Result<()> {
    write_table(path, &TRAJECTORY_HEADER, theory_rows(id, curves))
}

pub fn write_raw_csv(path: &Path, id: &str, record: &TrajectoryRecord) -> Result<()> {
    let mut rows = Vec::new();
    for (trial, tr) in record.cosines.iter().enumerate() {
        for (t, row) in record.times.iter().zip(tr) {
            for (l, c) in row.iter().enumerate() {
                rows.push([id.to_string(), trial.to_string(), t.to_string(), (l + 1).to_string(), c.to_string()]);
            }
        }
    }
    write_table(path, &["experiment_id", "trial", "t", "direction", "cosine"], rows)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Config(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
