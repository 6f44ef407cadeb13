//! Output files. Every CSV row and JSON document carries `format_version`.
//! Floats are written in shortest round-trip form, so equal values give
//! equal bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, Output};
use crate::sim::{CurvePoint, DeviationRow, ExperimentRecord, Replication, FORMAT_VERSION};

pub type IoResult<T> = std::result::Result<T, IoError>;

#[derive(Debug)]
pub struct IoError {
    pub path: PathBuf,
    pub message: String,
}

impl std::fmt::Display for IoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

impl std::error::Error for IoError {}

fn err(path: &Path, e: impl ToString) -> IoError {
    IoError { path: path.to_path_buf(), message: e.to_string() }
}

/// Files written under one output directory with a common stem.
pub struct Writer<'a> {
    pub output: &'a Output,
    pub stem: String,
    pub written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    pub fn new(output: &'a Output, stem: impl Into<String>) -> IoResult<Self> {
        fs::create_dir_all(&output.directory).map_err(|e| err(&output.directory, e))?;
        Ok(Writer { output, stem: stem.into(), written: Vec::new() })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.output.directory.join(format!("{}.{suffix}", self.stem))
    }

    pub fn csv<T: Serialize>(&mut self, suffix: &str, rows: &[T]) -> IoResult<()> {
        if !self.output.wants(Format::Csv) {
            return Ok(());
        }
        let path = self.path(suffix);
        let mut w = csv::Writer::from_path(&path).map_err(|e| err(&path, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| err(&path, e))?;
        }
        w.flush().map_err(|e| err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Rows are expected to carry their own `format_version`.
    pub fn jsonl<T: Serialize>(&mut self, suffix: &str, rows: &[T]) -> IoResult<()> {
        if !self.output.wants(Format::JsonLines) {
            return Ok(());
        }
        let path = self.path(suffix);
        let mut w = BufWriter::new(File::create(&path).map_err(|e| err(&path, e))?);
        for r in rows {
            serde_json::to_writer(&mut w, r).map_err(|e| err(&path, e))?;
            w.write_all(b"\n").map_err(|e| err(&path, e))?;
        }
        w.flush().map_err(|e| err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn summary<T: Serialize>(&mut self, value: &T) -> IoResult<()> {
        if !self.output.wants(Format::Summary) {
            return Ok(());
        }
        let path = self.path("summary.json");
        let mut text = serde_json::to_string_pretty(&Versioned { format_version: FORMAT_VERSION, row: value })
            .map_err(|e| err(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| err(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Written regardless of the requested formats.
    pub fn raw(&mut self, suffix: &str, text: &str) -> IoResult<()> {
        let path = self.path(suffix);
        fs::write(&path, text).map_err(|e| err(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

#[derive(Serialize)]
struct Versioned<'a, T> {
    format_version: u32,
    #[serde(flatten)]
    row: &'a T,
}

/// Columns of `records.csv`.
#[derive(Serialize)]
pub struct RecordRow<'a> {
    pub format_version: u32,
    pub n: usize,
    pub replication: usize,
    pub chosen: usize,
    pub label: &'a str,
    pub sup_stat: f64,
    pub minimizer_count: usize,
    pub loss: f64,
    pub location_error: Option<f64>,
}

impl<'a> RecordRow<'a> {
    pub fn new(n: usize, r: &'a Replication) -> Self {
        RecordRow {
            format_version: FORMAT_VERSION,
            n,
            replication: r.replication,
            chosen: r.chosen,
            label: &r.label,
            sup_stat: r.sup_stat,
            minimizer_count: r.minimizer_count,
            loss: r.loss,
            location_error: r.location_error,
        }
    }
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    format_version: u32,
    n: usize,
    #[serde(flatten)]
    row: &'a Replication,
}

#[derive(Serialize)]
struct CurveRow {
    format_version: u32,
    n: usize,
    median_loss: f64,
    mean_loss: f64,
    replications: usize,
}

#[derive(Serialize)]
struct DeviationCsv {
    format_version: u32,
    xi: f64,
    bound: f64,
    frequency: f64,
    target: f64,
    tolerance: f64,
    pass: bool,
}

/// Writes the record files of one or more runs of a scenario (several for a
/// rate curve).
pub fn write_experiment(
    w: &mut Writer<'_>,
    records: &[ExperimentRecord],
    curve: Option<&[CurvePoint]>,
    deviation: Option<&[DeviationRow]>,
    summary: &impl Serialize,
) -> IoResult<()> {
    let rows: Vec<RecordRow> =
        records.iter().flat_map(|rec| rec.rows.iter().map(move |r| RecordRow::new(rec.scenario.n, r))).collect();
    w.csv("records.csv", &rows)?;
    let json: Vec<JsonRecord> =
        records.iter().flat_map(|rec| rec.rows.iter().map(move |r| JsonRecord { format_version: FORMAT_VERSION, n: rec.scenario.n, row: r })).collect();
    w.jsonl("records.jsonl", &json)?;
    if let Some(points) = curve {
        let rows: Vec<CurveRow> = points
            .iter()
            .map(|p| CurveRow {
                format_version: FORMAT_VERSION,
                n: p.n,
                median_loss: p.median_loss,
                mean_loss: p.mean_loss,
                replications: p.replications,
            })
            .collect();
        w.csv("curve.csv", &rows)?;
    }
    if let Some(table) = deviation {
        let rows: Vec<DeviationCsv> = table
            .iter()
            .map(|d| DeviationCsv {
                format_version: FORMAT_VERSION,
                xi: d.xi,
                bound: d.bound,
                frequency: d.frequency,
                target: d.target,
                tolerance: d.tolerance,
                pass: d.pass,
            })
            .collect();
        w.csv("deviation.csv", &rows)?;
    }
    w.summary(summary)?;
    if w.output.timings {
        let mut text = String::from("n,replication,runtime_ms\n");
        for rec in records {
            for (r, ms) in rec.runtimes_ms.iter().enumerate() {
                text.push_str(&format!("{},{r},{ms}\n", rec.scenario.n));
            }
        }
        w.raw("timings.csv", &text)?;
    }
    Ok(())
}
