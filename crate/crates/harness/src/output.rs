//! CSV and JSON artifacts. Every CSV starts with a `#` comment line naming
//! the schema and its version, followed by a header row; readers should key
//! off column names. Floats carry 17 significant digits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use pgd_vhl::signal_model::snr_db;
use pgd_vhl::SolverTrace;

use crate::experiments::CellResult;

pub const SCHEMA_VERSION: u32 = 1;

pub const CELL_COLUMNS: [&str; 13] = [
    "kind",
    "n",
    "s",
    "r",
    "sigma_e",
    "snr_db",
    "trials",
    "successes",
    "success_rate",
    "mean_rel_err",
    "median_rel_err",
    "mean_iterations",
    "mean_millis",
];

pub const TRACE_COLUMNS: [&str; 7] = [
    "iteration",
    "f",
    "residual",
    "step",
    "dist",
    "rel_err",
    "millis",
];

/// Wall-clock columns, excluded from reproducibility comparisons.
pub const TIMING_COLUMNS: [&str; 2] = ["mean_millis", "millis"];

/// 17 significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// A CSV file written row by row and flushed after each row, so an
/// interrupted sweep leaves every finished cell on disk.
pub struct CsvSink {
    writer: csv::Writer<File>,
}

impl CsvSink {
    pub fn create(path: &Path, schema: &str, columns: &[&str]) -> Result<Self> {
        let mut file =
            File::create(path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(file, "# pgd-vhl {schema} v{SCHEMA_VERSION}")?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(columns)?;
        writer.flush()?;
        Ok(CsvSink { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        self.writer.flush()?;
        Ok(())
    }
}

pub fn cell_row(kind: &str, c: &CellResult) -> Vec<String> {
    vec![
        kind.to_string(),
        c.cell.n.to_string(),
        c.cell.s.to_string(),
        c.cell.r.to_string(),
        fmt_float(c.cell.sigma),
        fmt_float(snr_db(c.cell.sigma)),
        c.trials.to_string(),
        c.successes.to_string(),
        fmt_float(c.success_rate()),
        fmt_float(c.mean_rel_err),
        fmt_float(c.median_rel_err),
        fmt_float(c.mean_iterations),
        fmt_float(c.mean_millis),
    ]
}

pub fn write_trace(path: &Path, trace: &SolverTrace) -> Result<()> {
    let mut sink = CsvSink::create(path, "trace", &TRACE_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    for r in &trace.records {
        sink.row(&[
            r.iteration.to_string(),
            fmt_float(r.objective),
            fmt_float(r.residual),
            fmt_float(r.step),
            opt(r.dist),
            opt(r.rel_err),
            fmt_float(r.millis),
        ])?;
    }
    Ok(())
}

/// Reads one of our CSVs back as (header, rows), skipping the comment line.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header = reader.headers()?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

/// The file with wall-clock columns removed, for reproducibility checks.
pub fn numeric_fingerprint(path: &Path) -> Result<String> {
    let (header, rows) = read_csv(path)?;
    let keep: Vec<usize> = (0..header.len())
        .filter(|&i| !TIMING_COLUMNS.contains(&header[i].as_str()))
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(rows.iter()) {
        let fields: Vec<&str> = keep.iter().map(|&i| row[i].as_str()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}
