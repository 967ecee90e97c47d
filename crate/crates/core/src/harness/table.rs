use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Algorithm;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "axis,algorithm,value,nmse_db,success_rate,row_accuracy,trials,failures";

/// Aggregate of the trials for one `(axis value, algorithm)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub algorithm: Algorithm,
    pub value: f64,
    /// Mean NMSE in dB over the trials that did not fail.
    pub nmse_db: f64,
    pub success_rate: f64,
    pub row_accuracy: f64,
    pub trials: usize,
    pub failures: usize,
}

pub fn to_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").expect("writing to a String");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(std::str::from_utf8(&body).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(out)
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(rows)?)?;
    Ok(())
}

/// Parses a table written by [`write_csv`]. The header must match exactly.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(|e: csv::Error| Error::Parse(e.to_string()))).collect()
}

/// Writes one whitespace-separated `.dat` file per `(axis, algorithm)` curve
/// into `dir`, rows sorted by axis value. Returns the paths in curve order.
pub fn emit_plot_data(rows: &[SweepRow], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut curves: Vec<(&str, Algorithm)> = rows.iter().map(|r| (r.axis.as_str(), r.algorithm)).collect();
    curves.sort_unstable();
    curves.dedup();

    let mut paths = Vec::with_capacity(curves.len());
    for (axis, algorithm) in curves {
        let mut points: Vec<&SweepRow> =
            rows.iter().filter(|r| r.axis == axis && r.algorithm == algorithm).collect();
        points.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut text = format!("# {axis} nmse_db success_rate row_accuracy trials failures\n");
        for p in points {
            writeln!(
                text,
                "{} {} {} {} {} {}",
                p.value, p.nmse_db, p.success_rate, p.row_accuracy, p.trials, p.failures
            )
            .expect("writing to a String");
        }
        let file = sanitize(&format!("{axis}_{algorithm}.dat"));
        let path = dir.join(file);
        std::fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Keeps file names to a portable character set.
fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}
