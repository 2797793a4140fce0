use std::path::Path;

use serde::Serialize;

use super::RunRecord;
use crate::error::{Error, Result};
use crate::numerics::{BigFloat, Real};

/// Largest difference seen in one column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnDiff {
    pub column: String,
    pub max_abs: f64,
    /// `|a − b| / max(|a|, |b|)`.
    pub max_rel: f64,
    /// Non-numeric cells that differ.
    pub text_mismatches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileDiff {
    pub file: String,
    pub rows_a: usize,
    pub rows_b: usize,
    /// Only columns with a nonzero difference.
    pub columns: Vec<ColumnDiff>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiffReport {
    pub kind: String,
    pub files: Vec<FileDiff>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.files.iter().all(|f| f.columns.is_empty() && f.rows_a == f.rows_b)
    }

    /// Worst relative difference over every shared numeric column.
    pub fn max_rel(&self) -> f64 {
        self.files
            .iter()
            .flat_map(|f| f.columns.iter().map(|c| c.max_rel))
            .fold(0.0, f64::max)
    }
}

const CMP_BITS: u32 = 512;

fn read(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

fn diff_file(name: &str, a: &Path, b: &Path) -> Result<FileDiff> {
    let (ha, ra) = read(a)?;
    let (hb, rb) = read(b)?;
    let mut columns = Vec::new();
    for (ia, col) in ha.iter().enumerate() {
        let Some(ib) = hb.iter().position(|h| h == col) else { continue };
        let mut d = ColumnDiff { column: col.clone(), max_abs: 0.0, max_rel: 0.0, text_mismatches: 0 };
        for (x, y) in ra.iter().zip(&rb) {
            let (x, y) = (&x[ia], &y[ib]);
            if x == y {
                continue;
            }
            match (BigFloat::parse(&CMP_BITS, x), BigFloat::parse(&CMP_BITS, y)) {
                (Ok(p), Ok(q)) => {
                    let abs = (p.clone() - &q).abs();
                    let scale = p.abs().max_of(q.abs());
                    d.max_abs = d.max_abs.max(abs.to_f64());
                    if !scale.is_zero() {
                        d.max_rel = d.max_rel.max((abs / &scale).to_f64());
                    }
                }
                _ => d.text_mismatches += 1,
            }
        }
        if d.max_abs > 0.0 || d.text_mismatches > 0 {
            columns.push(d);
        }
    }
    Ok(FileDiff { file: name.to_string(), rows_a: ra.len(), rows_b: rb.len(), columns })
}

/// Column-wise differences between the CSV tables of two runs of the same experiment kind.
pub fn compare_runs(a: &Path, b: &Path) -> Result<DiffReport> {
    let ra = RunRecord::load(a)?;
    let rb = RunRecord::load(b)?;
    if ra.config.kind != rb.config.kind {
        return Err(Error::IncompatibleRuns(format!(
            "{} run vs {} run",
            ra.config.kind.name(),
            rb.config.kind.name()
        )));
    }
    let dir = |p: &Path| if p.is_dir() { p.to_path_buf() } else { p.parent().unwrap_or(Path::new(".")).to_path_buf() };
    let (da, db) = (dir(a), dir(b));
    let mut files = Vec::new();
    for name in ra.files.iter().filter(|f| f.ends_with(".csv") && rb.files.contains(f)) {
        files.push(diff_file(name, &da.join(name), &db.join(name))?);
    }
    Ok(DiffReport { kind: ra.config.kind.name().to_string(), files })
}
