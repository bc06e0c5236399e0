//! CSV formats: datasets (`f0,f1,...[,label]`), label files, training
//! logs, and the analysis exports. Comma-separated, LF line endings,
//! floats printed shortest-roundtrip so reload is exact.

use std::fmt::Write as _;
use std::path::Path;

use bcdm_core::analysis::{AgreementMatrix, GridRaster, Histogram};
use bcdm_core::data::{LabeledDataset, UnlabeledDataset};
use bcdm_core::matrix::Matrix;
use bcdm_core::theory::BoundReport;
use bcdm_core::trainer::TrainLog;

use crate::error::{CliError, Result};

/// A dataset file with or without a trailing `label` column.
pub enum LoadedDataset {
    Labeled(LabeledDataset),
    Unlabeled(UnlabeledDataset),
}

pub fn write_labeled(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let mut out = String::new();
    for i in 0..ds.dim() {
        let _ = write!(out, "f{i},");
    }
    out.push_str("label\n");
    for r in 0..ds.len() {
        for v in ds.features().row(r) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", ds.labels()[r]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_unlabeled(path: &Path, ds: &UnlabeledDataset) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..ds.dim()).map(|i| format!("f{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..ds.len() {
        let row: Vec<String> = ds.features().row(r).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::from("label\n");
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// Loads a dataset file; a trailing `label` header column marks it labeled.
pub fn read_dataset(path: &Path) -> Result<LoadedDataset> {
    let lines = read_lines(path)?;
    if lines.is_empty() {
        return Err(CliError::Data(format!("{}: empty file", path.display())));
    }
    let header: Vec<&str> = lines[0].split(',').collect();
    let labeled = header.last() == Some(&"label");
    let n_fields = header.len();
    let n_features = if labeled { n_fields - 1 } else { n_fields };
    if n_features == 0 {
        return Err(CliError::Data(format!(
            "{}: line 1: no feature columns",
            path.display()
        )));
    }
    let mut features: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let lineno = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_fields {
            return Err(CliError::Data(format!(
                "{}: line {lineno}: expected {n_fields} fields, found {}",
                path.display(),
                cells.len()
            )));
        }
        for cell in &cells[..n_features] {
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {lineno}: non-numeric cell {cell:?}",
                    path.display()
                ))
            })?;
            features.push(v);
        }
        if labeled {
            let l: usize = cells[n_fields - 1].trim().parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {lineno}: non-integer label {:?}",
                    path.display(),
                    cells[n_fields - 1]
                ))
            })?;
            labels.push(l);
        }
    }
    if features.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let rows = features.len() / n_features;
    let m = Matrix::from_vec(rows, n_features, features)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if labeled {
        Ok(LoadedDataset::Labeled(
            LabeledDataset::new(m, labels).map_err(CliError::from)?,
        ))
    } else {
        Ok(LoadedDataset::Unlabeled(UnlabeledDataset::new(m)))
    }
}

pub fn read_labeled(path: &Path) -> Result<LabeledDataset> {
    match read_dataset(path)? {
        LoadedDataset::Labeled(ds) => Ok(ds),
        LoadedDataset::Unlabeled(_) => Err(CliError::Data(format!(
            "{}: expected a `label` column",
            path.display()
        ))),
    }
}

pub fn read_features(path: &Path) -> Result<UnlabeledDataset> {
    match read_dataset(path)? {
        LoadedDataset::Labeled(ds) => Ok(ds.unlabeled()),
        LoadedDataset::Unlabeled(ds) => Ok(ds),
    }
}

/// Label-only file: header `label`, one class index per line.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let lines = read_lines(path)?;
    if lines.first().map(String::as_str) != Some("label") {
        return Err(CliError::Data(format!(
            "{}: line 1: expected header `label`",
            path.display()
        )));
    }
    let mut labels = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let l: usize = line.trim().parse().map_err(|_| {
            CliError::Data(format!(
                "{}: line {}: non-integer label {line:?}",
                path.display(),
                idx + 1
            ))
        })?;
        labels.push(l);
    }
    Ok(labels)
}

pub fn write_trainlog(path: &Path, log: &TrainLog) -> Result<()> {
    let mut out = String::from("iter,src_loss,disc_loss,entropy,target_err\n");
    for r in &log.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration, r.source_loss, r.discrepancy, r.entropy, r.target_error
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_histogram(path: &Path, h: &Histogram) -> Result<()> {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{c}", h.bin_edges[i], h.bin_edges[i + 1]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_agreement(path: &Path, a: &AgreementMatrix) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..a.k()).map(|n| format!("c2_{n}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for m in 0..a.k() {
        let row: Vec<String> = (0..a.k()).map(|n| a.get(m, n).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_spectrum(path: &Path, sv: &[f64]) -> Result<()> {
    let mut out = String::from("index,value\n");
    for (i, v) in sv.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_a_distance(path: &Path, value: f64) -> Result<()> {
    std::fs::write(path, format!("a_distance\n{value}\n"))?;
    Ok(())
}

pub fn write_bound(path: &Path, report: &BoundReport) -> Result<()> {
    let mut out = String::from("term,value,raw_value\n");
    for (term, value, raw) in report.rows() {
        let _ = writeln!(out, "{term},{value},{raw}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Sidecar CSV for a raster: one line per grid row (image order), cells
/// comma-separated.
pub fn write_raster_csv(path: &Path, raster: &GridRaster) -> Result<()> {
    let (rx, _) = raster.spec.resolution;
    let mut out = String::new();
    for chunk in raster.labels.chunks(rx) {
        let row: Vec<String> = chunk.iter().map(usize::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
