//! CSV datasets and JSON run reports.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::absorb::{AbsorbResult, IterationRecord};
use crate::error::{Error, Result};
use crate::synth::ContaminationReport;
use crate::types::{AbsorbConfig, Dataset};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Reads a comma-separated numeric table.
///
/// `label_column` (0-based) is split off as raw strings and never parsed.
/// Errors carry 1-based line and column numbers.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: Option<usize>) -> Result<(Dataset, Option<Vec<String>>)> {
    parse_csv(open(path.as_ref())?, has_header, label_column)
}

pub fn parse_csv<R: Read>(reader: R, has_header: bool, label_column: Option<usize>) -> Result<(Dataset, Option<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(has_header).flexible(true).from_reader(reader);
    let mut values = Vec::new();
    let mut labels = label_column.map(|_| Vec::new());
    let mut width = None;
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => Error::ParseError { line: n + 1 + has_header as usize, column: 1 },
        })?;
        let line = record.position().map_or(n + 1, |p| p.line() as usize);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => return Err(Error::InconsistentWidth { line }),
            Some(_) => {}
        }
        if let Some(label) = label_column {
            if label >= record.len() {
                return Err(Error::ParseError { line, column: label + 1 });
            }
        }
        for (c, field) in record.iter().enumerate() {
            if Some(c) == label_column {
                if let Some(labels) = labels.as_mut() {
                    labels.push(field.trim().to_string());
                }
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| Error::ParseError { line, column: c + 1 })?;
            values.push(v);
        }
        n += 1;
    }
    let d = width.unwrap_or(0) - label_column.map_or(0, |_| 1);
    Ok((Dataset::from_vec(n, d, values)?, labels))
}

/// Writes one row per line using the shortest representation that parses
/// back to the same `f64`.
pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in dataset.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.write_all(b",")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: AbsorbConfig,
    pub iterations_run: usize,
    pub converged: bool,
    pub iterations: Vec<IterationRecord>,
    pub divergence_before: Option<f64>,
    pub divergence_after: Option<f64>,
    pub contamination: Option<ContaminationReport>,
    /// Snapshot CSV file names, relative to the report's directory.
    pub snapshots: Vec<String>,
}

/// Path of the snapshot file for `iteration` next to `report_path`.
pub fn snapshot_path(report_path: &Path, iteration: usize) -> PathBuf {
    let stem = report_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    report_path.with_file_name(format!("{stem}.iter{iteration:03}.csv"))
}

/// Writes the run report as JSON and, if the result carries snapshots, one
/// CSV of positions per iteration next to it.
pub fn write_run_report(
    result: &AbsorbResult,
    contamination: Option<&ContaminationReport>,
    divergences: Option<(f64, f64)>,
    path: impl AsRef<Path>,
) -> Result<RunReport> {
    let path = path.as_ref();
    let mut snapshots = Vec::with_capacity(result.snapshots.len());
    for (i, snapshot) in result.snapshots.iter().enumerate() {
        let snap_path = snapshot_path(path, i + 1);
        save_csv(snapshot, &snap_path)?;
        snapshots.push(snap_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    }
    let report = RunReport {
        config: result.config.clone(),
        iterations_run: result.iterations_run,
        converged: result.converged,
        iterations: result.trace.records.clone(),
        divergence_before: divergences.map(|d| d.0),
        divergence_after: divergences.map(|d| d.1),
        contamination: contamination.cloned(),
        snapshots,
    };
    write_json(&report, path)?;
    Ok(report)
}

pub fn read_run_report(path: impl AsRef<Path>) -> Result<RunReport> {
    Ok(serde_json::from_reader(open(path.as_ref())?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub divergence_before: f64,
    pub divergence_after: f64,
    /// `divergence_after / divergence_before`; absent when the denominator is zero.
    pub ratio: Option<f64>,
}

impl EvaluationReport {
    pub fn new(divergence_before: f64, divergence_after: f64) -> Self {
        let ratio = (divergence_before > 0.0).then(|| divergence_after / divergence_before);
        EvaluationReport { divergence_before, divergence_after, ratio }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_evaluation_report(path: impl AsRef<Path>) -> Result<EvaluationReport> {
    Ok(serde_json::from_reader(open(path.as_ref())?)?)
}

pub fn save_mask(mask: &[bool], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for m in mask {
        writeln!(out, "{}", u8::from(*m))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Vec<bool>> {
    let mut text = String::new();
    open(path.as_ref())?.read_to_string(&mut text)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" | "false" => Ok(false),
            "1" | "true" => Ok(true),
            _ => Err(Error::ParseError { line: i + 1, column: 1 }),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_matrix() {
        let (ds, labels) = parse_csv("0,1\n2,3\n".as_bytes(), false, None).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 2));
        assert_eq!(ds.values(), &[0.0, 1.0, 2.0, 3.0]);
        assert!(labels.is_none());
    }

    #[test]
    fn no_trailing_newline_and_header() {
        let (ds, _) = parse_csv("x,y\n0.5,1e3\n-2,3".as_bytes(), true, None).unwrap();
        assert_eq!(ds.values(), &[0.5, 1000.0, -2.0, 3.0]);
    }

    #[test]
    fn pendigits_row_splits_label() {
        let row = "47,100,27,81,57,37,26,0,0,23,56,53,100,90,40,98,8\n";
        let (ds, labels) = parse_csv(row.as_bytes(), false, Some(16)).unwrap();
        assert_eq!((ds.n(), ds.d()), (1, 16));
        assert_eq!(ds.row(0)[15], 98.0);
        assert_eq!(labels.unwrap(), vec!["8".to_string()]);
    }

    #[test]
    fn text_without_header_is_a_parse_error() {
        let err = parse_csv("a,b\n".as_bytes(), false, None).unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 1, column: 1 }), "{err:?}");
        let err = parse_csv("1,2\n3,x\n".as_bytes(), false, None).unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 2, column: 2 }), "{err:?}");
    }

    #[test]
    fn ragged_rows() {
        let err = parse_csv("1,2\n3\n".as_bytes(), false, None).unwrap_err();
        assert!(matches!(err, Error::InconsistentWidth { line: 2 }), "{err:?}");
    }

    #[test]
    fn missing_file() {
        let err = load_csv("/definitely/not/here.csv", false, None).unwrap_err();
        assert!(matches!(err, Error::FileNotFound(_)));
    }

    #[test]
    fn empty_input_is_refused() {
        assert!(matches!(parse_csv("".as_bytes(), false, None), Err(Error::EmptyDataset)));
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mask.csv");
        let mask = vec![true, false, false, true];
        save_mask(&mask, &p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), mask);
    }
}
