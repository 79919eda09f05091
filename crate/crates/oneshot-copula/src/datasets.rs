//! The embedded serial sacrifice dataset and CSV ingestion.
//!
//! CSV format, one row per test condition, header required:
//! `inspection_time,stress,n0,n1,n2,n12` with real-valued time/stress and
//! nonnegative integer counts. UTF-8, LF or CRLF.

use crate::data_model::{validate_dataset, CellCounts, OneShotDataset, TestCondition};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// A dataset with a display name and optional human labels for its
/// stress codes.
#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub name: String,
    pub dataset: OneShotDataset,
    pub stress_labels: Vec<(f64, String)>,
}

impl NamedDataset {
    pub fn stress_label(&self, x: f64) -> Option<&str> {
        self.stress_labels
            .iter()
            .find(|(s, _)| *s == x)
            .map(|(_, l)| l.as_str())
    }
}

const EXPECTED_HEADER: [&str; 6] = ["inspection_time", "stress", "n0", "n1", "n2", "n12"];

/// Serial sacrifice study of two disease categories in mice: a control
/// group (stress 0, 361 animals) and an irradiated group (stress 1,
/// 343 animals), inspected at 100-day intervals. Disease category (I) is
/// failure mode 1, category (II) is failure mode 2.
pub fn serial_sacrifice() -> NamedDataset {
    const CONTROL: [[u64; 4]; 7] = [
        [58, 13, 0, 1],
        [40, 23, 1, 1],
        [18, 41, 1, 3],
        [8, 25, 1, 6],
        [1, 21, 1, 16],
        [1, 11, 0, 21],
        [0, 9, 1, 39],
    ];
    const IRRADIATED: [[u64; 4]; 7] = [
        [54, 12, 1, 0],
        [36, 24, 3, 5],
        [13, 35, 1, 17],
        [0, 13, 2, 28],
        [0, 3, 1, 35],
        [0, 0, 1, 30],
        [0, 0, 1, 28],
    ];
    let mut cells = Vec::with_capacity(14);
    for (x, group) in [(0.0, &CONTROL), (1.0, &IRRADIATED)] {
        for (i, n) in group.iter().enumerate() {
            cells.push((
                TestCondition {
                    inspection_time: 100.0 * (i + 1) as f64,
                    stress: x,
                },
                CellCounts::new(n[0], n[1], n[2], n[3]),
            ));
        }
    }
    NamedDataset {
        name: "serial-sacrifice".to_string(),
        dataset: OneShotDataset::new(cells),
        stress_labels: vec![(0.0, "control".to_string()), (1.0, "irradiated".to_string())],
    }
}

/// Loads a dataset from a CSV file. Parse failures carry the 1-based line
/// number; validation violations reject the file, warnings do not.
pub fn load_csv(path: &Path) -> Result<NamedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse {
                line: 0,
                message: format!("{other:?}"),
            },
        })?;

    let headers = reader.headers().map_err(csv_error)?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != EXPECTED_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header must be '{}', found '{}'",
                EXPECTED_HEADER.join(","),
                found.join(",")
            ),
        });
    }

    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(cells.len() + 2);
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or(Error::Parse {
                line,
                message: format!("missing column {}", EXPECTED_HEADER[idx]),
            })
        };
        let real = |idx: usize| -> Result<f64> {
            field(idx)?.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("column {}: {e}", EXPECTED_HEADER[idx]),
            })
        };
        let count = |idx: usize| -> Result<u64> {
            field(idx)?.parse::<u64>().map_err(|e| Error::Parse {
                line,
                message: format!(
                    "column {}: {e} (counts must be nonnegative integers)",
                    EXPECTED_HEADER[idx]
                ),
            })
        };
        cells.push((
            TestCondition {
                inspection_time: real(0)?,
                stress: real(1)?,
            },
            CellCounts::new(count(2)?, count(3)?, count(4)?, count(5)?),
        ));
    }

    let dataset = OneShotDataset::new(cells);
    let report = validate_dataset(&dataset);
    if !report.is_valid() {
        return Err(Error::InvalidDataset(report.violations.join("; ")));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok(NamedDataset {
        name,
        dataset,
        stress_labels: Vec::new(),
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line() as usize,
        None => 0,
    };
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Renders a dataset in canonical CSV form: plain decimal numbers, LF line
/// endings. Canonical files round-trip byte-identically through
/// [`load_csv`].
pub fn to_csv_string(ds: &OneShotDataset) -> String {
    let mut out = String::new();
    out.push_str(&EXPECTED_HEADER.join(","));
    out.push('\n');
    for (cond, counts) in ds.cells() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            cond.inspection_time, cond.stress, counts.n0, counts.n1, counts.n2, counts.n12
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Writes the canonical CSV rendering to a file.
pub fn write_csv(ds: &OneShotDataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(ds))?;
    Ok(())
}
