//! Delimited text ingestion and structured result output.
//!
//! Two input shapes, both UTF-8 text with LF or CRLF endings:
//!
//! * points file — one record per point, first column a label token,
//!   remaining columns the feature coordinates;
//! * matrix file — first column a label token, remaining `n` columns the
//!   distances to every point in record order.
//!
//! Label tokens are opaque strings mapped to dense class ids in
//! first-appearance order. Results serialise to JSON (exact keys, stable
//! order) or TSV.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{BiasTable, LabeledDataset, MiEstimate, SweepResult};
use crate::metric::{validate_matrix, Metric};
use crate::synthesis::OracleReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Tsv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "tsv" => Ok(OutputFormat::Tsv),
            other => Err(Error::Domain(format!(
                "unknown output format '{other}' (expected json or tsv)"
            ))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Tsv => "tsv",
        })
    }
}

struct RawRecords {
    lines: Vec<u64>,
    labels: Vec<String>,
    numbers: Vec<Vec<f64>>,
}

fn read_records(path: &Path, delimiter: u8, has_header: bool) -> Result<RawRecords> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_error)?;
    let mut out = RawRecords {
        lines: Vec::new(),
        labels: Vec::new(),
        numbers: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() < 2 {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected a label plus at least one numeric column, found {} field(s)",
                    record.len()
                ),
            });
        }
        let mut numbers = Vec::with_capacity(record.len() - 1);
        for (idx, field) in record.iter().enumerate().skip(1) {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {} is not a number: '{field}'", idx + 1),
            })?;
            numbers.push(value);
        }
        out.lines.push(line);
        out.labels.push(record[0].to_string());
        out.numbers.push(numbers);
    }
    if out.labels.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "empty input".into(),
        });
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            message: format!("ragged row: {len} fields where {expected_len} were expected"),
        },
        csv::ErrorKind::Io(io) => Error::Io(io),
        _ => Error::Parse { line, message },
    }
}

/// Map label tokens to dense ids in first-appearance order, returning
/// the ids and the distinct tokens in id order.
fn map_labels(tokens: &[String]) -> (Vec<u32>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let mut map: std::collections::HashMap<String, u32> = std::collections::HashMap::new();
    let ids = tokens
        .iter()
        .map(|t| {
            *map.entry(t.clone()).or_insert_with(|| {
                names.push(t.clone());
                (names.len() - 1) as u32
            })
        })
        .collect();
    (ids, names)
}

/// Read a points file. The dataset carries vector geometry with the
/// euclidean metric; use [`LabeledDataset::set_metric`] to change it.
pub fn read_points(path: &Path, delimiter: u8, has_header: bool) -> Result<LabeledDataset> {
    let raw = read_records(path, delimiter, has_header)?;
    let (ids, names) = map_labels(&raw.labels);
    let dim = raw.numbers[0].len();
    if let Some(pos) = raw.numbers.iter().position(|row| row.len() != dim) {
        return Err(Error::Parse {
            line: raw.lines[pos],
            message: format!(
                "ragged row: {} feature(s) where {dim} were expected",
                raw.numbers[pos].len()
            ),
        });
    }
    LabeledDataset::from_points(ids, raw.numbers, Metric::Euclidean)?.with_label_names(names)
}

/// Read a distance-matrix file and validate the matrix.
pub fn read_matrix(path: &Path, delimiter: u8, has_header: bool) -> Result<LabeledDataset> {
    let raw = read_records(path, delimiter, has_header)?;
    let n = raw.labels.len();
    if let Some(pos) = raw.numbers.iter().position(|row| row.len() != n) {
        return Err(Error::Parse {
            line: raw.lines[pos],
            message: format!(
                "matrix row has {} distance(s) but the file has {n} record(s)",
                raw.numbers[pos].len()
            ),
        });
    }
    let (ids, names) = map_labels(&raw.labels);
    let matrix = validate_matrix(&raw.numbers)?;
    LabeledDataset::from_matrix(ids, matrix)?.with_label_names(names)
}

fn format_real(v: f64) -> String {
    // 17 significant digits: enough for the double to round-trip exactly.
    format!("{v:.16e}")
}

fn label_token(ds: &LabeledDataset, record: usize) -> String {
    let id = ds.labels()[record];
    match ds.label_names() {
        Some(names) => names[id as usize].clone(),
        None => id.to_string(),
    }
}

/// Serialise point geometry back to the points-file format.
pub fn points_to_string(ds: &LabeledDataset, delimiter: char) -> Result<String> {
    let points = match ds.geometry() {
        crate::estimator::Geometry::Points { points, .. } => points,
        crate::estimator::Geometry::Matrix(_) => {
            return Err(Error::Domain(
                "dataset holds a distance matrix, not point geometry".into(),
            ))
        }
    };
    let mut out = String::new();
    for (record, coords) in points.iter().enumerate() {
        out.push_str(&label_token(ds, record));
        for c in coords {
            out.push(delimiter);
            out.push_str(&format_real(*c));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Serialise the dataset's distance matrix to the matrix-file format.
pub fn matrix_to_string(ds: &LabeledDataset, delimiter: char) -> Result<String> {
    let dm = ds.distance_matrix();
    let mut out = String::new();
    for record in 0..ds.n() {
        out.push_str(&label_token(ds, record));
        for &d in dm.row(record) {
            out.push(delimiter);
            out.push_str(&format_real(d));
        }
        out.push('\n');
    }
    Ok(out)
}

/// A result ready for serialisation.
pub enum ResultDoc<'a> {
    Estimate(&'a MiEstimate),
    Sweep(&'a SweepResult),
    Bias {
        n: u64,
        n_x: u64,
        class_counts: &'a [u64],
        table: &'a BiasTable,
    },
    Report(&'a OracleReport),
}

#[derive(Serialize)]
struct SweepJson<'a> {
    #[serde(flatten)]
    selected: &'a MiEstimate,
    sweep: &'a [MiEstimate],
    selected_h: u64,
}

#[derive(Serialize)]
struct BiasJson<'a> {
    n: u64,
    n_x: u64,
    class_counts: &'a [u64],
    h: u64,
    ib_bits: f64,
    p_r: &'a [f64],
}

fn tsv_estimate_header() -> &'static str {
    "n\tn_x\th\ti0_bits\tib_bits\tie_bits"
}

fn tsv_estimate_row(est: &MiEstimate) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        est.n, est.n_x, est.h, est.i0_bits, est.ib_bits, est.ie_bits
    )
}

/// Render a result document. JSON emits the exact documented keys in a
/// stable order; TSV emits a header line plus one row per estimate.
pub fn write_result(doc: &ResultDoc, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let body = match doc {
                ResultDoc::Estimate(est) => serde_json::to_string(est),
                ResultDoc::Sweep(sweep) => serde_json::to_string(&SweepJson {
                    selected: sweep.selected_estimate(),
                    sweep: &sweep.estimates,
                    selected_h: sweep.selected_estimate().h,
                }),
                ResultDoc::Bias {
                    n,
                    n_x,
                    class_counts,
                    table,
                } => serde_json::to_string(&BiasJson {
                    n: *n,
                    n_x: *n_x,
                    class_counts,
                    h: table.h as u64,
                    ib_bits: table.i_b,
                    p_r: &table.p_r,
                }),
                ResultDoc::Report(report) => serde_json::to_string(report),
            };
            let mut text = body.expect("result types serialise infallibly");
            text.push('\n');
            text
        }
        OutputFormat::Tsv => match doc {
            ResultDoc::Estimate(est) => {
                format!("{}\n{}\n", tsv_estimate_header(), tsv_estimate_row(est))
            }
            ResultDoc::Sweep(sweep) => {
                let mut out = format!("{}\tselected\n", tsv_estimate_header());
                for (idx, est) in sweep.estimates.iter().enumerate() {
                    let mark = if idx == sweep.selected { 1 } else { 0 };
                    out.push_str(&format!("{}\t{mark}\n", tsv_estimate_row(est)));
                }
                out
            }
            ResultDoc::Bias {
                n,
                n_x,
                table,
                ..
            } => {
                format!(
                    "n\tn_x\th\tib_bits\n{}\t{}\t{}\t{}\n",
                    n, n_x, table.h, table.i_b
                )
            }
            ResultDoc::Report(report) => {
                format!(
                    "replicates\tmean_i0_bits\tmean_ie_bits\tstderr_i0_bits\ttv_distance\n{}\t{}\t{}\t{}\t{}\n",
                    report.replicates,
                    report.mean_i0,
                    report.mean_ie,
                    report.stderr_i0,
                    report.tv_distance
                )
            }
        },
    }
}
