//! Dataset and label file formats.
//!
//! CSV datasets are one row per point with an optional single header row;
//! a column whose header equals `label` carries ground-truth cluster
//! indices. JSON datasets are `{"points": [[..]], "labels": [..]}` with
//! `labels` optional. Label files are CSV with columns `index,label`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use super::{DataSet, Partition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Deserialize)]
struct JsonDataset {
    points: Vec<Vec<f64>>,
    #[serde(default)]
    labels: Option<Vec<usize>>,
}

/// Loads a dataset from `path`.
pub fn load_dataset(path: &Path, format: Format) -> Result<DataSet> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    match format {
        Format::Json => {
            let file = File::open(path)?;
            let parsed: JsonDataset = serde_json::from_reader(BufReader::new(file))?;
            DataSet::from_rows(&parsed.points, parsed.labels, &name)
        }
        Format::Csv => load_csv(path, &name),
    }
}

fn load_csv(path: &Path, name: &str) -> Result<DataSet> {
    let file = File::open(path)?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    if lines.is_empty() {
        return Err(Error::Format {
            row: 0,
            message: "file is empty".into(),
        });
    }

    // A header is present when not every field of the first row parses as
    // a number.
    let first_fields: Vec<&str> = lines[0].1.split(',').map(str::trim).collect();
    let has_header = !first_fields
        .iter()
        .all(|f| f.parse::<f64>().is_ok());
    let label_col = if has_header {
        first_fields.iter().position(|f| *f == "label")
    } else {
        None
    };

    let data_lines = if has_header { &lines[1..] } else { &lines[..] };
    if data_lines.is_empty() {
        return Err(Error::Format {
            row: lines[0].0,
            message: "no data rows after header".into(),
        });
    }

    let width = data_lines[0].1.split(',').count();
    let mut rows = Vec::with_capacity(data_lines.len());
    let mut labels = label_col.map(|_| Vec::with_capacity(data_lines.len()));
    for (row_no, line) in data_lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width {
            return Err(Error::Dimension(format!(
                "row {row_no} has {} fields, expected {width}",
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(width);
        for (col, field) in fields.iter().enumerate() {
            if Some(col) == label_col {
                let v: usize = field.parse().map_err(|_| Error::Format {
                    row: *row_no,
                    message: format!("label '{field}' is not a nonnegative integer"),
                })?;
                labels.as_mut().expect("label column implies labels").push(v);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Format {
                    row: *row_no,
                    message: format!("'{field}' is not a number"),
                })?;
                row.push(v);
            }
        }
        rows.push(row);
    }
    DataSet::from_rows(&rows, labels, name)
}

/// Writes a dataset as CSV with header `x0,...,x{d-1}[,label]`.
pub fn save_dataset(path: &Path, data: &DataSet) -> Result<()> {
    let mut out = File::create(path)?;
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    if data.labels().is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for p in 0..data.n() {
        let mut fields: Vec<String> = data
            .point(p)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        if let Some(labels) = data.labels() {
            fields.push(labels[p].to_string());
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Writes a partition as `index,label` CSV.
pub fn save_labels(path: &Path, part: &Partition) -> Result<()> {
    let mut out = File::create(path)?;
    writeln!(out, "index,label")?;
    for (i, &a) in part.assignment().iter().enumerate() {
        writeln!(out, "{i},{a}")?;
    }
    Ok(())
}

/// Reads a partition from either an `index,label` CSV or a dataset CSV
/// with a `label` column.
pub fn load_labels(path: &Path) -> Result<Partition> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::Format {
            row: 1,
            message: "no 'label' column found".into(),
        })?;
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(label_col).ok_or_else(|| Error::Format {
            row: i + 2,
            message: "missing label field".into(),
        })?;
        let v: usize = field.parse().map_err(|_| Error::Format {
            row: i + 2,
            message: format!("label '{field}' is not a nonnegative integer"),
        })?;
        labels.push(v);
    }
    if labels.is_empty() {
        return Err(Error::Format {
            row: 0,
            message: "no label rows".into(),
        });
    }
    let k = labels.iter().max().map_or(1, |m| m + 1);
    Partition::new(labels, k.max(1))
}
