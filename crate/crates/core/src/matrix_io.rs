//! Binary matrix file format shared by kernel and distance matrices:
//! row-major little-endian f64 payload in `<path>`, JSON sidecar metadata
//! in `<path>.json`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde_json::Value;

use crate::error::{Error, Result};

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes an n × n matrix plus its JSON sidecar. The sidecar always gets
/// an `n` field in addition to the caller's metadata object.
pub fn write_matrix(path: &Path, m: &Array2<f64>, mut meta: Value) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension("matrix must be square".into()));
    }
    if let Value::Object(ref mut map) = meta {
        map.insert("n".into(), Value::from(m.nrows()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    for v in m.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    let sidecar = File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(BufWriter::new(sidecar), &meta)?;
    Ok(())
}

/// Reads a matrix and its sidecar back.
pub fn read_matrix(path: &Path) -> Result<(Array2<f64>, Value)> {
    let sidecar = File::open(sidecar_path(path))?;
    let meta: Value = serde_json::from_reader(BufReader::new(sidecar))?;
    let n = meta
        .get("n")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format {
            row: 0,
            message: "sidecar is missing the matrix size field 'n'".into(),
        })? as usize;

    let mut reader = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != n * n * 8 {
        return Err(Error::Format {
            row: 0,
            message: format!(
                "matrix payload is {} bytes, expected {} for n = {n}",
                bytes.len(),
                n * n * 8
            ),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let m = Array2::from_shape_vec((n, n), values).expect("size checked above");
    Ok((m, meta))
}
