//! Artifact writers. Floats are written in shortest round-trip form so
//! repeated runs produce identical bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::Error;

fn write_error(path: &Path, source: std::io::Error) -> Error {
    Error::Write {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| write_error(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| write_error(path, e))
}

/// Writes `header` then one record per row.
pub fn write_csv<R>(path: &Path, header: &[&str], rows: R) -> Result<(), Error>
where
    R: IntoIterator,
    R::Item: IntoIterator<Item = String>,
{
    let io = |e: csv::Error| write_error(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| write_error(path, e))
}
