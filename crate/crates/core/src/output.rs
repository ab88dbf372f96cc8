//! CSV and JSON writers for run artifacts.
//!
//! CSVs carry one header row and shortest round-trip float formatting, so
//! parsing a written value gives back the same `f64` bit pattern. Missing
//! values are empty fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Version of the JSON layouts written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Writes `header` and then one record per row.
pub fn emit_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| Error::Serialize(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a top-level `schema_version` field.
pub fn emit_json<T: Serialize>(path: &Path, summary: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let doc = Versioned {
        schema_version: SCHEMA_VERSION,
        body: summary,
    };
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Serialize(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
