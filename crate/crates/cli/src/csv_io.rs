//! Series tables as CSV: a timestamp column followed by one numeric column
//! per channel. Values are written in Rust's shortest round-trip float
//! format, so a write/load cycle reproduces every value bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use arma_core::data::SeriesTable;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Loads a table. Row and column numbers in errors are 1-based positions in
/// the file, counting the header as row 1.
pub fn load_csv(path: &Path) -> Result<SeriesTable> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Data(format!("dataset file {} not found", path.display()))
        } else {
            CliError::io(path)(e)
        }
    })?;
    read_csv(file, path)
}

/// As [`load_csv`], from any reader; `path` is only used in error messages.
pub fn read_csv(reader: impl Read, path: &Path) -> Result<SeriesTable> {
    let err = |row: usize, column: usize, message: String| CliError::Csv {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| err(1, 1, e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(err(1, headers.len().max(1), "need a timestamp column and at least one value column".into()));
    }
    let timestamp_header = headers[0].to_string();
    let channel_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let width = headers.len();

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| err(row, 1, e.to_string()))?;
        if record.len() != width {
            return Err(err(row, record.len().min(width) + 1, format!("expected {width} fields, found {}", record.len())));
        }
        timestamps.push(record[0].to_string());
        for (col, field) in record.iter().enumerate().skip(1) {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| err(row, col + 1, format!("cannot parse '{field}' as a number")))?;
            if !v.is_finite() {
                return Err(err(row, col + 1, format!("non-finite value '{field}'")));
            }
            values.push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(SeriesTable::new(timestamp_header, timestamps, channel_names, values)?)
}

pub fn write_csv(table: &SeriesTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    write_table(table, file).map_err(|e| csv_write_error(path, e))
}

pub fn write_table(table: &SeriesTable, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![table.timestamp_header.clone()];
    header.extend(table.channel_names.iter().cloned());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for r in 0..table.rows() {
        record.clear();
        record.push(table.timestamps[r].clone());
        record.extend(table.row(r).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes serializable rows (one struct per line) with a header.
pub fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(|e| csv_write_error(path, e))?;
    }
    w.flush().map_err(CliError::io(path))
}

fn csv_write_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Data(format!("{}: {other:?}", path.display())),
    }
}
