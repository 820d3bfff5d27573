//! Header-first, tab-separated text tables.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Replaces tabs and line breaks so a field cannot split a row.
pub(crate) fn clean(field: &str) -> String {
    field.replace(['\t', '\n', '\r'], " ")
}

pub(crate) fn write(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join("\t")).map_err(io)?;
    for row in rows {
        let row: Vec<String> = row.iter().map(|s| clean(s)).collect();
        writeln!(w, "{}", row.join("\t")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a table whose header must equal `header`. Returns the data rows
/// together with their 1-based line numbers.
pub(crate) fn read(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let data_err = |line, message: String| Error::Data {
        path: path.to_path_buf(),
        line,
        message,
    };
    let first = lines
        .next()
        .ok_or_else(|| data_err(1, "empty file, expected a header".into()))?
        .map_err(|e| Error::io(path, e))?;
    let found: Vec<&str> = first.trim_end_matches('\r').split('\t').collect();
    if found != header {
        return Err(data_err(1, format!("expected header {:?}, found {found:?}", header)));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() != header.len() {
            return Err(data_err(
                i + 2,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        rows.push((i + 2, fields));
    }
    Ok(rows)
}
