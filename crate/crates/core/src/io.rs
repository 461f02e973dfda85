//! CSV emission and decoding, and atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, SheathError};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render equally long columns under a comma-separated header.
pub fn csv_string(header: &[&str], columns: &[&[f64]]) -> String {
    assert_eq!(header.len(), columns.len());
    let rows = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == rows), "ragged CSV columns");
    let mut out = String::with_capacity((rows + 1) * header.len() * 24);
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..rows {
        for (k, col) in columns.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(col[r]));
        }
        out.push('\n');
    }
    out
}

/// Parse a numeric CSV whose header must equal `header`; returns columns.
///
/// Blank lines are skipped. Every field must parse as a finite `f64`.
pub fn parse_csv(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines
        .next()
        .ok_or_else(|| SheathError::Parse("empty CSV".into()))?;
    let found: Vec<&str> = head.split(',').map(str::trim).collect();
    if found != header {
        return Err(SheathError::Parse(format!(
            "expected header `{}`, found `{}`",
            header.join(","),
            head.trim()
        )));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(SheathError::Parse(format!(
                "line {}: expected {} fields, found {}",
                lineno + 1,
                header.len(),
                fields.len()
            )));
        }
        for (col, field) in columns.iter_mut().zip(fields) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| SheathError::Parse(format!("line {}: `{}` is not a number", lineno + 1, field.trim())))?;
            if !v.is_finite() {
                return Err(SheathError::Parse(format!("line {}: non-finite value", lineno + 1)));
            }
            col.push(v);
        }
    }
    Ok(columns)
}

/// Write `contents` to a sibling temporary file, then rename into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
