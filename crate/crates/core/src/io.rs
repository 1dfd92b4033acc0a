//! Matrix and vector files in Matrix Market array format or headerless CSV.
//!
//! The format is picked by extension: `.mtx` is Matrix Market
//! (`%%MatrixMarket matrix array real general`, column-major values), `.csv`
//! is one comma-separated row per line. Vectors are accepted as a single
//! column, a single row, or (CSV) one value per line. Values are written
//! with 17 significant digits so a round trip is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    MatrixMarket,
    Csv,
}

fn detect_format(path: &Path) -> Result<Format> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(ref e) if e == "mtx" => Ok(Format::MatrixMarket),
        Some(ref e) if e == "csv" => Ok(Format::Csv),
        _ => Err(Error::Parse {
            path: path.display().to_string(),
            message: "unsupported extension, expected .mtx or .csv".into(),
        }),
    }
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), message: message.into() }
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let format = detect_format(path)?;
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    match format {
        Format::MatrixMarket => parse_matrix_market(path, &text),
        Format::Csv => parse_csv(path, &text),
    }
}

/// Reads a vector: an m x 1 or 1 x m matrix in either format.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() == 1 {
        Ok(DVector::from_column_slice(m.column(0).as_slice()))
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(parse_error(
            path,
            format!("expected a vector, got a {}x{} matrix", m.nrows(), m.ncols()),
        ))
    }
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let format = detect_format(path)?;
    let mut text = String::new();
    match format {
        Format::MatrixMarket => {
            text.push_str("%%MatrixMarket matrix array real general\n");
            let _ = writeln!(text, "{} {}", m.nrows(), m.ncols());
            // array format is column-major
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    let _ = writeln!(text, "{:.16e}", m[(i, j)]);
                }
            }
        }
        Format::Csv => {
            for i in 0..m.nrows() {
                let row: Vec<String> =
                    (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
        }
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

fn parse_matrix_market(path: &Path, text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_error(path, "empty file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 4
        || !tokens[0].eq_ignore_ascii_case("%%MatrixMarket")
        || !tokens[1].eq_ignore_ascii_case("matrix")
    {
        return Err(parse_error(path, "missing %%MatrixMarket matrix header"));
    }
    if !tokens[2].eq_ignore_ascii_case("array") {
        return Err(parse_error(path, format!("unsupported format '{}', need array", tokens[2])));
    }
    if !tokens[3].eq_ignore_ascii_case("real") && !tokens[3].eq_ignore_ascii_case("integer") {
        return Err(parse_error(path, format!("unsupported field '{}', need real", tokens[3])));
    }
    if let Some(symmetry) = tokens.get(4) {
        if !symmetry.eq_ignore_ascii_case("general") {
            return Err(parse_error(path, format!("unsupported symmetry '{symmetry}'")));
        }
    }

    let mut content = lines.filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let size = content.next().ok_or_else(|| parse_error(path, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_error(path, format!("bad size line '{size}'")));
    }
    let rows: usize =
        dims[0].parse().map_err(|_| parse_error(path, format!("bad row count '{}'", dims[0])))?;
    let cols: usize =
        dims[1].parse().map_err(|_| parse_error(path, format!("bad column count '{}'", dims[1])))?;

    let mut values = Vec::with_capacity(rows * cols);
    for line in content {
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| parse_error(path, format!("bad number '{token}'")))?;
            values.push(v);
        }
    }
    if values.len() != rows * cols {
        return Err(parse_error(
            path,
            format!("expected {} values, found {}", rows * cols, values.len()),
        ));
    }
    Ok(DMatrix::from_column_slice(rows, cols, &values))
}

fn parse_csv(path: &Path, text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split(',') {
            let v: f64 = token.trim().parse().map_err(|_| {
                parse_error(path, format!("line {}: bad number '{}'", lineno + 1, token.trim()))
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    path,
                    format!("line {}: expected {} fields, got {}", lineno + 1, first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, "no data rows"));
    }
    let (nrows, ncols) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
