//! Plain numeric matrix CSV files: one row per line, comma-separated f64
//! values formatted with the shortest round-trip representation.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub(crate) fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&m[(r, c)].to_string());
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(Error::io(path))?;
    file.write_all(out.as_bytes()).map_err(Error::io(path))?;
    Ok(())
}

pub(crate) fn read_matrix_csv(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut m = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        if r >= rows {
            return Err(Error::malformed(path, i + 1, "more rows than expected"));
        }
        let mut c = 0;
        for field in line.split(',') {
            if c >= cols {
                return Err(Error::malformed(path, i + 1, "more columns than expected"));
            }
            let v: f64 = field.trim().parse().map_err(|e| {
                Error::malformed(path, i + 1, format!("bad float {field:?}: {e}"))
            })?;
            m[(r, c)] = v;
            c += 1;
        }
        if c != cols {
            return Err(Error::malformed(
                path,
                i + 1,
                format!("expected {cols} columns, found {c}"),
            ));
        }
        r += 1;
    }
    if r != rows {
        return Err(Error::malformed(
            path,
            r + 1,
            format!("expected {rows} rows, found {r}"),
        ));
    }
    Ok(m)
}
