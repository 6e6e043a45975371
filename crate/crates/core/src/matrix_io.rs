//! Plain-text matrix files.
//!
//! ```text
//! rcopt-matrix 1
//! shape <rows> <cols>
//! seed <u64 | none>
//! <cols whitespace-separated decimals>   (one line per row)
//! ```
//!
//! Values are written in Rust's shortest round-trip decimal form, so a
//! write/read cycle reproduces every entry bit for bit.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &str = "rcopt-matrix";
pub const MATRIX_VERSION: u32 = 1;

pub fn write_matrix<W: Write>(out: &mut W, m: &DMatrix<f64>, seed: Option<u64>) -> Result<()> {
    writeln!(out, "{MATRIX_MAGIC} {MATRIX_VERSION}")?;
    writeln!(out, "shape {} {}", m.nrows(), m.ncols())?;
    match seed {
        Some(s) => writeln!(out, "seed {s}")?,
        None => writeln!(out, "seed none")?,
    }
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<(DMatrix<f64>, Option<u64>)> {
    let bad = |reason: String| Error::format("matrix file", reason);
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of file".into()))?
            .map_err(Error::from)
    };

    let header = next()?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MATRIX_MAGIC) {
        return Err(bad(format!("missing `{MATRIX_MAGIC}` header")));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing version".into()))?;
    if version != MATRIX_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }

    let shape = next()?;
    let dims: Vec<usize> = match shape.strip_prefix("shape ") {
        Some(rest) => rest
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad(format!("bad shape `{rest}`"))))
            .collect::<Result<_>>()?,
        None => return Err(bad("missing shape line".into())),
    };
    let [rows, cols] = dims[..] else {
        return Err(bad("shape needs two integers".into()));
    };

    let seed_line = next()?;
    let seed = match seed_line.strip_prefix("seed ").map(str::trim) {
        Some("none") => None,
        Some(s) => Some(s.parse().map_err(|_| bad(format!("bad seed `{s}`")))?),
        None => return Err(bad("missing seed line".into())),
    };

    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = next()?;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(
                tok.parse::<f64>()
                    .map_err(|_| bad(format!("row {r}: bad number `{tok}`")))?,
            );
        }
        if data.len() - before != cols {
            return Err(bad(format!(
                "row {r} has {} values, expected {cols}",
                data.len() - before
            )));
        }
    }
    Ok((DMatrix::from_row_slice(rows, cols, &data), seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = DMatrix::from_fn(3, 4, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0) * 1e-7);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m, Some(17)).unwrap();
        let (back, seed) = read_matrix(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(seed, Some(17));
    }

    #[test]
    fn rejects_ragged_rows() {
        let text = "rcopt-matrix 1\nshape 2 2\nseed none\n1 2\n3\n";
        let err = read_matrix(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn rejects_unknown_version() {
        let text = "rcopt-matrix 9\nshape 0 0\nseed none\n";
        assert!(read_matrix(text.as_bytes()).is_err());
    }
}
