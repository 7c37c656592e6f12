//! Matrix serialization.
//!
//! Two formats are supported:
//!
//! - **CSV**: a header line `# rows cols` followed by one line per row of
//!   comma-separated decimal literals. Values are written with Rust's
//!   shortest round-trip formatting, so CSV round trips are bit-exact.
//! - **Binary**: the 4-byte magic `CALS`, then `rows` and `cols` as
//!   little-endian `u64`, then the row-major entries as little-endian `f64`.

use std::io::{BufRead, BufReader, Read, Write};

use super::Matrix;
use crate::error::{Error, Result};

/// Magic bytes identifying the binary matrix format.
pub const BINARY_MAGIC: &[u8; 4] = b"CALS";

/// Writes `m` in the CSV format.
pub fn write_csv<W: Write>(m: &Matrix, out: &mut W) -> Result<()> {
    writeln!(out, "# {} {}", m.rows(), m.cols())?;
    for r in 0..m.rows() {
        let row = &m.data()[r * m.cols()..(r + 1) * m.cols()];
        let mut line = String::new();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a matrix in the CSV format.
pub fn read_csv<R: Read>(input: R) -> Result<Matrix> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty input, expected `# rows cols` header".into()))??;
    let rest = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Format(format!("missing `#` header, got {header:?}")))?;
    let dims: Vec<usize> = rest
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad dimension token {t:?} in header")))
        })
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Format(format!(
            "header must carry exactly two dimensions, got {}",
            dims.len()
        )));
    };

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        seen_rows += 1;
        let mut count = 0usize;
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad value {tok:?} in row {seen_rows}")))?;
            data.push(v);
            count += 1;
        }
        if count != cols {
            return Err(Error::Format(format!(
                "row {seen_rows} has {count} values, expected {cols}"
            )));
        }
    }
    if seen_rows != rows {
        return Err(Error::Format(format!(
            "found {seen_rows} rows, header promised {rows}"
        )));
    }
    Matrix::new(rows, cols, data)
}

/// Writes `m` in the binary format.
pub fn write_binary<W: Write>(m: &Matrix, out: &mut W) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(m.rows() as u64).to_le_bytes())?;
    out.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a matrix in the binary format.
pub fn read_binary<R: Read>(mut input: R) -> Result<Matrix> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected {BINARY_MAGIC:?}"
        )));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Matrix::new(rows, cols, data)
}
