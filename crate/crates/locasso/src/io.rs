//! Dataset files and per-replicate result tables.
//!
//! Two dataset formats are read:
//! * CSV with columns `x1..xd,y` and an optional header row;
//! * a little-endian binary layout: magic `LCSO`, `u32` version (1),
//!   `u64` n, `u64` d, then the `d + 1` columns `x1..xd, y` stored
//!   one after another as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use locasso_core::{Dataset, Matrix};
use thiserror::Error;

use crate::simulation::ReplicateRecord;

pub const BINARY_MAGIC: [u8; 4] = *b"LCSO";
pub const BINARY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("the dataset has no rows")]
    Empty,
    #[error("unsupported binary dataset version {0}")]
    Version(u32),
    #[error("binary dataset is truncated or has trailing bytes: {0}")]
    Layout(String),
    #[error(transparent)]
    Core(#[from] locasso_core::Error),
}

/// Reads a dataset, choosing the format from the leading bytes.
pub fn read_dataset(path: &Path) -> Result<Dataset, IoError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(&BINARY_MAGIC) {
        read_dataset_binary(&bytes[..])
    } else {
        read_dataset_csv(&bytes[..])
    }
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|f| f.parse::<f64>().ok()).collect();
        if width.is_none() && index == 0 && parsed.iter().any(Option::is_none) {
            if record.len() < 2 {
                return Err(IoError::Malformed {
                    line,
                    reason: "need at least one input column and a response".into(),
                });
            }
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if w < 2 {
            return Err(IoError::Malformed {
                line,
                reason: "need at least one input column and a response".into(),
            });
        }
        if record.len() != w {
            return Err(IoError::Malformed {
                line,
                reason: format!("expected {w} fields, found {}", record.len()),
            });
        }
        for (col, (v, raw)) in parsed.iter().zip(record.iter()).enumerate() {
            match v {
                Some(x) if x.is_finite() => values.push(*x),
                _ => {
                    return Err(IoError::Malformed {
                        line,
                        reason: format!("column {}: '{raw}' is not a finite number", col + 1),
                    })
                }
            }
        }
        rows += 1;
    }
    let w = width.ok_or(IoError::Empty)?;
    if rows == 0 {
        return Err(IoError::Empty);
    }
    let d = w - 1;
    let mut x = Vec::with_capacity(rows * d);
    let mut y = Vec::with_capacity(rows);
    for row in values.chunks(w) {
        x.extend_from_slice(&row[..d]);
        y.push(row[d]);
    }
    Ok(Dataset::new(Matrix::from_row_slice(rows, d, &x), y)?)
}

/// Writes `x1..xd,y` with a header row and shortest round-trip floats.
pub fn write_dataset_csv<W: Write>(out: W, data: &Dataset) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.d()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.point(i).iter().map(f64::to_string).collect();
        row.push(data.responses()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_binary<R: Read>(mut input: R) -> Result<Dataset, IoError> {
    let mut head = [0u8; 24];
    input
        .read_exact(&mut head)
        .map_err(|_| IoError::Layout("header shorter than 24 bytes".into()))?;
    if head[..4] != BINARY_MAGIC {
        return Err(IoError::Layout("missing LCSO magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(IoError::Version(version));
    }
    let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
    if n == 0 {
        return Err(IoError::Empty);
    }
    let count = n
        .checked_mul(d + 1)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| IoError::Layout(format!("n = {n}, d = {d} overflow")))?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != count {
        return Err(IoError::Layout(format!("expected {count} data bytes, found {}", body.len())));
    }
    let column = |c: usize, i: usize| {
        let at = (c * n + i) * 8;
        f64::from_le_bytes(body[at..at + 8].try_into().unwrap())
    };
    let mut x = Vec::with_capacity(n * d);
    for i in 0..n {
        for c in 0..d {
            x.push(column(c, i));
        }
    }
    let y = (0..n).map(|i| column(d, i)).collect();
    Ok(Dataset::new(Matrix::from_row_slice(n, d, &x), y)?)
}

pub fn write_dataset_binary<W: Write>(out: W, data: &Dataset) -> Result<(), IoError> {
    let mut w = BufWriter::new(out);
    w.write_all(&BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&(data.n() as u64).to_le_bytes())?;
    w.write_all(&(data.d() as u64).to_le_bytes())?;
    for c in 0..data.d() {
        for i in 0..data.n() {
            w.write_all(&data.point(i)[c].to_le_bytes())?;
        }
    }
    for v in data.responses() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn open_buffered(path: &Path) -> Result<BufReader<File>, IoError> {
    Ok(BufReader::new(File::open(path)?))
}

/// Per-replicate table. The first line is a `#` comment naming the run
/// manifest; selected coordinates are `;`-separated.
pub fn write_records_csv<W: Write>(
    mut out: W,
    manifest_name: &str,
    records: &[ReplicateRecord],
) -> Result<(), IoError> {
    writeln!(out, "# manifest={manifest_name}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "grid_index",
        "n",
        "replicate",
        "seed",
        "selected",
        "exact_recovery",
        "kkt_residual",
        "converged",
        "window_size",
        "fhat",
        "f_true",
        "squared_error",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let selected: Vec<String> = r.selected.iter().map(usize::to_string).collect();
        w.write_record([
            r.grid_index.to_string(),
            r.n.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            selected.join(";"),
            r.exact_recovery.to_string(),
            r.kkt_residual.to_string(),
            r.converged.to_string(),
            r.window_size.to_string(),
            opt(r.fhat),
            r.f_true.to_string(),
            opt(r.squared_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        Dataset::from_rows(
            &[vec![0.1, -0.25], vec![1e-300, 3.5], vec![-7.0, 0.0]],
            vec![1.0, -2.5, 0.125],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &sample()).unwrap();
        assert!(buf.starts_with(b"x1,x2,y\n"));
        assert_eq!(read_dataset_csv(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn csv_without_header() {
        let d = read_dataset_csv(&b"1,2,3\n4,5,6\n"[..]).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.d(), 2);
        assert_eq!(d.responses(), &[3.0, 6.0]);
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let err = read_dataset_csv(&b"x1,y\n1,2\n3\n"[..]).unwrap_err();
        assert!(matches!(err, IoError::Malformed { line: 3, .. }), "{err}");
        let err = read_dataset_csv(&b"1,2\n3,abc\n"[..]).unwrap_err();
        assert!(matches!(err, IoError::Malformed { line: 2, .. }), "{err}");
        let err = read_dataset_csv(&b"1,2\n3,NaN\n"[..]).unwrap_err();
        assert!(matches!(err, IoError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(read_dataset_csv(&b""[..]), Err(IoError::Empty)));
        assert!(matches!(read_dataset_csv(&b"x1,y\n"[..]), Err(IoError::Empty)));
    }

    #[test]
    fn binary_round_trip_and_layout() {
        let mut buf = Vec::new();
        write_dataset_binary(&mut buf, &sample()).unwrap();
        assert_eq!(buf.len(), 24 + 3 * 3 * 8);
        assert_eq!(&buf[..4], b"LCSO");
        // first column entries come first
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 0.1);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 1e-300);
        assert_eq!(read_dataset_binary(&buf[..]).unwrap(), sample());
        assert!(read_dataset_binary(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(matches!(read_dataset_binary(&bad[..]), Err(IoError::Version(2))));
    }
}
