//! Input/output samples and their CSV representation.
//!
//! Files are UTF-8 with `.` as decimal separator, one sample per line, the
//! `K` input columns followed by the output. A header row
//! (`xi_1,...,xi_K,y`) is optional and detected by whether the first record
//! parses as numbers.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub path: String,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
}

/// `N` input points (N × K) with their outputs. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xi: DMatrix<f64>,
    y: Vec<f64>,
    provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(xi: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if xi.nrows() == 0 {
            return Err(Error::Data("dataset must contain at least one sample".into()));
        }
        if xi.ncols() == 0 {
            return Err(Error::Data("dataset must have at least one input column".into()));
        }
        if xi.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} input rows but {} outputs",
                xi.nrows(),
                y.len()
            )));
        }
        for row in 0..xi.nrows() {
            for col in 0..xi.ncols() {
                if !xi[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
            if !y[row].is_finite() {
                return Err(Error::NonFinite { row, col: xi.ncols() });
            }
        }
        Ok(Self {
            xi,
            y,
            provenance: None,
        })
    }

    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xi.ncols()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// First `n` samples.
    pub fn head(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Self::new(self.xi.rows(0, n).into_owned(), self.y[..n].to_vec())
    }

    /// Reads a dataset whose last column is the output.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let table = read_numeric_csv(&bytes)?;
        let mut ds = Self::from_table(table, true)?;
        ds.provenance = Some(Provenance {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(ds)
    }

    fn from_table(table: NumericTable, with_output: bool) -> Result<Self> {
        let NumericTable { ncols, rows } = table;
        let k = if with_output { ncols - 1 } else { ncols };
        if with_output && ncols < 2 {
            return Err(Error::Data(
                "need at least one input column and an output column".into(),
            ));
        }
        let n = rows.len() / ncols;
        let xi = DMatrix::from_fn(n, k, |r, c| rows[r * ncols + c]);
        let y = if with_output {
            (0..n).map(|r| rows[r * ncols + k]).collect()
        } else {
            vec![0.0; n]
        };
        Self::new(xi, y)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.dim();
        let mut header: Vec<String> = (1..=k).map(|i| format!("xi_{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec: Vec<String> = (0..k).map(|c| self.xi[(r, c)].to_string()).collect();
            rec.push(self.y[r].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads an input-only point set (N × K); a trailing output column is
/// dropped when `expected_dim` says there is one too many.
pub fn read_inputs_csv(path: impl AsRef<Path>, expected_dim: usize) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path)?;
    let table = read_numeric_csv(&bytes)?;
    if table.ncols != expected_dim && table.ncols != expected_dim + 1 {
        return Err(Error::Dimension(format!(
            "input file has {} columns, expected {expected_dim} (or {} with outputs)",
            table.ncols,
            expected_dim + 1
        )));
    }
    let keep = expected_dim;
    let n = table.rows.len() / table.ncols;
    if n == 0 {
        return Err(Error::Data("no input rows".into()));
    }
    let xi = DMatrix::from_fn(n, keep, |r, c| table.rows[r * table.ncols + c]);
    for row in 0..n {
        for col in 0..keep {
            if !xi[(row, col)].is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
    }
    Ok(xi)
}

struct NumericTable {
    ncols: usize,
    rows: Vec<f64>,
}

fn read_numeric_csv(bytes: &[u8]) -> Result<NumericTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut ncols = 0;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(vals) => {
                if ncols == 0 {
                    ncols = vals.len();
                } else if vals.len() != ncols {
                    return Err(Error::Data(format!(
                        "record {} has {} fields, expected {ncols}",
                        line + 1,
                        vals.len()
                    )));
                }
                rows.extend(vals);
            }
            Err(_) if line == 0 => continue, // header
            Err(e) => return Err(Error::Data(format!("record {}: {e}", line + 1))),
        }
    }
    if ncols == 0 {
        return Err(Error::Data("no numeric records".into()));
    }
    Ok(NumericTable { ncols, rows })
}
