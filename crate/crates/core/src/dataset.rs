//! Row-major sample matrices and their CSV form.
//!
//! CSV contract: the first line is a header, every following line is one
//! sample, columns are features, cells are decimal floats.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An `n × d` matrix of finite samples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DatasetMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != rows * cols {
            return Err(Error::Shape { rows, cols, len: values.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let cols = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch { left: cols, right: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, values)
    }

    /// A single-feature matrix.
    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(n, 1, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.cols).copied()
    }

    /// Applies `f` to every entry. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        assert!(values.iter().all(|v| v.is_finite()), "map produced a non-finite value");
        Self { rows: self.rows, cols: self.cols, values }
    }

    /// Rows `range` as a new matrix.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let values = self.values[range.start * self.cols..range.end * self.cols].to_vec();
        Self::new(range.len(), self.cols, values)
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch { left: self.cols, right: other.cols });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Self { rows: self.rows + other.rows, cols: self.cols, values })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
        let header_cols = rdr.headers()?.len();
        let mut values = Vec::new();
        let mut rows = 0usize;
        for (idx, record) in rdr.records().enumerate() {
            // line numbers are 1-based and the header occupies line 1
            let line = idx + 2;
            let record = record.map_err(|e| Error::Parse { row: line, col: 0, msg: e.to_string() })?;
            if record.len() != header_cols {
                return Err(Error::Parse {
                    row: line,
                    col: record.len().min(header_cols) + 1,
                    msg: format!("expected {header_cols} fields, found {}", record.len()),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: line,
                    col: j + 1,
                    msg: format!("not a number: {cell:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse { row: line, col: j + 1, msg: "non-finite value".into() });
                }
                values.push(v);
            }
            rows += 1;
        }
        Self::new(rows, header_cols, values)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes a header `x0,x1,...` followed by one line per row, floats in
    /// shortest round-trip form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record((0..self.cols).map(|j| format!("x{j}")))?;
        for row in self.iter_rows() {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}
