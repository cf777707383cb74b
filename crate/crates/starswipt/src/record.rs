//! Dense complex-matrix records for the structured text (JSON) artifacts the
//! harness reads and writes: per-trial channel sets, solution files, and the
//! conic debug dump. Entries are row-major `[re, im]` pairs so the files stay
//! self-describing and diffable across implementations.

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::C64;

/// Errors from record decoding.
#[derive(Debug, Error)]
pub enum RecordError {
    #[error("matrix record shape {rows}x{cols} does not match {len} stored entries")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
}

/// A dense complex matrix as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `[re, im]` pairs.
    pub entries: Vec<[f64; 2]>,
}

impl MatrixRecord {
    pub fn from_array(a: &Array2<C64>) -> Self {
        let (rows, cols) = a.dim();
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let z = a[[i, j]];
                entries.push([z.re, z.im]);
            }
        }
        Self { rows, cols, entries }
    }

    pub fn from_vector(v: &Array1<C64>) -> Self {
        let entries = v.iter().map(|z| [z.re, z.im]).collect();
        Self { rows: v.len(), cols: 1, entries }
    }

    pub fn to_array(&self) -> Result<Array2<C64>, RecordError> {
        if self.entries.len() != self.rows * self.cols {
            return Err(RecordError::ShapeMismatch {
                rows: self.rows,
                cols: self.cols,
                len: self.entries.len(),
            });
        }
        let mut a = Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            for j in 0..self.cols {
                let [re, im] = self.entries[i * self.cols + j];
                a[[i, j]] = C64::new(re, im);
            }
        }
        Ok(a)
    }

    pub fn to_vector(&self) -> Result<Array1<C64>, RecordError> {
        let a = self.to_array()?;
        if self.cols != 1 {
            return Err(RecordError::ShapeMismatch {
                rows: self.rows,
                cols: self.cols,
                len: self.entries.len(),
            });
        }
        Ok(a.column(0).to_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_entries_bitwise() {
        let mut a = Array2::zeros((2, 3));
        a[[0, 1]] = C64::new(1.5, -2.25);
        a[[1, 2]] = C64::new(-0.125, 3.0);
        let record = MatrixRecord::from_array(&a);
        let back = record.to_array().unwrap();
        assert!(a.iter().zip(back.iter()).all(|(x, y)| x == y));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let record = MatrixRecord { rows: 2, cols: 2, entries: vec![[0.0, 0.0]; 3] };
        assert!(matches!(record.to_array(), Err(RecordError::ShapeMismatch { .. })));
    }

    #[test]
    fn vector_roundtrip() {
        let v = Array1::from_vec(vec![C64::new(1.0, 2.0), C64::new(-3.0, 0.5)]);
        let record = MatrixRecord::from_vector(&v);
        let back = record.to_vector().unwrap();
        assert!(v.iter().zip(back.iter()).all(|(x, y)| x == y));
    }
}
