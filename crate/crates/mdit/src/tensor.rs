//! Dense row-major matrices and the MDT1 tensor file format.
//!
//! MDT1 layout: 8-byte magic `MDITTEN1`, u32 LE rank, one u32 LE per
//! dimension, then row-major IEEE-754 f32 LE payload. In-memory math is
//! f64; values are narrowed to f32 on write.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MDT1_MAGIC: &[u8; 8] = b"MDITTEN1";

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix shape mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Appends `n` all-zero rows.
    pub fn pad_rows(&mut self, n: usize) {
        self.data.extend(std::iter::repeat(0.0).take(n * self.cols));
        self.rows += n;
    }

    /// Elementwise `lambda * a + (1 - lambda) * b`.
    pub fn lerp(a: &Matrix, b: &Matrix, lambda: f64) -> Result<Matrix> {
        if a.rows != b.rows || a.cols != b.cols {
            return Err(Error::InvalidParameter(format!(
                "shape mismatch: {}x{} vs {}x{}",
                a.rows, a.cols, b.rows, b.cols
            )));
        }
        let data = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(&x, &y)| lambda * x + (1.0 - lambda) * y)
            .collect();
        Ok(Matrix {
            rows: a.rows,
            cols: a.cols,
            data,
        })
    }

    /// Mean of rows `0..n_rows`.
    pub fn mean_of_rows(&self, n_rows: usize) -> Vec<f64> {
        assert!(n_rows >= 1 && n_rows <= self.rows);
        let mut acc = vec![0.0; self.cols];
        for r in 0..n_rows {
            for (a, &v) in acc.iter_mut().zip(self.row(r)) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= n_rows as f64;
        }
        acc
    }
}

pub fn write_tensor(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    let expected: usize = dims.iter().product();
    if expected != data.len() {
        return Err(Error::Internal(format!(
            "tensor payload {} does not match dims {:?}",
            data.len(),
            dims
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MDT1_MAGIC)?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MDT1_MAGIC {
        return Err(Error::CorruptInput(format!(
            "{}: bad tensor magic",
            path.display()
        )));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let rank = u32::from_le_bytes(buf4) as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        r.read_exact(&mut buf4)?;
        dims.push(u32::from_le_bytes(buf4) as usize);
    }
    let count: usize = dims.iter().product();
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf4)?;
        data.push(f32::from_le_bytes(buf4) as f64);
    }
    Ok((dims, data))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_tensor(path, &[m.rows(), m.cols()], m.data())
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let (dims, data) = read_tensor(path)?;
    if dims.len() != 2 {
        return Err(Error::CorruptInput(format!(
            "{}: expected rank-2 tensor, got rank {}",
            path.display(),
            dims.len()
        )));
    }
    Ok(Matrix::from_vec(dims[0], dims[1], data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn tensor_round_trip_preserves_shape_and_f32_values() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.mdt1");
        let data = vec![0.5, -1.25, 3.0, 0.0, 7.5, -0.125];
        write_tensor(&path, &[2, 3], &data).unwrap();
        let (dims, back) = read_tensor(&path).unwrap();
        assert_eq!(dims, vec![2, 3]);
        assert_eq!(back, data);
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.mdt1");
        std::fs::write(&path, b"NOTMAGIC\x00\x00\x00\x00").unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::CorruptInput(_))));
    }

    #[test]
    fn lerp_shape_mismatch_is_error() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(3, 2);
        assert!(Matrix::lerp(&a, &b, 0.5).is_err());
    }
}
