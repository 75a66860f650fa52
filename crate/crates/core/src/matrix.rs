//! Dense row-major matrix and the column standardizer shared by the linear
//! and neural models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::data(format!(
                "matrix of {n_rows}x{n_cols} needs {} values, got {}",
                n_rows * n_cols,
                data.len()
            )));
        }
        Ok(Matrix {
            n_rows,
            n_cols,
            data,
        })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::data(format!(
                    "row {i} has {} values, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the given rows, in order (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    /// New matrix holding the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for row in self.rows() {
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Matrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            data,
        }
    }

    /// Appends columns on the right.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.n_rows != other.n_rows {
            return Err(Error::data(format!(
                "cannot stack {} rows beside {} rows",
                self.n_rows, other.n_rows
            )));
        }
        let n_cols = self.n_cols + other.n_cols;
        let mut data = Vec::with_capacity(self.n_rows * n_cols);
        for i in 0..self.n_rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            n_rows: self.n_rows,
            n_cols,
            data,
        })
    }
}

/// Per-column affine standardization fitted on training rows.
///
/// Columns with zero variance keep a unit scale and are reported as constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.n_rows().max(1) as f64;
        let p = x.n_cols();
        let mut mean = vec![0.0; p];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for row in x.rows() {
            for j in 0..p {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let mut scale = Vec::with_capacity(p);
        let mut constant = Vec::with_capacity(p);
        for v in var {
            let sd = (v / n).sqrt();
            if sd > 1e-12 {
                scale.push(sd);
                constant.push(false);
            } else {
                scale.push(1.0);
                constant.push(true);
            }
        }
        Standardizer {
            mean,
            scale,
            constant,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Writes the standardized version of `x` into `out`; constant columns map to 0.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Arity {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for j in 0..x.len() {
            out[j] = if self.constant[j] {
                0.0
            } else {
                (x[j] - self.mean[j]) / self.scale[j]
            };
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.n_rows(), x.n_cols());
        for i in 0..x.n_rows() {
            self.apply_into(x.row(i), out.row_mut(i))?;
        }
        Ok(out)
    }
}

/// Checks that every label is +1 or -1 and that both classes occur.
pub(crate) fn check_binary_labels(y: &[i8]) -> Result<(usize, usize)> {
    let mut pos = 0;
    let mut neg = 0;
    for (i, &v) in y.iter().enumerate() {
        match v {
            1 => pos += 1,
            -1 => neg += 1,
            other => {
                return Err(Error::data(format!(
                    "label {other} at row {i} is not +1 or -1"
                )))
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::data(
            "labels contain a single class; a binary classifier needs both",
        ));
    }
    Ok((pos, neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_centers_and_flags_constants() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x);
        assert_eq!(s.constant, vec![false, true]);
        let z = s.transform(&x).unwrap();
        assert_eq!(z.row(0), &[-1.0, 0.0]);
        assert_eq!(z.row(1), &[1.0, 0.0]);
        assert!(matches!(s.apply(&[1.0]), Err(Error::Arity { .. })));
    }

    #[test]
    fn select_and_stack() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let c = x.select_columns(&[2, 0]);
        assert_eq!(c.row(1), &[6.0, 4.0]);
        let r = x.select_rows(&[1, 1]);
        assert_eq!(r.row(0), r.row(1));
        let h = x.hstack(&c).unwrap();
        assert_eq!(h.row(0), &[1.0, 2.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn label_check() {
        assert!(check_binary_labels(&[1, -1]).is_ok());
        assert!(check_binary_labels(&[1, 1]).is_err());
        assert!(check_binary_labels(&[1, 0]).is_err());
    }
}
