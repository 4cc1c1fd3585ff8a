//! Dense row-major 2-D tensors of f64, just enough for small MLPs.
//!
//! NaN/infinity is rejected at op boundaries rather than propagated.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    /// Panics if `data.len() != rows * cols`; shape misuse is programmer error.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            rows * cols,
            data.len(),
            "tensor data length {} does not match {rows}x{cols}",
            data.len()
        );
        Tensor { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor::new(r, c, data)
    }

    pub fn row_vector(values: Vec<f64>) -> Self {
        let cols = values.len();
        Tensor::new(1, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn ensure_finite(&self, context: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(context))
        }
    }

    /// `self (B x I) * other (I x O) -> B x O`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape_string(),
                right: other.shape_string(),
            });
        }
        let (b, inner, o) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; b * o];
        for i in 0..b {
            let lhs = self.row(i);
            let dst = &mut out[i * o..(i + 1) * o];
            for (k, &l) in lhs.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                let rhs = &other.data[k * o..(k + 1) * o];
                for (d, &r) in dst.iter_mut().zip(rhs) {
                    *d += l * r;
                }
            }
            let _ = inner;
        }
        Ok(Tensor::new(b, o, out))
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.get(r, c);
            }
        }
        Tensor::new(self.cols, self.rows, out)
    }

    /// Adds a `1 x K` bias row to every row of a `B x K` tensor.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(Error::Shape {
                op: "add_bias",
                left: self.shape_string(),
                right: bias.shape_string(),
            });
        }
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(out.cols) {
            for (v, &b) in row.iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Ok(out)
    }

    pub fn relu(&self) -> Tensor {
        let data = self.data.iter().map(|&v| v.max(0.0)).collect();
        Tensor::new(self.rows, self.cols, data)
    }

    /// Multiplies every row elementwise by a binary mask of width K.
    pub fn mask_mul(&self, mask: &[u8]) -> Result<Tensor> {
        if mask.len() != self.cols {
            return Err(Error::Shape {
                op: "mask_mul",
                left: self.shape_string(),
                right: format!("mask[{}]", mask.len()),
            });
        }
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(out.cols) {
            for (v, &m) in row.iter_mut().zip(mask) {
                if m == 0 {
                    *v = 0.0;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        let data = self.data.iter().map(|&v| v * factor).collect();
        Tensor::new(self.rows, self.cols, data)
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, other: &Tensor, factor: f64) {
        assert_eq!(self.shape(), other.shape(), "add_scaled shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * factor;
        }
    }

    /// Row-wise softmax with max-subtraction.
    pub fn softmax_rows(&self) -> Tensor {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(out.cols) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        out
    }
}
