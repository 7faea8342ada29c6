/// Dense row-major f64 matrix used for activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Columns `start..start + width` as a new matrix.
    pub(crate) fn columns(&self, start: usize, width: usize) -> Mat {
        let mut out = Mat::zeros(self.rows, width);
        for i in 0..self.rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(i)[start..start + width]);
        }
        out
    }

    pub(crate) fn add_columns(&mut self, start: usize, part: &Mat) {
        for i in 0..self.rows {
            for (dst, src) in self.row_mut(i)[start..start + part.cols]
                .iter_mut()
                .zip(part.row(i))
            {
                *dst += src;
            }
        }
    }

    pub(crate) fn set_columns(&mut self, start: usize, part: &Mat) {
        for i in 0..self.rows {
            self.row_mut(i)[start..start + part.cols].copy_from_slice(part.row(i));
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self * other`.
    pub(crate) fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (dst, &b) in o.iter_mut().zip(other.row(k)) {
                    *dst += aik * b;
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub(crate) fn matmul_t(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols);
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(self.row(i), other.row(j));
            }
        }
        out
    }

    /// `self^T * other`.
    pub(crate) fn t_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (dst, &b) in out.row_mut(i).iter_mut().zip(other.row(k)) {
                    *dst += a * b;
                }
            }
        }
        out
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major `(out, in)` weight matrix viewed as a `Mat`.
pub(crate) fn weight(data: &[f64], out: usize, inp: usize) -> Mat {
    Mat::from_vec(out, inp, data.to_vec())
}

/// `x * w^T + b` for a `(out, in)` weight.
pub(crate) fn linear(x: &Mat, w: &Mat, bias: Option<&[f64]>) -> Mat {
    let mut y = x.matmul_t(w);
    if let Some(b) = bias {
        for i in 0..y.rows() {
            for (v, bb) in y.row_mut(i).iter_mut().zip(b) {
                *v += bb;
            }
        }
    }
    y
}

/// Accumulates weight (and bias) gradients of `linear` and returns the
/// input gradient.
pub(crate) fn linear_backward(
    dy: &Mat,
    x: &Mat,
    w: &Mat,
    dw: &mut [f64],
    db: Option<&mut [f64]>,
) -> Mat {
    let gw = dy.t_matmul(x);
    for (a, b) in dw.iter_mut().zip(gw.as_slice()) {
        *a += b;
    }
    if let Some(db) = db {
        for i in 0..dy.rows() {
            for (a, b) in db.iter_mut().zip(dy.row(i)) {
                *a += b;
            }
        }
    }
    dy.matmul(w)
}
