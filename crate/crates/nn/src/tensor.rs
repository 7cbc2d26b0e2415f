//! Dense row-major f64 tensors and the eager kernels the graph builds on.
//!
//! Everything the model needs is two-dimensional; a rank-1 tensor of
//! length n behaves as a 1×n row.

use crate::error::{NnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || n != data.len() {
            return Err(NnError::shape("new", &shape, &[data.len()]));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            shape: vec![rows, cols],
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            shape: vec![rows, cols],
            data: vec![v; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NnError::shape("from_rows", &[rows.len(), cols], &[]));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    /// A 1×n row.
    pub fn row_vector(v: Vec<f64>) -> Self {
        Self {
            shape: vec![1, v.len()],
            data: v,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self::row_vector(vec![v])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        if self.shape.len() == 1 {
            1
        } else {
            self.shape[0]
        }
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    /// The value of a 1×1 tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn dims(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(NnError::shape(op, &self.shape, &other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = self.dims();
        let mut out = Tensor::zeros(c, r);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, k) = a.dims();
    let (k2, m) = b.dims();
    if k != k2 {
        return Err(NnError::shape("matmul", &a.shape, &b.shape));
    }
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(Tensor {
        shape: vec![n, m],
        data: out,
    })
}

/// aᵀ·b without materialising the transpose.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (k, n) = a.dims();
    let (k2, m) = b.dims();
    if k != k2 {
        return Err(NnError::shape("matmul_tn", &a.shape, &b.shape));
    }
    let mut out = vec![0.0; n * m];
    for p in 0..k {
        let brow = &b.data[p * m..(p + 1) * m];
        for i in 0..n {
            let av = a.data[p * n + i];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * m..(i + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(Tensor {
        shape: vec![n, m],
        data: out,
    })
}

/// a·bᵀ without materialising the transpose.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, k) = a.dims();
    let (m, k2) = b.dims();
    if k != k2 {
        return Err(NnError::shape("matmul_nt", &a.shape, &b.shape));
    }
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = &a.data[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &b.data[j * k..(j + 1) * k];
            out[i * m + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    Ok(Tensor {
        shape: vec![n, m],
        data: out,
    })
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.zip(b, "add", |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.zip(b, "sub", |x, y| x - y)
}

pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.zip(b, "hadamard", |x, y| x * y)
}

/// Add a 1×c row to every row of an r×c tensor.
pub fn add_row(a: &Tensor, row: &Tensor) -> Result<Tensor> {
    if row.rows() != 1 || row.cols() != a.cols() {
        return Err(NnError::shape("add_row", &a.shape, &row.shape));
    }
    let mut out = a.clone();
    let c = a.cols();
    for chunk in out.data.chunks_mut(c) {
        for (o, b) in chunk.iter_mut().zip(&row.data) {
            *o += b;
        }
    }
    Ok(out)
}

/// Concatenate along rows (axis 0) or columns (axis 1).
pub fn concat(a: &Tensor, b: &Tensor, axis: usize) -> Result<Tensor> {
    let (ar, ac) = a.dims();
    let (br, bc) = b.dims();
    match axis {
        0 if ac == bc => {
            let mut data = a.data.clone();
            data.extend_from_slice(&b.data);
            Ok(Tensor {
                shape: vec![ar + br, ac],
                data,
            })
        }
        1 if ar == br => {
            let mut data = Vec::with_capacity(a.len() + b.len());
            for i in 0..ar {
                data.extend_from_slice(a.row(i));
                data.extend_from_slice(b.row(i));
            }
            Ok(Tensor {
                shape: vec![ar, ac + bc],
                data,
            })
        }
        _ => Err(NnError::shape("concat", &a.shape, &b.shape)),
    }
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(a: &Tensor) -> Tensor {
    a.map(sigmoid_scalar)
}

pub fn tanh(a: &Tensor) -> Tensor {
    a.map(f64::tanh)
}

/// Stable log Σ exp over a slice; −∞ for an empty slice.
pub fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softmax_slice(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn along_axis(a: &Tensor, axis: usize, op: &'static str) -> Result<()> {
    if axis > 1 {
        return Err(NnError::shape(op, &a.shape, &[axis]));
    }
    Ok(())
}

/// Softmax along `axis` (0: each column, 1: each row).
pub fn softmax(a: &Tensor, axis: usize) -> Result<Tensor> {
    along_axis(a, axis, "softmax")?;
    if axis == 0 {
        return Ok(softmax(&a.transpose(), 1)?.transpose());
    }
    let mut out = a.clone();
    let c = a.cols();
    for chunk in out.data.chunks_mut(c) {
        let s = softmax_slice(chunk);
        chunk.copy_from_slice(&s);
    }
    Ok(out)
}

/// log Σ exp along `axis`: r×c → r×1 (axis 1) or 1×c (axis 0).
pub fn log_sum_exp(a: &Tensor, axis: usize) -> Result<Tensor> {
    along_axis(a, axis, "log_sum_exp")?;
    if axis == 0 {
        return Ok(log_sum_exp(&a.transpose(), 1)?.transpose());
    }
    let data: Vec<f64> = a.data.chunks(a.cols()).map(lse).collect();
    Ok(Tensor {
        shape: vec![a.rows(), 1],
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(sigmoid(&Tensor::scalar(0.0)).item(), Some(0.5));
        assert_eq!(tanh(&Tensor::scalar(0.0)).item(), Some(0.0));
        assert_eq!(sigmoid_scalar(-800.0), 0.0);
        assert_eq!(sigmoid_scalar(800.0), 1.0);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        for c in [-1e6, 0.0, 3.5, 1e6] {
            let s = softmax(&Tensor::row_vector(vec![c, c, c]), 1).unwrap();
            for v in s.data() {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lse_does_not_overflow() {
        let v = log_sum_exp(&Tensor::row_vector(vec![1000.0, 1000.0]), 1).unwrap();
        assert!((v.item().unwrap() - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn axis_zero_matches_transpose() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.0]]).unwrap();
        let s0 = softmax(&a, 0).unwrap();
        for c in 0..2 {
            let col: f64 = (0..3).map(|r| s0.get(r, c)).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
        assert_eq!(log_sum_exp(&a, 0).unwrap().shape(), &[1, 2]);
        assert_eq!(log_sum_exp(&a, 1).unwrap().shape(), &[3, 1]);
    }

    #[test]
    fn matmul_and_variants() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[4.0, 5.0, 10.0, 11.0]);
        assert_eq!(matmul_tn(&a.transpose(), &b).unwrap(), c);
        assert_eq!(matmul_nt(&a, &b.transpose()).unwrap(), c);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 3);
        let msg = matmul(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.matches("[2, 3]").count() == 2, "{msg}");
        assert!(add(&a, &Tensor::zeros(3, 2)).is_err());
        assert!(concat(&a, &Tensor::zeros(3, 2), 1).is_err());
        assert!(hadamard(&a, &Tensor::zeros(1, 3)).is_err());
    }

    #[test]
    fn concat_axes() {
        let a = Tensor::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(concat(&a, &b, 1).unwrap().data(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(concat(&a, &b, 0).unwrap().shape(), &[4, 1]);
    }

    #[test]
    fn construction_validates() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
        assert_eq!(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap().rows(), 1);
    }
}
