//! Dense row-major tensors and the float abstraction used across the crate.
//!
//! Training runs at `f32` (the checkpoint precision); tests that compare
//! against finite differences instantiate the same code at `f64`.

use crate::error::{Error, Result};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Scalar type bound for everything numeric in the crate.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

/// Convert an `f64` constant into `F`.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("constant not representable")
}

/// Dense tensor; values in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {:?} needs {} values, got {}", shape, numel, data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![F::zero(); numel],
        }
    }

    pub fn scalar(v: F) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn filled(shape: Vec<usize>, v: F) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![v; numel],
        }
    }

    /// Row vector `[1, n]` from a slice.
    pub fn row(values: &[F]) -> Self {
        Tensor {
            shape: vec![1, values.len()],
            data: values.to_vec(),
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Rows of a 2-D tensor; 1-D tensors count as a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            2 => self.shape[0],
            _ => panic!("rows() on tensor of rank {}", self.shape.len()),
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            1 => self.shape[0],
            2 => self.shape[1],
            _ => panic!("cols() on tensor of rank {}", self.shape.len()),
        }
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn row_slice(&self, r: usize) -> &[F] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn item(&self) -> F {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    /// Cast element type; used when moving between train (`f32`) and
    /// test (`f64`) precision and when serializing checkpoints.
    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| G::from_f64(v.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }
}

/// `out = a (m×k) · b (k×n)`, row-major, fixed ikj loop order.
pub(crate) fn matmul<F: Real>(a: &[F], m: usize, k: usize, b: &[F], n: usize, out: &mut [F]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for v in out.iter_mut() {
        *v = F::zero();
    }
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == F::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `out += a (m×k) · bᵀ` where `b` is `n×k`.
pub(crate) fn matmul_nt_acc<F: Real>(
    a: &[F],
    m: usize,
    k: usize,
    b: &[F],
    n: usize,
    out: &mut [F],
) {
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = F::zero();
            for (&av, &bv) in arow.iter().zip(brow.iter()) {
                s = s + av * bv;
            }
            out[i * n + j] = out[i * n + j] + s;
        }
    }
}

/// `out += aᵀ (k×m) · b (m→? )`: `a` is `m×k`, `b` is `m×n`, out is `k×n`.
pub(crate) fn matmul_tn_acc<F: Real>(
    a: &[F],
    m: usize,
    k: usize,
    b: &[F],
    n: usize,
    out: &mut [F],
) {
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == F::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o = *o + av * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_basic() {
        // 2x3 of ones times 3x1 of ones -> 2x1 of threes
        let a = vec![1.0f64; 6];
        let b = vec![1.0f64; 3];
        let mut out = vec![0.0f64; 2];
        matmul(&a, 2, 3, &b, 1, &mut out);
        assert_eq!(out, vec![3.0, 3.0]);
    }

    #[test]
    fn matmul_transposed_variants_agree() {
        let a = vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = vec![7.0f64, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let mut ab = vec![0.0f64; 4];
        matmul(&a, 2, 3, &b, 2, &mut ab);

        // a · (bᵀ)ᵀ via matmul_nt_acc with bt = transpose(b) (2x3)
        let bt = vec![7.0f64, 9.0, 11.0, 8.0, 10.0, 12.0];
        let mut ab2 = vec![0.0f64; 4];
        matmul_nt_acc(&a, 2, 3, &bt, 2, &mut ab2);
        assert_eq!(ab, ab2);

        // (aᵀ)ᵀ · b via matmul_tn_acc with at = transpose(a) (3x2)
        let at = vec![1.0f64, 4.0, 2.0, 5.0, 3.0, 6.0];
        let mut ab3 = vec![0.0f64; 4];
        matmul_tn_acc(&at, 3, 2, &b, 2, &mut ab3);
        assert_eq!(ab, ab3);
    }

    #[test]
    fn tensor_shape_mismatch_rejected() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
    }
}
