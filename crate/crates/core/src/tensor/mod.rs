//! Dense complex tensors.
//!
//! Every tensor and matrix in this crate stores its entries with the FIRST
//! index varying fastest (column-major for matrices, which is also what
//! `nalgebra` uses). Modes are zero-based: mode 0 is the first mode.
//!
//! The mode-`n` unfolding places entry `(i_0, .., i_{D-1})` in row `i_n` and in
//! a column whose index is formed from the remaining modes with the lowest
//! mode varying fastest. With that convention a Tucker tensor
//! `C x_0 U_0 x_1 U_1 ... x_{D-1} U_{D-1}` satisfies
//!
//! ```text
//! [A]_(n) = U_n [C]_(n) (U_{D-1} ⊗ ... ⊗ U_{n+1} ⊗ U_{n-1} ⊗ ... ⊗ U_0)^T
//! ```
//!
//! where `⊗` is the standard Kronecker product (second factor fastest).

mod linalg;

pub use linalg::{
    diag, hadamard, identity, khatri_rao, kronecker, lstsq, pinv, svd, unvec, vec, Pinv, Svd, DEFAULT_PINV_TOL,
};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<C64>;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

/// Splits `shape` around `mode` into (product before, extent, product after).
fn split_shape(shape: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = shape[..mode].iter().product();
    let right = shape[mode + 1..].iter().product();
    (left, shape[mode], right)
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("extents must be positive, got {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {len} entries, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![C64::new(0.0, 0.0); len] }
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let len: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (i, &e) in idx.iter_mut().zip(shape) {
                *i += 1;
                if *i < e {
                    break;
                }
                *i = 0;
            }
        }
        Self { shape: shape.to_vec(), data }
    }

    /// Views a matrix as an order-2 tensor.
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        Self { shape: vec![m.nrows(), m.ncols()], data: m.as_slice().to_vec() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &e) in idx.iter().zip(&self.shape) {
            debug_assert!(i < e);
            lin += i * stride;
            stride *= e;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let lin = self.linear_index(idx);
        self.data[lin] = value;
    }

    /// Same data under a different shape with the same number of entries.
    pub fn reshaped(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&z| z * factor).collect() }
    }

    /// `‖self - other‖_F²`.
    pub fn diff_norm_sq(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::InvalidMode { mode, order: self.order() });
        }
        Ok(())
    }

    /// All entries as a `1 x len` row, i.e. the unfolding along a trailing
    /// singleton mode.
    pub fn to_row(&self) -> ComplexMatrix {
        ComplexMatrix::from_row_slice(1, self.len(), &self.data)
    }

    /// All entries as a `len x 1` column.
    pub fn to_column(&self) -> ComplexMatrix {
        ComplexMatrix::from_column_slice(self.len(), 1, &self.data)
    }

    /// Mode-`mode` unfolding `[A]_(mode)`.
    pub fn unfold(&self, mode: usize) -> Result<ComplexMatrix> {
        self.check_mode(mode)?;
        let (left, mid, right) = split_shape(&self.shape, mode);
        let mut out = ComplexMatrix::zeros(mid, left * right);
        let dst = out.as_mut_slice();
        // Column c = a + left * b lives at dst[i + mid * c].
        for b in 0..right {
            for i in 0..mid {
                let src = &self.data[left * (i + mid * b)..][..left];
                for (a, &v) in src.iter().enumerate() {
                    dst[i + mid * (a + left * b)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`ComplexTensor::unfold`].
    pub fn fold(m: &ComplexMatrix, mode: usize, shape: &[usize]) -> Result<Self> {
        if mode >= shape.len() {
            return Err(Error::InvalidMode { mode, order: shape.len() });
        }
        let (left, mid, right) = split_shape(shape, mode);
        if m.nrows() != mid || m.ncols() != left * right {
            return Err(Error::Shape(format!(
                "cannot fold a {}x{} matrix along mode {mode} into {shape:?}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut out = Self::zeros(shape);
        let src = m.as_slice();
        for b in 0..right {
            for i in 0..mid {
                let dst = &mut out.data[left * (i + mid * b)..][..left];
                for (a, v) in dst.iter_mut().enumerate() {
                    *v = src[i + mid * (a + left * b)];
                }
            }
        }
        Ok(out)
    }

    /// Mode product `A x_mode B`, defined by `[A x_n B]_(n) = B [A]_(n)`.
    pub fn mode_product(&self, b: &ComplexMatrix, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let (left, mid, right) = split_shape(&self.shape, mode);
        if b.ncols() != mid {
            return Err(Error::Shape(format!(
                "mode-{mode} product needs {mid} columns, factor is {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let rows = b.nrows();
        let mut shape = self.shape.clone();
        shape[mode] = rows;
        let mut out = Self::zeros(&shape);
        for blk in 0..right {
            let src = &self.data[left * mid * blk..][..left * mid];
            let dst = &mut out.data[left * rows * blk..][..left * rows];
            for i in 0..mid {
                let fiber = &src[left * i..][..left];
                for r in 0..rows {
                    let coeff = b[(r, i)];
                    if coeff == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let out_fiber = &mut dst[left * r..][..left];
                    for (o, &x) in out_fiber.iter_mut().zip(fiber) {
                        *o += coeff * x;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Applies a mode product on each listed mode in turn.
    pub fn multi_mode_product(&self, factors: &[(&ComplexMatrix, usize)]) -> Result<Self> {
        let mut acc = self.clone();
        for &(f, mode) in factors {
            acc = acc.mode_product(f, mode)?;
        }
        Ok(acc)
    }
}

/// The known core of the nested Tucker model: shape `N x N x N⁴ x N²`, with
/// `[core]_(2)` (third mode) equal to the `N⁴ x N⁴` identity.
///
/// Entry `(i1, i2, i3, i4)` is one exactly when `i3 = i1 + N i2 + N² i4`.
pub fn build_core(n: usize) -> ComplexTensor {
    let n2 = n * n;
    let n4 = n2 * n2;
    let mut core = ComplexTensor::zeros(&[n, n, n4, n2]);
    for i4 in 0..n2 {
        for i2 in 0..n {
            for i1 in 0..n {
                core.set(&[i1, i2, i1 + n * i2 + n2 * i4, i4], C64::new(1.0, 0.0));
            }
        }
    }
    core
}
