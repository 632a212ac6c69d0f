//! Structured matrix products and the SVD pseudoinverse.

use faer::complex_native::c64;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::ComplexMatrix;
use crate::error::{Error, Result};

/// Relative singular value cutoff used by every least-squares update.
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

pub fn identity(n: usize) -> ComplexMatrix {
    DMatrix::identity(n, n)
}

/// Diagonal matrix `D(v)`.
pub fn diag(v: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

/// `A ⊗ B` with the second factor's index varying fastest, so that
/// `vec(A B C) = (Cᵀ ⊗ A) vec(B)`.
pub fn kronecker(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Column-wise Kronecker product, `vec(A D(b) C) = (Cᵀ ⋄ A) b`.
pub fn khatri_rao(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!("khatri-rao needs equal column counts, got {} and {}", a.ncols(), b.ncols())));
    }
    let rows = b.nrows();
    Ok(ComplexMatrix::from_fn(a.nrows() * rows, a.ncols(), |r, k| a[(r / rows, k)] * b[(r % rows, k)]))
}

pub fn hadamard(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("hadamard of {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(a.component_mul(b))
}

/// Stacks the columns of `a` into one column.
pub fn vec(a: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(a.len(), 1, a.as_slice())
}

/// Inverse of [`vec`]: reads `v` (any vector shape) column-major into `rows x cols`.
pub fn unvec(v: &ComplexMatrix, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if v.len() != rows * cols {
        return Err(Error::Shape(format!("cannot unvec {} entries into {rows}x{cols}", v.len())));
    }
    Ok(ComplexMatrix::from_column_slice(rows, cols, v.as_slice()))
}

#[derive(Clone, Debug)]
pub struct Pinv {
    pub matrix: ComplexMatrix,
    /// Number of singular values kept.
    pub rank: usize,
}

/// Moore–Penrose pseudoinverse through the SVD. Singular values below
/// `tol * σ_max` are treated as zero.
///
/// Strongly rectangular inputs are first reduced by a thin QR factorization
/// of the long side, so only a small square SVD is needed.
pub fn pinv(m: &ComplexMatrix, tol: f64) -> Pinv {
    let (rows, cols) = m.shape();
    if m.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Pinv { matrix: ComplexMatrix::zeros(cols, rows), rank: 0 };
    }
    if rows >= 4 * cols {
        // M = Q R, so M⁺ = R⁺ Qᴴ.
        let qr = m.clone().qr();
        let inner = pinv_svd(&qr.r(), tol);
        return Pinv { matrix: inner.matrix * qr.q().adjoint(), rank: inner.rank };
    }
    if cols >= 4 * rows {
        // Mᴴ = Q R, so M⁺ = Q (Rᴴ)⁺.
        let qr = m.adjoint().qr();
        let inner = pinv_svd(&qr.r().adjoint(), tol);
        return Pinv { matrix: qr.q() * inner.matrix, rank: inner.rank };
    }
    pinv_svd(m, tol)
}

/// Thin SVD `M = U diag(σ) Vᴴ`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Thin SVD computed with faer; nalgebra's complex SVD loses accuracy on
/// badly scaled inputs.
pub fn svd(m: &ComplexMatrix) -> Svd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Svd { u: ComplexMatrix::zeros(rows, 0), singular_values: Vec::new(), v: ComplexMatrix::zeros(cols, 0) };
    }
    let to_faer = |z: C64| c64::new(z.re, z.im);
    let from_faer = |z: c64| C64::new(z.re, z.im);
    let fm = faer::Mat::<c64>::from_fn(rows, cols, |i, j| to_faer(m[(i, j)]));
    let dec = fm.thin_svd();
    let (fu, fs, fv) = (dec.u(), dec.s_diagonal(), dec.v());
    Svd {
        u: ComplexMatrix::from_fn(rows, k, |i, j| from_faer(fu.read(i, j))),
        singular_values: (0..k).map(|i| fs.read(i).re).collect(),
        v: ComplexMatrix::from_fn(cols, k, |i, j| from_faer(fv.read(i, j))),
    }
}

fn pinv_svd(m: &ComplexMatrix, tol: f64) -> Pinv {
    let (rows, cols) = m.shape();
    let Svd { u, singular_values: sigma, v } = svd(m);
    let cutoff = tol * sigma.iter().cloned().fold(0.0, f64::max);
    let mut out = ComplexMatrix::zeros(cols, rows);
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        rank += 1;
        // out += v_k (1/s) u_kᴴ.
        let inv = 1.0 / s;
        for j in 0..rows {
            let uk = u[(j, k)].conj() * inv;
            for i in 0..cols {
                out[(i, j)] += v[(i, k)] * uk;
            }
        }
    }
    Pinv { matrix: out, rank }
}

/// Minimum-norm least-squares solution of `A X ≈ B`, i.e. `pinv(A) B` with
/// the same relative singular value cutoff as [`pinv`]. Tall systems are
/// solved through a QR factorization without forming the pseudoinverse.
pub fn lstsq(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> Result<Pinv> {
    let (rows, cols) = a.shape();
    if b.nrows() != rows {
        return Err(Error::Shape(format!(
            "least squares with a {rows}x{cols} system and {} right-hand rows",
            b.nrows()
        )));
    }
    if rows < 4 * cols || a.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        let p = pinv(a, tol);
        return Ok(Pinv { matrix: p.matrix * b, rank: p.rank });
    }
    let qr = a.clone().qr();
    let mut rhs = b.clone();
    qr.q_tr_mul(&mut rhs);
    let inner = pinv_svd(&qr.r(), tol);
    Ok(Pinv { matrix: inner.matrix * rhs.rows(0, cols), rank: inner.rank })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_matrix(r: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, cols, |_, _| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
    }

    fn rel(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn kronecker_of_columns() {
        let a = ComplexMatrix::from_column_slice(2, 1, &[c(1.), c(2.)]);
        let b = ComplexMatrix::from_column_slice(2, 1, &[c(1.), c(10.)]);
        let expected = ComplexMatrix::from_column_slice(4, 1, &[c(1.), c(10.), c(2.), c(20.)]);
        assert_eq!(kronecker(&a, &b), expected);
    }

    #[test]
    fn vec_of_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = random_matrix(2, 3, &mut rng);
            let b = random_matrix(3, 2, &mut rng);
            let cm = random_matrix(2, 2, &mut rng);
            let lhs = vec(&(&a * &b * &cm));
            let rhs = kronecker(&cm.transpose(), &a) * vec(&b);
            assert!(rel(&rhs, &lhs) <= 1e-13);
        }
    }

    #[test]
    fn vec_of_diagonal_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_matrix(3, 2, &mut rng);
            let bv = random_matrix(2, 1, &mut rng);
            let cm = random_matrix(2, 3, &mut rng);
            let lhs = vec(&(&a * diag(bv.as_slice()) * &cm));
            let rhs = khatri_rao(&cm.transpose(), &a).unwrap() * &bv;
            assert!(rel(&rhs, &lhs) <= 1e-13);
        }
    }

    #[test]
    fn khatri_rao_and_hadamard_shape_errors() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 2);
        assert!(matches!(khatri_rao(&a, &b), Err(Error::Shape(_))));
        assert!(matches!(hadamard(&a, &b), Err(Error::Shape(_))));
        assert!(matches!(unvec(&vec(&a), 4, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn unvec_inverts_vec() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(3, 4, &mut rng);
        assert_eq!(unvec(&vec(&a), 3, 4).unwrap(), a);
    }

    #[test]
    fn pinv_of_identity() {
        let p = pinv(&identity(4), DEFAULT_PINV_TOL);
        assert!(rel(&p.matrix, &identity(4)) < 1e-15);
        assert_eq!(p.rank, 4);
    }

    #[test]
    fn pinv_of_orthonormal_rows_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_matrix(5, 3, &mut rng).qr().q(); // 5x3, orthonormal columns
        let m = q.adjoint(); // 3x5, orthonormal rows
        let p = pinv(&m, DEFAULT_PINV_TOL);
        assert!(rel(&p.matrix, &q) < 1e-13);
    }

    #[test]
    fn pinv_of_rank_one() {
        let m = ComplexMatrix::from_element(2, 2, c(1.0));
        let p = pinv(&m, DEFAULT_PINV_TOL);
        assert_eq!(p.rank, 1);
        assert!(rel(&p.matrix, &ComplexMatrix::from_element(2, 2, c(0.25))) < 1e-14);
    }

    #[test]
    fn pinv_of_zero_matrix() {
        let p = pinv(&ComplexMatrix::zeros(2, 3), DEFAULT_PINV_TOL);
        assert_eq!(p.rank, 0);
        assert_eq!(p.matrix.shape(), (3, 2));
    }

    #[test]
    fn svd_reconstructs_at_any_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for scale in [1e-12, 1e-8, 0.37, 1.0, 1e6] {
            let m = random_matrix(5, 2, &mut rng) * random_matrix(2, 4, &mut rng) * c(scale);
            let dec = svd(&m);
            let sigma = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                4,
                dec.singular_values.iter().map(|&s| c(s)),
            ));
            let back = &dec.u * sigma * dec.v.adjoint();
            assert!(rel(&back, &m) <= 1e-13, "scale {scale}");
            assert!(dec.singular_values[2] <= 1e-14 * dec.singular_values[0]);
        }
    }

    #[test]
    fn lstsq_matches_pinv() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (r, cols, rank, scale) in [(80, 6, 6, 1.0), (80, 6, 3, 1e-9), (5, 4, 4, 1.0), (4, 9, 4, 1e-9)] {
            let a = random_matrix(r, rank, &mut rng) * random_matrix(rank, cols, &mut rng) * c(scale);
            let b = random_matrix(r, 2, &mut rng);
            let x = lstsq(&a, &b, DEFAULT_PINV_TOL).unwrap();
            let expected = pinv(&a, DEFAULT_PINV_TOL).matrix * &b;
            assert_eq!(x.rank, rank);
            assert!(rel(&x.matrix, &expected) <= 1e-10);
        }
        assert!(lstsq(&identity(3), &ComplexMatrix::zeros(2, 1), DEFAULT_PINV_TOL).is_err());
    }

    #[test]
    fn penrose_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (r, cols, rank) in
            [(6, 4, 4), (4, 7, 4), (6, 6, 3), (3, 9, 2), (40, 5, 5), (3, 50, 3), (4, 60, 2), (70, 6, 3)]
        {
            let m = random_matrix(r, rank, &mut rng) * random_matrix(rank, cols, &mut rng);
            let p = pinv(&m, DEFAULT_PINV_TOL);
            assert_eq!(p.rank, rank);
            let x = &p.matrix;
            assert!(rel(&(&m * x * &m), &m) <= 1e-10);
            assert!(rel(&(x * &m * x), x) <= 1e-10);
            let mx = &m * x;
            assert!(rel(&mx.adjoint(), &mx) <= 1e-10);
            let xm = x * &m;
            assert!(rel(&xm.adjoint(), &xm) <= 1e-10);
        }
    }
}
