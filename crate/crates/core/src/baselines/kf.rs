use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::EffectiveChannel;
use crate::error::{Error, Result};
use crate::tensor::{kronecker, svd, unvec, ComplexMatrix};

/// Shapes of the three Kronecker factors `p′ᵀ ⊗ F ⊗ Gᵀ` of an effective channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KronDims {
    pub angle: (usize, usize),
    pub delay_doppler: (usize, usize),
    pub transmit: (usize, usize),
}

/// Which factorization the reassembled channel keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KfMode {
    /// `p′ᵀ ⊗ W` with `W` unstructured.
    #[default]
    Outer,
    /// `p′ᵀ ⊗ F ⊗ Gᵀ`.
    Nested,
}

#[derive(Clone, Debug)]
pub struct KronFactors {
    /// Unit Frobenius norm.
    pub angle: ComplexMatrix,
    /// Unit Frobenius norm.
    pub delay_doppler: ComplexMatrix,
    /// Carries the overall scale.
    pub transmit: ComplexMatrix,
    /// Best single split `angle ⊗ W`.
    pub outer: EffectiveChannel,
    /// `angle ⊗ delay_doppler ⊗ transmit`.
    pub nested: EffectiveChannel,
}

impl KronFactors {
    pub fn reassembled(&self, mode: KfMode) -> &EffectiveChannel {
        match mode {
            KfMode::Outer => &self.outer,
            KfMode::Nested => &self.nested,
        }
    }
}

/// Nearest Kronecker product `A ⊗ B` to `h` in Frobenius norm, with `A` of
/// shape `a_shape` scaled to unit norm.
///
/// Rearranging `h` so that block `(i, j)` becomes row `i + m₁ j` turns
/// `A ⊗ B` into the rank-one matrix `vec(A) vec(B)ᵀ`; the dominant singular
/// pair of the rearrangement is the optimum.
pub fn nearest_kronecker(
    h: &ComplexMatrix,
    a_shape: (usize, usize),
    b_shape: (usize, usize),
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let ((m1, n1), (m2, n2)) = (a_shape, b_shape);
    if h.shape() != (m1 * m2, n1 * n2) || m1 * n1 * m2 * n2 == 0 {
        return Err(Error::Shape(format!("{:?} does not factor as {a_shape:?} ⊗ {b_shape:?}", h.shape())));
    }
    let rearranged = ComplexMatrix::from_fn(m1 * n1, m2 * n2, |r, c| {
        let (i1, j1) = (r % m1, r / m1);
        let (i2, j2) = (c % m2, c / m2);
        h[(i1 * m2 + i2, j1 * n2 + j2)]
    });
    let dec = svd(&rearranged);
    let sigma = &dec.singular_values;
    let k = (0..sigma.len()).fold(0, |best, i| if sigma[i] > sigma[best] { i } else { best });
    let a = unvec(&dec.u.columns(k, 1).into_owned(), m1, n1)?;
    // rearranged ≈ σ u vᴴ, so vec(B) = σ conj(v).
    let b_vec = dec.v.columns(k, 1).map(|z| z.conj()) * C64::new(sigma[k], 0.0);
    let b = unvec(&b_vec, m2, n2)?;
    Ok((a, b))
}

/// Splits `h ≈ p′ᵀ ⊗ F ⊗ Gᵀ`: first the angle factor against the rest, then
/// the remainder into delay-Doppler and transmit factors.
pub fn kron_factorize(h: &EffectiveChannel, dims: KronDims) -> Result<KronFactors> {
    let rest_shape = (dims.delay_doppler.0 * dims.transmit.0, dims.delay_doppler.1 * dims.transmit.1);
    let (angle, rest) = nearest_kronecker(&h.matrix, dims.angle, rest_shape)?;
    let (delay_doppler, transmit) = nearest_kronecker(&rest, dims.delay_doppler, dims.transmit)?;
    let outer = EffectiveChannel { matrix: kronecker(&angle, &rest) };
    let nested = EffectiveChannel { matrix: kronecker(&angle, &kronecker(&delay_doppler, &transmit)) };
    Ok(KronFactors { angle, delay_doppler, transmit, outer, nested })
}
