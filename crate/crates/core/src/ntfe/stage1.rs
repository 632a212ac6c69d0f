use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::NestedTuckerModel;
use super::{check_finite, converged, BalsOptions};
use crate::error::{Error, Result};
use crate::tensor::{lstsq, ComplexMatrix, ComplexTensor};

#[derive(Clone, Debug)]
pub struct Stage1Result {
    /// `MQ x N` delay-Doppler factor, up to a scalar.
    pub f1: ComplexMatrix,
    /// `1 x N²` angle row, up to the reciprocal scalar.
    pub p_prime: ComplexMatrix,
    /// `‖Y - Ŷ‖² / ‖Y‖²` at the initialization and after each iteration.
    pub error_trace: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn complex_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Alternates exact least-squares updates of the delay-Doppler factor and the
/// angle row of the nested Tucker model until the normalized residual settles.
pub fn stage1_bals(y: &ComplexTensor, model: &NestedTuckerModel, opts: &BalsOptions) -> Result<Stage1Result> {
    let n = model.group_size();
    let (l, t) = (model.antennas(), model.slots());
    let shape = y.shape();
    if shape.len() != 3 || shape[0] != l || shape[2] != t {
        return Err(Error::Shape(format!("echo of shape {shape:?} does not match L = {l}, T = {t}")));
    }
    let mq = shape[1];
    if l * t < n || l * mq * t < n * n {
        return Err(Error::Identifiability(format!(
            "need LT >= N and LMQT >= N², got L = {l}, MQ = {mq}, T = {t}, N = {n}"
        )));
    }
    let energy = y.norm_sq();
    if energy == 0.0 {
        return Err(Error::Degenerate("echo tensor is zero".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut f1 = complex_normal(&mut rng, mq, n);
    let mut p_prime = complex_normal(&mut rng, 1, n * n);
    // Both updates are solved in transposed form, F1ᵀ = pinv(P₁ᵀ) [Y]_(1)ᵀ and
    // p′ᵀ = pinv(P₂ᵀ) vec(Y), which equals the right pseudoinverse products.
    let y2_t = y.unfold(1)?.transpose();
    let y_col = y.to_column();
    // Rescaling the random start by its least-squares gain only changes the
    // recorded initial error; every later iterate is scale free.
    let start = model.delay_doppler_design_t(&f1)? * p_prime.transpose();
    let fit = start.dotc(&y_col) / start.norm_squared();
    if fit.is_finite() && fit.norm() > 0.0 {
        p_prime *= fit;
    }
    let initial = (&y_col - start * fit).norm_squared() / energy;
    let mut trace = vec![initial];
    for _ in 0..opts.i_max {
        let p1 = model.angle_design(&p_prime)?;
        f1 = lstsq(&p1.transpose(), &y2_t, opts.pinv_tol)?.matrix.transpose();
        let p2_t = model.delay_doppler_design_t(&f1)?;
        let p_col = lstsq(&p2_t, &y_col, opts.pinv_tol)?.matrix;
        let misfit = (&y_col - &p2_t * &p_col).norm_squared() / energy;
        p_prime = p_col.transpose();
        check_finite(misfit, "stage 1")?;
        trace.push(misfit);
        if converged(&trace, opts.delta) {
            break;
        }
    }
    Ok(Stage1Result { f1, p_prime, iterations: trace.len() - 1, error_trace: trace })
}
