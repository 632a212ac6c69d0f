use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stage1::complex_normal;
use super::{check_finite, converged, BalsOptions};
use crate::error::{Error, Result};
use crate::scene::PilotSet;
use crate::tensor::{diag, identity, khatri_rao, pinv, vec, ComplexMatrix, ComplexTensor};

#[derive(Clone, Debug)]
pub struct Stage2Result {
    /// Doppler steering estimate `λ₃ d`.
    pub doppler: Vec<C64>,
    /// Delay steering estimate `λ₄ c`.
    pub delay: Vec<C64>,
    /// `‖F̂ - F̂(i)‖² / ‖F̂‖²` at the initialization and after each iteration.
    pub error_trace: Vec<f64>,
    pub iterations: usize,
}

/// Splits the `MQ x N` stage-one factor into Doppler and delay steering
/// vectors by alternating least squares on `F̂ ≈ (X x_0 Gᵀ) x_1 D(d) x_2 D(c)`.
pub fn stage2_bals(
    f1: &ComplexMatrix,
    g: &ComplexMatrix,
    pilots: &PilotSet,
    opts: &BalsOptions,
) -> Result<Stage2Result> {
    let x = pilots.tensor();
    let (m, q) = (x.shape()[1], x.shape()[2]);
    let n = g.ncols();
    if f1.nrows() != m * q || f1.ncols() != n || g.nrows() != x.shape()[0] {
        return Err(Error::Shape(format!(
            "stage-one factor {}x{} does not match MQ = {}, N = {n}",
            f1.nrows(),
            f1.ncols(),
            m * q
        )));
    }
    let target = ComplexTensor::fold(&f1.transpose(), 0, &[n, m, q])?;
    let energy = target.norm_sq();
    if energy == 0.0 {
        return Err(Error::Degenerate("stage-one factor is zero".into()));
    }
    let xg = x.mode_product(&g.transpose(), 0)?;
    let rhs_d = vec(&target.unfold(1)?);
    let rhs_c = vec(&target.unfold(2)?);
    let (eye_m, eye_q) = (identity(m), identity(q));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(1);
    let mut d = complex_normal(&mut rng, m, 1);
    let mut c = complex_normal(&mut rng, q, 1);
    let start = xg.mode_product(&diag(d.as_slice()), 1)?.mode_product(&diag(c.as_slice()), 2)?;
    let start_col = start.to_column();
    let fit = start_col.dotc(&target.to_column()) / start.norm_sq();
    if fit.is_finite() && fit.norm() > 0.0 {
        c *= fit;
    }
    let mut trace = vec![target.diff_norm_sq(&start.scaled(fit))? / energy];
    for _ in 0..opts.i_max {
        let b_d = xg.mode_product(&diag(c.as_slice()), 2)?.unfold(1)?;
        d = pinv(&khatri_rao(&b_d.transpose(), &eye_m)?, opts.pinv_tol).matrix * &rhs_d;
        let with_d = xg.mode_product(&diag(d.as_slice()), 1)?;
        let b_c = with_d.unfold(2)?;
        c = pinv(&khatri_rao(&b_c.transpose(), &eye_q)?, opts.pinv_tol).matrix * &rhs_c;
        let fit = with_d.mode_product(&diag(c.as_slice()), 2)?;
        let misfit = target.diff_norm_sq(&fit)? / energy;
        check_finite(misfit, "stage 2")?;
        trace.push(misfit);
        if converged(&trace, opts.delta) {
            break;
        }
    }
    Ok(Stage2Result {
        doppler: d.as_slice().to_vec(),
        delay: c.as_slice().to_vec(),
        iterations: trace.len() - 1,
        error_trace: trace,
    })
}
