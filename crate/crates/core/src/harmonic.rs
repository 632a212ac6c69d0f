//! Shift-invariance frequency estimation for single exponentials.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::{svd, ComplexMatrix};

/// Below this `sin φ̂` the elevation cannot be separated from `μ̂`.
pub const MIN_SIN_AZIMUTH: f64 = 1e-6;

/// Rank-one energy share below which the angle subspace is flagged.
pub const MIN_RANK_ONE_RATIO: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToneEstimate {
    /// Radians per sample, in `(-π, π]`.
    pub omega: f64,
    /// `‖v[1..] - ρ v[..n-1]‖² / ‖v‖²` for the fitted ratio `ρ`.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleEstimate {
    pub mu: f64,
    pub psi: f64,
    pub azimuth: f64,
    pub elevation: f64,
    /// `σ₁² / Σ σ²` of the input matrix.
    pub rank_one_ratio: f64,
}

impl AngleEstimate {
    pub fn is_reliable(&self) -> bool {
        self.rank_one_ratio >= MIN_RANK_ONE_RATIO
    }
}

/// Least-squares ratio `ρ` minimizing `Σ |b_k - ρ a_k|²` over the given pairs.
fn ls_ratio(pairs: impl Iterator<Item = (C64, C64)>) -> (C64, f64) {
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for (a, b) in pairs {
        num += a.conj() * b;
        den += a.norm_sqr();
    }
    (num, den)
}

fn principal_arg(z: C64) -> f64 {
    let w = z.arg();
    if w <= -PI {
        PI
    } else {
        w
    }
}

/// Frequency of a single complex exponential from the shift-invariance
/// equation `v[1..] ≈ ρ v[..n-1]`; `ω = arg ρ`.
pub fn single_tone(v: &[C64]) -> Result<ToneEstimate> {
    if v.len() < 2 {
        return Err(Error::Shape(format!("single_tone needs at least 2 samples, got {}", v.len())));
    }
    let (num, den) = ls_ratio(v.windows(2).map(|w| (w[0], w[1])));
    if den == 0.0 || num.norm() == 0.0 || !num.is_finite() {
        return Err(Error::Degenerate("no usable shift-invariance pair".into()));
    }
    let rho = num / den;
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let misfit: f64 = v.windows(2).map(|w| (w[1] - rho * w[0]).norm_sqr()).sum();
    Ok(ToneEstimate { omega: principal_arg(rho), residual: misfit / total })
}

/// Delay whose subcarrier phase step is `ω`, wrapped into `[0, 1/Δf)`.
pub fn tone_to_delay(omega: f64, delta_f: f64) -> f64 {
    let period = 1.0 / delta_f;
    let tau = (-omega / (2.0 * PI * delta_f)).rem_euclid(period);
    // rem_euclid may round up to the period itself.
    if tau >= period {
        0.0
    } else {
        tau
    }
}

/// Doppler whose symbol phase step is `ω`, wrapped into `[-1/(2T_s), 1/(2T_s))`.
pub fn tone_to_doppler(omega: f64, symbol_duration: f64) -> f64 {
    let period = 1.0 / symbol_duration;
    let nu = omega / (2.0 * PI * symbol_duration);
    let wrapped = (nu + period / 2.0).rem_euclid(period) - period / 2.0;
    if wrapped >= period / 2.0 {
        wrapped - period
    } else {
        wrapped
    }
}

/// Maps a phase from `(-π, π]` onto `[-π/2, 3π/2)`, so that noise pushing a
/// frequency near `π` past the branch cut lands next to `π` again.
fn unwrap_near_pi(x: f64) -> f64 {
    if x < -PI / 2.0 {
        x + 2.0 * PI
    } else {
        x
    }
}

/// Inverts `(μ, ψ) = (π sin φ sin θ, π cos φ)` inside the (0°, 90°) prior.
pub fn angles_from_spatial_freqs(mu: f64, psi: f64) -> Result<(f64, f64)> {
    let (mu, psi) = (unwrap_near_pi(mu), unwrap_near_pi(psi));
    let azimuth = (psi / PI).clamp(0.0, 1.0).acos();
    let sin_az = azimuth.sin();
    if sin_az < MIN_SIN_AZIMUTH {
        return Err(Error::ElevationUnrecoverable { sin_phi: sin_az });
    }
    let elevation = (mu / (PI * sin_az)).clamp(0.0, 1.0).asin();
    Ok((azimuth, elevation))
}

/// Two-dimensional angle extraction from a matrix close to `p pᵀ`, where
/// `p = a_y(μ) ⊗ a_z(ψ)` has `n_y * n_z` entries.
pub fn esprit_2d(p: &ComplexMatrix, n_y: usize, n_z: usize) -> Result<AngleEstimate> {
    let n = n_y * n_z;
    if p.nrows() != n || p.ncols() != n {
        return Err(Error::Shape(format!("angle matrix is {}x{}, expected {n}x{n}", p.nrows(), p.ncols())));
    }
    if n_y < 2 || n_z < 2 {
        return Err(Error::Degenerate(format!("a {n_z}x{n_y} grid has no shift pair along one axis")));
    }
    if !p.iter().all(|z| z.is_finite()) {
        return Err(Error::Divergence("non-finite angle matrix".into()));
    }
    let dec = svd(p);
    let sigma = &dec.singular_values;
    let energy: f64 = sigma.iter().map(|s| s * s).sum();
    if energy == 0.0 {
        return Err(Error::Degenerate("angle matrix is zero".into()));
    }
    let k = (0..sigma.len()).fold(0, |best, i| if sigma[i] > sigma[best] { i } else { best });
    let rank_one_ratio = sigma[k] * sigma[k] / energy;
    let u = dec.u.column(k).into_owned();
    // Entry y * n_z + z of u is grid cell (z, y).
    let cell = |z: usize, y: usize| u[y * n_z + z];
    let (num_z, _) =
        ls_ratio((0..n_y).flat_map(|y| (0..n_z - 1).map(move |z| (y, z))).map(|(y, z)| (cell(z, y), cell(z + 1, y))));
    let (num_y, _) =
        ls_ratio((0..n_y - 1).flat_map(|y| (0..n_z).map(move |z| (y, z))).map(|(y, z)| (cell(z, y), cell(z, y + 1))));
    if num_z.norm() == 0.0 || num_y.norm() == 0.0 {
        return Err(Error::Degenerate("dominant singular vector has no phase progression".into()));
    }
    let psi = -num_z.arg();
    let mu = -num_y.arg();
    let (azimuth, elevation) = angles_from_spatial_freqs(mu, psi)?;
    Ok(AngleEstimate { mu, psi, azimuth, elevation, rank_one_ratio })
}
