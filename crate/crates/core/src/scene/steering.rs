//! Array, delay and Doppler response vectors.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

/// Planar array response `a_y(μ) ⊗ a_z(ψ)` with half-wavelength spacing.
/// Entry `y * n_z + z` is `exp(-j (y μ + z ψ))`.
pub fn upa_steering(mu: f64, psi: f64, n_y: usize, n_z: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(n_y * n_z);
    for y in 0..n_y {
        for z in 0..n_z {
            out.push(C64::from_polar(1.0, -(y as f64 * mu + z as f64 * psi)));
        }
    }
    out
}

/// `(μ, ψ) = (π sin φ sin θ, π cos φ)` for azimuth `φ` and elevation `θ`.
pub fn spatial_freqs(azimuth: f64, elevation: f64) -> (f64, f64) {
    (PI * azimuth.sin() * elevation.sin(), PI * azimuth.cos())
}

/// `c(τ)[q] = exp(-j 2π q Δf τ)`.
pub fn delay_vector(tau: f64, q: usize, delta_f: f64) -> Vec<C64> {
    (0..q).map(|k| C64::from_polar(1.0, -2.0 * PI * k as f64 * delta_f * tau)).collect()
}

/// `d(ν)[m] = exp(j 2π m T_s ν)`.
pub fn doppler_vector(nu: f64, m: usize, symbol_duration: f64) -> Vec<C64> {
    (0..m).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 * symbol_duration * nu)).collect()
}

/// `c ⊗ d`, the diagonal of the delay-Doppler weighting. Entry `m + M q`
/// belongs to symbol `m` on subcarrier `q`.
pub fn delay_doppler_weights(c: &[C64], d: &[C64]) -> Vec<C64> {
    c.iter().flat_map(|&cq| d.iter().map(move |&dm| cq * dm)).collect()
}
