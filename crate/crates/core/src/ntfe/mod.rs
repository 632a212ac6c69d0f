//! Nested Tucker factorization and parameter estimation.
//!
//! Stage one fits the nested Tucker model to the echo by bilinear
//! alternating least squares, separating a delay-Doppler factor from an
//! angle row. Stage two splits the delay-Doppler factor into its Doppler and
//! delay steering vectors. The tones of those vectors give delay and Doppler;
//! the delay-Doppler factor is then rebuilt without scaling ambiguity, the
//! angle matrix is re-estimated against it and handed to the 2D shift
//! invariance step, and a closed-form gain completes the estimate.

mod model;
mod stage1;
mod stage2;

pub use model::NestedTuckerModel;
pub use stage1::{stage1_bals, Stage1Result};
pub use stage2::{stage2_bals, Stage2Result};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{esprit_2d, single_tone, tone_to_delay, tone_to_doppler};
use crate::scene::{
    angle_row, delay_doppler_design, delay_doppler_weights, delay_vector, doppler_vector, group_steering, PilotSet,
    SystemConfig,
};
use crate::tensor::{lstsq, unvec, ComplexMatrix, ComplexTensor, DEFAULT_PINV_TOL};

/// Entries of the unit-gain reconstruction below this fraction of its peak
/// are left out of the gain estimate.
pub const GAIN_MASK_FRACTION: f64 = 1e-9;

/// Minimum share of usable entries for a gain estimate.
pub const GAIN_MIN_USABLE: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GainEstimator {
    /// `Σ conj(Y′) Y / Σ |Y′|²` over the usable entries.
    #[default]
    #[serde(rename = "weighted")]
    EnergyWeighted,
    /// Plain mean of `Y / Y′` over the usable entries.
    #[serde(rename = "mean")]
    ElementwiseMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalsOptions {
    /// Iteration cap per stage.
    pub i_max: usize,
    /// Stop once successive normalized residuals differ by less than this.
    pub delta: f64,
    /// Relative singular value cutoff of every pseudoinverse.
    pub pinv_tol: f64,
    pub gain_estimator: GainEstimator,
    /// Seed of the random initialization.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for BalsOptions {
    fn default() -> Self {
        Self {
            i_max: 500,
            delta: 1e-6,
            pinv_tol: DEFAULT_PINV_TOL,
            gain_estimator: GainEstimator::EnergyWeighted,
            seed: 0,
        }
    }
}

impl BalsOptions {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i_max == 0 {
            return Err(Error::Config("bals.i_max must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("bals.delta must be positive, got {}", self.delta)));
        }
        if !(self.pinv_tol > 0.0 && self.pinv_tol < 1.0) {
            return Err(Error::Config(format!("bals.pinv_tol must lie in (0, 1), got {}", self.pinv_tol)));
        }
        Ok(())
    }
}

/// Stopping rule on a trace whose first entry is the initial error: only
/// differences between two completed iterations count.
pub(crate) fn converged(trace: &[f64], delta: f64) -> bool {
    match trace {
        [_, .., prev, last] => (last - prev).abs() < delta,
        _ => false,
    }
}

pub(crate) fn check_finite(value: f64, stage: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!("{stage} residual became {value}")))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub stage1_iterations: Option<usize>,
    pub stage2_iterations: Option<usize>,
    pub stage1_trace: Vec<f64>,
    pub stage2_trace: Vec<f64>,
    /// Rank-one energy share of the estimated angle matrix.
    pub rank_one_ratio: Option<f64>,
    /// `‖Y - Ŷ‖² / ‖Y‖²` of the final parametric model.
    pub residual: f64,
    /// Residual after each level of a grid search; empty for NTFE.
    pub search_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Target parameters recovered from one echo tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationResult {
    /// Seconds, in `[0, 1/Δf)`.
    pub delay: f64,
    /// Hz, in `[-1/(2T_s), 1/(2T_s))`.
    pub doppler: f64,
    pub azimuth: f64,
    pub elevation: f64,
    /// Spatial frequencies the angle steering vector is rebuilt from.
    pub mu: f64,
    pub psi: f64,
    pub gain: C64,
    pub diagnostics: Diagnostics,
}

/// `Gᵀ X D(c(τ) ⊗ d(ν))` rebuilt from scalar delay and Doppler.
pub fn reconstruct_f(
    delay: f64,
    doppler: f64,
    g: &ComplexMatrix,
    pilots: &PilotSet,
    cfg: &SystemConfig,
) -> ComplexMatrix {
    let weights = delay_doppler_weights(
        &delay_vector(delay, cfg.q, cfg.delta_f_hz),
        &doppler_vector(doppler, cfg.m, cfg.symbol_duration()),
    );
    delay_doppler_design(g, &pilots.matrix(), &weights)
}

/// Least-squares angle matrix `≈ α p pᵀ` given the `N x MQ` delay-Doppler factor.
pub fn estimate_angle_matrix(
    y: &ComplexTensor,
    f: &ComplexMatrix,
    model: &NestedTuckerModel,
    pinv_tol: f64,
) -> Result<ComplexMatrix> {
    let n = model.group_size();
    if y.len() < n * n {
        return Err(Error::Identifiability(format!("LMQT = {} is below N² = {}", y.len(), n * n)));
    }
    let p2_t = model.delay_doppler_design_t(&f.transpose())?;
    let column = lstsq(&p2_t, &y.to_column(), pinv_tol)?.matrix;
    unvec(&column, n, n)
}

/// Closed-form gain from the echo and its unit-gain parametric reconstruction.
pub fn estimate_gain(y: &ComplexTensor, y_prime: &ComplexTensor, how: GainEstimator) -> Result<C64> {
    if y.shape() != y_prime.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", y.shape(), y_prime.shape())));
    }
    let peak = y_prime.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = GAIN_MASK_FRACTION * peak;
    let usable: Vec<(C64, C64)> = y
        .data()
        .iter()
        .zip(y_prime.data())
        .filter(|(_, r)| peak > 0.0 && r.norm() >= floor)
        .map(|(&a, &r)| (a, r))
        .collect();
    let total = y.len();
    if (usable.len() as f64) < GAIN_MIN_USABLE * total as f64 || usable.is_empty() {
        return Err(Error::GainUnrecoverable { usable: usable.len(), total });
    }
    Ok(match how {
        GainEstimator::ElementwiseMean => usable.iter().map(|(a, r)| a / r).sum::<C64>() / usable.len() as f64,
        GainEstimator::EnergyWeighted => {
            let num: C64 = usable.iter().map(|(a, r)| r.conj() * a).sum();
            let den: f64 = usable.iter().map(|(_, r)| r.norm_sqr()).sum();
            num / den
        }
    })
}

fn normalized(v: &[C64]) -> Vec<C64> {
    match v.first() {
        Some(&first) if first.norm() > 0.0 => v.iter().map(|&z| z / first).collect(),
        _ => v.to_vec(),
    }
}

/// Full estimation pipeline for the processed group of `cfg`.
pub fn run_ntfe(
    y: &ComplexTensor,
    cfg: &SystemConfig,
    g: &ComplexMatrix,
    s: &ComplexMatrix,
    pilots: &PilotSet,
    core: &ComplexTensor,
    opts: &BalsOptions,
) -> Result<EstimationResult> {
    let layout = cfg.processed_group();
    if g.ncols() != layout.size {
        return Err(Error::Shape(format!(
            "channel has {} columns but group {} has {} elements",
            g.ncols(),
            cfg.group,
            layout.size
        )));
    }
    let model = NestedTuckerModel::new(core, g, s)?;
    let s1 = stage1_bals(y, &model, opts)?;
    let s2 = stage2_bals(&s1.f1, g, pilots, opts)?;

    let delay = tone_to_delay(single_tone(&normalized(&s2.delay))?.omega, cfg.delta_f_hz);
    let doppler = tone_to_doppler(single_tone(&normalized(&s2.doppler))?.omega, cfg.symbol_duration());
    let f = reconstruct_f(delay, doppler, g, pilots, cfg);

    let angle_matrix = estimate_angle_matrix(y, &f, &model, opts.pinv_tol)?;
    let angles = esprit_2d(&angle_matrix, layout.cols, layout.n_z)?;
    let mut warnings = Vec::new();
    if !angles.is_reliable() {
        warnings.push(format!("angle matrix is weakly rank one (energy ratio {:.3})", angles.rank_one_ratio));
    }
    // The steering vector comes from the spatial frequencies so that the
    // clamp of the angle inversion never leaks into the reconstruction.
    let p = group_steering(angles.mu, angles.psi, cfg, &layout);
    let y_prime = model.reconstruct(&f.transpose(), &angle_row(&p))?;
    let gain = estimate_gain(y, &y_prime, opts.gain_estimator)?;
    let residual = y.diff_norm_sq(&y_prime.scaled(gain))? / y.norm_sq();

    Ok(EstimationResult {
        delay,
        doppler,
        azimuth: angles.azimuth,
        elevation: angles.elevation,
        mu: angles.mu,
        psi: angles.psi,
        gain,
        diagnostics: Diagnostics {
            stage1_iterations: Some(s1.iterations),
            stage2_iterations: Some(s2.iterations),
            stage1_trace: s1.error_trace,
            stage2_trace: s2.error_trace,
            rank_one_ratio: Some(angles.rank_one_ratio),
            residual,
            search_trace: Vec::new(),
            warnings,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{
        draw_scene, gen_codebook, gen_pilots, group_factors, synthesize, GroupFactors, SceneConfig, SceneTruth,
    };
    use crate::tensor::{build_core, kronecker};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        cfg: SystemConfig,
        truth: SceneTruth,
        pilots: PilotSet,
        factors: GroupFactors,
        core: ComplexTensor,
        y: ComplexTensor,
    }

    fn fixture(seed: u64) -> Fixture {
        let cfg = SystemConfig::default();
        let truth = draw_scene(&cfg, &SceneConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed));
        let cb = gen_codebook(&cfg, seed + 1000);
        let pilots = gen_pilots(&cfg).unwrap();
        let y = synthesize(&truth, &cfg, &cb, &pilots).unwrap();
        let factors = group_factors(&truth, &cfg, &cb, &pilots, 0);
        Fixture { cfg, truth, pilots, factors, core: build_core(4), y }
    }

    fn monotone(trace: &[f64]) -> bool {
        trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * trace[0])
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn noiseless_pipeline_recovers_truth() {
        for seed in 0..5 {
            let fx = fixture(seed);
            // Stage two converges linearly; a tight threshold reaches the noiseless floor.
            let opts = BalsOptions { delta: 1e-14, ..BalsOptions::default().with_seed(seed) };
            let est =
                run_ntfe(&fx.y, &fx.cfg, &fx.factors.g, &fx.factors.selection, &fx.pilots, &fx.core, &opts).unwrap();
            let t = &fx.truth;
            assert!(rel(est.delay, t.delay) <= 1e-6, "delay {} vs {}", est.delay, t.delay);
            assert!(rel(est.doppler, t.doppler) <= 1e-6);
            assert!(rel(est.azimuth, t.target.azimuth) <= 1e-6);
            assert!(rel(est.elevation, t.target.elevation) <= 1e-6);
            assert!((est.gain - t.gains[0]).norm() / t.gains[0].norm() <= 1e-6);
            assert!(est.diagnostics.residual <= 1e-14, "residual {}", est.diagnostics.residual);
            assert!(monotone(&est.diagnostics.stage1_trace));
            assert!(monotone(&est.diagnostics.stage2_trace));
            assert!(est.diagnostics.warnings.is_empty());
        }
    }

    #[test]
    fn stage1_fits_noiseless_echo() {
        let fx = fixture(11);
        let model = NestedTuckerModel::new(&fx.core, &fx.factors.g, &fx.factors.selection).unwrap();
        // A tight threshold lets the alternation run down to the noiseless floor.
        let opts = BalsOptions { delta: 1e-14, ..BalsOptions::default().with_seed(3) };
        let s1 = stage1_bals(&fx.y, &model, &opts).unwrap();
        assert!(*s1.error_trace.last().unwrap() <= 1e-10);
        assert!(monotone(&s1.error_trace));
        // The true factor has rank one; the estimate must live in its span.
        let truth = fx.factors.f.transpose();
        let dir = truth.column(0).normalize();
        for col in s1.f1.column_iter() {
            let along = dir.dotc(&col);
            let off = (col - &dir * along).norm();
            assert!(off <= 1e-8 * col.norm().max(1e-300));
        }
        // Injected reciprocal scaling leaves the reconstruction unchanged.
        let lambda = C64::new(2.5, -1.25);
        let a = model.reconstruct(&s1.f1, &s1.p_prime).unwrap();
        let b = model.reconstruct(&(&s1.f1 * lambda), &(&s1.p_prime / lambda)).unwrap();
        assert!(a.diff_norm_sq(&b).unwrap().sqrt() <= 1e-12 * a.norm_sq().sqrt());
    }

    #[test]
    fn stage2_recovers_steering_directions() {
        let fx = fixture(21);
        let opts = BalsOptions { delta: 1e-14, ..BalsOptions::default().with_seed(5) };
        let model = NestedTuckerModel::new(&fx.core, &fx.factors.g, &fx.factors.selection).unwrap();
        let s1 = stage1_bals(&fx.y, &model, &opts).unwrap();
        let s2 = stage2_bals(&s1.f1, &fx.factors.g, &fx.pilots, &opts).unwrap();
        let t = &fx.truth;
        let tau = tone_to_delay(single_tone(&s2.delay).unwrap().omega, fx.cfg.delta_f_hz);
        let nu = tone_to_doppler(single_tone(&s2.doppler).unwrap().omega, fx.cfg.symbol_duration());
        assert!(rel(tau, t.delay) <= 1e-8);
        assert!(rel(nu, t.doppler) <= 1e-8);
        let to_col = |v: &[C64]| ComplexMatrix::from_column_slice(v.len(), 1, v);
        let est = kronecker(&to_col(&s2.doppler), &to_col(&s2.delay));
        let c = delay_vector(t.delay, 4, fx.cfg.delta_f_hz);
        let d = doppler_vector(t.doppler, 4, fx.cfg.symbol_duration());
        let truth = kronecker(&to_col(&d), &to_col(&c));
        let cos = est.dotc(&truth).norm() / (est.norm() * truth.norm());
        assert!(cos >= 1.0 - 1e-10);
        assert!(monotone(&s2.error_trace));
    }

    #[test]
    fn stage2_single_symbol_single_subcarrier() {
        let cfg = SystemConfig { l_y: 1, l_z: 1, m: 1, q: 1, ..SystemConfig::default() };
        let pilots = gen_pilots(&cfg).unwrap();
        let g = ComplexMatrix::from_fn(1, 4, |_, j| C64::from_polar(1.0, 0.3 * j as f64));
        let lambda = C64::new(-0.7, 1.9);
        let f1 = (g.transpose() * pilots.matrix()).transpose() * lambda;
        let s2 = stage2_bals(&f1, &g, &pilots, &BalsOptions::default()).unwrap();
        assert!((s2.doppler[0] * s2.delay[0] - lambda).norm() <= 1e-12);
    }

    #[test]
    fn rebuilt_factor_properties() {
        let fx = fixture(2);
        let f = reconstruct_f(fx.truth.delay, fx.truth.doppler, &fx.factors.g, &fx.pilots, &fx.cfg);
        assert!((&f - &fx.factors.f).norm() <= 1e-12 * f.norm());
        let f0 = reconstruct_f(0.0, 0.0, &fx.factors.g, &fx.pilots, &fx.cfg);
        assert!((&f0 - fx.factors.g.transpose() * fx.pilots.matrix()).norm() <= 1e-12);
        // Small delay perturbations move the factor by a small amount.
        let step = 1e-12;
        let fp = reconstruct_f(fx.truth.delay + step, fx.truth.doppler, &fx.factors.g, &fx.pilots, &fx.cfg);
        let bound = 2.0 * std::f64::consts::PI * 3.0 * fx.cfg.delta_f_hz * step * f.norm();
        assert!((&fp - &f).norm() <= 1.01 * bound);
    }

    #[test]
    fn angle_matrix_is_rank_one_and_linear() {
        let fx = fixture(4);
        let model = NestedTuckerModel::new(&fx.core, &fx.factors.g, &fx.factors.selection).unwrap();
        let p = estimate_angle_matrix(&fx.y, &fx.factors.f, &model, DEFAULT_PINV_TOL).unwrap();
        let sv = p.singular_values();
        let energy: f64 = sv.iter().map(|s| s * s).sum();
        assert!(sv.max() * sv.max() / energy >= 1.0 - 1e-10);
        let expected = ComplexMatrix::from_fn(4, 4, |i, j| fx.factors.p[i] * fx.factors.p[j]) * fx.truth.gains[0];
        assert!((&p - &expected).norm() <= 1e-8 * expected.norm());
        let lambda = C64::new(0.0, 3.0);
        let scaled = estimate_angle_matrix(&fx.y.scaled(lambda), &fx.factors.f, &model, DEFAULT_PINV_TOL).unwrap();
        assert!((scaled - p * lambda).norm() <= 1e-10 * expected.norm());
    }

    #[test]
    fn gain_from_constant_ratio_and_mask() {
        let y_prime = ComplexTensor::from_fn(&[2, 3, 2], |i| C64::new(1.0 + i[0] as f64, i[1] as f64));
        let y = y_prime.scaled(C64::new(3.0, 0.0));
        for how in [GainEstimator::EnergyWeighted, GainEstimator::ElementwiseMean] {
            assert!((estimate_gain(&y, &y_prime, how).unwrap() - C64::new(3.0, 0.0)).norm() < 1e-14);
            // A zero in the reconstruction is skipped whatever Y holds there.
            let mut yp = y_prime.clone();
            yp.set(&[0, 1, 1], C64::new(0.0, 0.0));
            let mut yy = y.clone();
            yy.set(&[0, 1, 1], C64::new(42.0, 0.0));
            assert!((estimate_gain(&yy, &yp, how).unwrap() - C64::new(3.0, 0.0)).norm() < 1e-14);
        }
        let zero = ComplexTensor::zeros(&[2, 3, 2]);
        assert!(matches!(
            estimate_gain(&y, &zero, GainEstimator::EnergyWeighted),
            Err(Error::GainUnrecoverable { .. })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let fx = fixture(8);
        let opts = BalsOptions::default().with_seed(77);
        let run =
            || run_ntfe(&fx.y, &fx.cfg, &fx.factors.g, &fx.factors.selection, &fx.pilots, &fx.core, &opts).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_unidentifiable_dimensions() {
        // L = 1, T = 2 with N = 4 violates LT >= N.
        let cfg = SystemConfig { l_y: 1, l_z: 1, t: 2, ..SystemConfig::default() };
        let truth = draw_scene(&cfg, &SceneConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let cb = gen_codebook(&cfg, 1);
        let pilots = gen_pilots(&cfg).unwrap();
        let y = synthesize(&truth, &cfg, &cb, &pilots).unwrap();
        let gf = group_factors(&truth, &cfg, &cb, &pilots, 0);
        let err = run_ntfe(&y, &cfg, &gf.g, &gf.selection, &pilots, &build_core(4), &BalsOptions::default());
        assert!(matches!(err, Err(Error::Identifiability(_))));
    }

    #[test]
    fn options_validation() {
        BalsOptions::default().validate().unwrap();
        assert!(BalsOptions { i_max: 0, ..BalsOptions::default() }.validate().is_err());
        assert!(BalsOptions { delta: 0.0, ..BalsOptions::default() }.validate().is_err());
    }
}
