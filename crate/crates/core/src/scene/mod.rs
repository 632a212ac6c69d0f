//! Scenario generation and echo synthesis.

mod codebook;
mod config;
mod noise;
mod pilots;
mod steering;

pub use codebook::{gen_codebook, haar_unitary, RisCodebook};
pub use config::{GroupLayout, SceneConfig, SystemConfig};
pub use noise::add_noise;
pub use pilots::{gen_pilots, pilot_rows, PilotSet};
pub use steering::{delay_doppler_weights, delay_vector, doppler_vector, spatial_freqs, upa_steering};

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{build_core, ComplexMatrix, ComplexTensor};

pub const SPEED_OF_LIGHT: f64 = 3e8;

/// Azimuth and elevation in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }

    pub fn spatial_freqs(&self) -> (f64, f64) {
        spatial_freqs(self.azimuth, self.elevation)
    }
}

/// Ground truth of one target scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneTruth {
    /// Round-trip delay in seconds.
    pub delay: f64,
    /// Doppler shift in Hz.
    pub doppler: f64,
    /// Surface to target.
    pub target: Direction,
    /// Transmitter array towards the surface.
    pub transmitter: Direction,
    /// Arrival at the surface from the transmitter.
    pub ris_arrival: Direction,
    /// One complex gain per element group.
    pub gains: Vec<C64>,
}

/// Uniform draw from the open interval `(0, hi)`.
fn open_uniform<R: Rng + ?Sized>(rng: &mut R, hi: f64) -> f64 {
    loop {
        let v = rng.gen::<f64>() * hi;
        if v > 0.0 {
            return v;
        }
    }
}

/// Draws a random scene: leg distances and radial speed from `ranges`, all
/// angles uniform in (0°, 90°), gain magnitude from the radar equation and a
/// uniform phase per group.
pub fn draw_scene<R: Rng + ?Sized>(cfg: &SystemConfig, ranges: &SceneConfig, rng: &mut R) -> SceneTruth {
    let d1 = rng.gen_range(ranges.distance_min_m..=ranges.distance_max_m);
    let d2 = rng.gen_range(ranges.distance_min_m..=ranges.distance_max_m);
    let v = rng.gen_range(-ranges.speed_max_mps..=ranges.speed_max_mps);
    let mut angle = || open_uniform(rng, FRAC_PI_2);
    let target = Direction::new(angle(), angle());
    let transmitter = Direction::new(angle(), angle());
    let ris_arrival = Direction::new(angle(), angle());
    let magnitude = cfg.wavelength() * ranges.rcs_m2.sqrt() / ((4.0 * PI).powf(1.5) * d1 * d2);
    let gains = (0..cfg.groups().len()).map(|_| C64::from_polar(magnitude, rng.gen_range(-PI..PI))).collect();
    SceneTruth {
        delay: 2.0 * (d1 + d2) / SPEED_OF_LIGHT,
        doppler: 2.0 * v * cfg.carrier_hz / SPEED_OF_LIGHT,
        target,
        transmitter,
        ris_arrival,
        gains,
    }
}

/// Transmitter array response `a`.
pub fn transmitter_steering(truth: &SceneTruth, cfg: &SystemConfig) -> Vec<C64> {
    let (mu, psi) = truth.transmitter.spatial_freqs();
    upa_steering(mu, psi, cfg.l_y, cfg.l_z)
}

/// Slice of the full surface response `upa_steering(μ, ψ)` covering one group.
pub fn group_steering(mu: f64, psi: f64, cfg: &SystemConfig, layout: &GroupLayout) -> Vec<C64> {
    upa_steering(mu, psi, cfg.n_y, cfg.n_z)[layout.offset..layout.offset + layout.size].to_vec()
}

/// Gain-free geometric channel `G_k = a b_kᵀ` between the transmitter and group `k`.
pub fn gen_channel(truth: &SceneTruth, cfg: &SystemConfig, k: usize) -> ComplexMatrix {
    let a = transmitter_steering(truth, cfg);
    let (mu, psi) = truth.ris_arrival.spatial_freqs();
    let b = group_steering(mu, psi, cfg, &cfg.group_layout(k));
    ComplexMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
}

/// `Gᵀ X D(c ⊗ d)`, the `N x MQ` delay-Doppler factor.
pub fn delay_doppler_design(g: &ComplexMatrix, x: &ComplexMatrix, weights: &[C64]) -> ComplexMatrix {
    let mut f = g.transpose() * x;
    for (j, mut col) in f.column_iter_mut().enumerate() {
        col *= weights[j];
    }
    f
}

/// `vec(p pᵀ)ᵀ` as a `1 x N²` row.
pub fn angle_row(p: &[C64]) -> ComplexMatrix {
    let n = p.len();
    ComplexMatrix::from_fn(1, n * n, |_, j| p[j % n] * p[j / n])
}

/// Unit-gain nested Tucker tensor `core x_0 G x_1 F1 x_2 S x_3 p′` with the
/// trailing singleton mode dropped, shape `L x MQ x T`.
pub fn nested_tucker(
    core: &ComplexTensor,
    g: &ComplexMatrix,
    f1: &ComplexMatrix,
    s: &ComplexMatrix,
    p_prime: &ComplexMatrix,
) -> Result<ComplexTensor> {
    let t = core.mode_product(p_prime, 3)?.mode_product(s, 2)?.mode_product(g, 0)?.mode_product(f1, 1)?;
    let shape = t.shape()[..3].to_vec();
    t.reshaped(&shape)
}

/// Known quantities and true factors of one group's term.
#[derive(Clone, Debug)]
pub struct GroupFactors {
    pub gain: C64,
    pub g: ComplexMatrix,
    /// `N x MQ` delay-Doppler factor; its transpose is the second Tucker factor.
    pub f: ComplexMatrix,
    pub p: Vec<C64>,
    pub p_prime: ComplexMatrix,
    pub selection: ComplexMatrix,
}

pub fn group_factors(
    truth: &SceneTruth,
    cfg: &SystemConfig,
    codebook: &RisCodebook,
    pilots: &PilotSet,
    k: usize,
) -> GroupFactors {
    let g = gen_channel(truth, cfg, k);
    let weights = delay_doppler_weights(
        &delay_vector(truth.delay, cfg.q, cfg.delta_f_hz),
        &doppler_vector(truth.doppler, cfg.m, cfg.symbol_duration()),
    );
    let f = delay_doppler_design(&g, &pilots.matrix(), &weights);
    let (mu, psi) = truth.target.spatial_freqs();
    let p = group_steering(mu, psi, cfg, &cfg.group_layout(k));
    let p_prime = angle_row(&p);
    GroupFactors { gain: truth.gains[k], g, f, p, p_prime, selection: codebook.selection_matrix(k) }
}

fn check_inputs(truth: &SceneTruth, cfg: &SystemConfig, codebook: &RisCodebook, pilots: &PilotSet) -> Result<()> {
    cfg.validate()?;
    let groups = cfg.groups();
    if truth.gains.len() != groups.len() {
        return Err(Error::Shape(format!("{} gains for {} groups", truth.gains.len(), groups.len())));
    }
    if codebook.slots() != cfg.t || codebook.group_sizes() != groups.as_slice() {
        return Err(Error::Shape("codebook does not match the configuration".into()));
    }
    if pilots.tensor().shape() != [cfg.antennas(), cfg.m, cfg.q] {
        return Err(Error::Shape(format!("pilots of shape {:?} do not match L x M x Q", pilots.tensor().shape())));
    }
    Ok(())
}

/// Noiseless echo tensor `L x MQ x T`: the sum over groups of
/// `α_k (core x_0 G_k x_1 F_kᵀ x_2 S_k x_3 p′_k)`.
pub fn synthesize(
    truth: &SceneTruth,
    cfg: &SystemConfig,
    codebook: &RisCodebook,
    pilots: &PilotSet,
) -> Result<ComplexTensor> {
    check_inputs(truth, cfg, codebook, pilots)?;
    let mut total = ComplexTensor::zeros(&[cfg.antennas(), cfg.m * cfg.q, cfg.t]);
    let mut cores: Vec<(usize, ComplexTensor)> = Vec::new();
    for k in 0..cfg.groups().len() {
        let gf = group_factors(truth, cfg, codebook, pilots, k);
        let n = gf.p.len();
        if !cores.iter().any(|(m, _)| *m == n) {
            cores.push((n, build_core(n)));
        }
        let core = &cores.iter().find(|(m, _)| *m == n).expect("inserted above").1;
        let term = nested_tucker(core, &gf.g, &gf.f.transpose(), &gf.selection, &gf.p_prime)?;
        total = total.add(&term.scaled(gf.gain))?;
    }
    Ok(total)
}

/// Independent per-sample generator: evaluates
/// `y_{q,m,t} = Σ_k α_k a (b_kᵀ S_ktᵀ p_k)(p_kᵀ S_kt b_k)(aᵀ x_qm) c_q d_m`
/// with explicit loops, sharing nothing with the Tucker path but the
/// steering vectors.
pub fn synthesize_per_sample(
    truth: &SceneTruth,
    cfg: &SystemConfig,
    codebook: &RisCodebook,
    pilots: &PilotSet,
) -> Result<ComplexTensor> {
    check_inputs(truth, cfg, codebook, pilots)?;
    let a = transmitter_steering(truth, cfg);
    let (mu_a, psi_a) = truth.ris_arrival.spatial_freqs();
    let (mu_p, psi_p) = truth.target.spatial_freqs();
    let b_full = upa_steering(mu_a, psi_a, cfg.n_y, cfg.n_z);
    let p_full = upa_steering(mu_p, psi_p, cfg.n_y, cfg.n_z);
    let c = delay_vector(truth.delay, cfg.q, cfg.delta_f_hz);
    let d = doppler_vector(truth.doppler, cfg.m, cfg.symbol_duration());
    let x = pilots.tensor();
    let (l_count, mq) = (a.len(), cfg.m * cfg.q);
    let mut y = ComplexTensor::zeros(&[l_count, mq, cfg.t]);
    for t in 0..cfg.t {
        let slot = codebook.slot_matrix(t);
        // Per-group scalar pᵀ S_kt b, restricted to the group's block.
        let mut coupling = C64::new(0.0, 0.0);
        let mut offset = 0;
        let mut per_group = Vec::new();
        for (k, &size) in cfg.groups().iter().enumerate() {
            let mut pt_s_b = C64::new(0.0, 0.0);
            for i in offset..offset + size {
                for j in offset..offset + size {
                    pt_s_b += p_full[i] * slot[(i, j)] * b_full[j];
                }
            }
            // bᵀ Sᵀ p is the same scalar read backwards.
            let mut bt_st_p = C64::new(0.0, 0.0);
            for i in offset..offset + size {
                for j in offset..offset + size {
                    bt_st_p += b_full[i] * slot[(j, i)] * p_full[j];
                }
            }
            per_group.push(truth.gains[k] * bt_st_p * pt_s_b);
            offset += size;
        }
        for g in &per_group {
            coupling += g;
        }
        for qi in 0..cfg.q {
            for mi in 0..cfg.m {
                let mut a_x = C64::new(0.0, 0.0);
                for (li, al) in a.iter().enumerate() {
                    a_x += al * x.get(&[li, mi, qi]);
                }
                let scalar = coupling * a_x * c[qi] * d[mi];
                for (li, al) in a.iter().enumerate() {
                    y.set(&[li, mi + cfg.m * qi, t], al * scalar);
                }
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn scalar_scene() {
        let cfg = SystemConfig { n_y: 1, n_z: 1, l_y: 1, l_z: 1, m: 1, q: 1, t: 1, ..SystemConfig::default() };
        let truth = SceneTruth {
            delay: 0.0,
            doppler: 0.0,
            target: Direction::new(0.3, 0.2),
            transmitter: Direction::new(0.1, 0.4),
            ris_arrival: Direction::new(1.0, 0.5),
            gains: vec![C64::new(2.0, 0.0)],
        };
        let cb = RisCodebook::from_blocks(vec![1], vec![vec![ComplexMatrix::from_element(1, 1, one())]]);
        let pilots = gen_pilots(&cfg).unwrap();
        let y = synthesize(&truth, &cfg, &cb, &pilots).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert!((y.data()[0] - C64::new(2.0, 0.0)).norm() < 1e-15);
        let y1 = synthesize_per_sample(&truth, &cfg, &cb, &pilots).unwrap();
        assert!((y1.data()[0] - C64::new(2.0, 0.0)).norm() < 1e-15);
    }

    fn small_cfg(rng: &mut ChaCha8Rng) -> SystemConfig {
        let pow2 = |rng: &mut ChaCha8Rng| 1usize << rng.gen_range(0..3);
        let mut cfg = SystemConfig {
            n_y: rng.gen_range(1..=2),
            n_z: rng.gen_range(1..=2),
            m: pow2(rng),
            q: pow2(rng),
            t: rng.gen_range(1..=16),
            ..SystemConfig::default()
        };
        cfg.l_y = rng.gen_range(1..=2);
        cfg.l_z = rng.gen_range(1..=2);
        while cfg.antennas() > cfg.m * cfg.q {
            cfg.m *= 2;
        }
        cfg
    }

    #[test]
    fn tucker_matches_per_sample_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..30 {
            let cfg = small_cfg(&mut rng);
            let truth = draw_scene(&cfg, &SceneConfig::default(), &mut rng);
            let cb = gen_codebook(&cfg, trial);
            let pilots = gen_pilots(&cfg).unwrap();
            let y = synthesize(&truth, &cfg, &cb, &pilots).unwrap();
            let y1 = synthesize_per_sample(&truth, &cfg, &cb, &pilots).unwrap();
            let rel = (y.diff_norm_sq(&y1).unwrap() / y1.norm_sq()).sqrt();
            assert!(rel <= 1e-10, "cfg {cfg:?}: {rel}");
        }
    }

    #[test]
    fn multi_group_sum_matches_per_sample_generator() {
        let cfg = SystemConfig { n_y: 3, n_z: 2, group_sizes: Some(vec![4, 2]), t: 12, ..SystemConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = draw_scene(&cfg, &SceneConfig::default(), &mut rng);
        assert_eq!(truth.gains.len(), 2);
        let cb = gen_codebook(&cfg, 8);
        let pilots = gen_pilots(&cfg).unwrap();
        let y = synthesize(&truth, &cfg, &cb, &pilots).unwrap();
        let y1 = synthesize_per_sample(&truth, &cfg, &cb, &pilots).unwrap();
        assert!((y.diff_norm_sq(&y1).unwrap() / y1.norm_sq()).sqrt() <= 1e-10);
    }

    #[test]
    fn gain_scales_linearly() {
        let cfg = SystemConfig { t: 8, ..SystemConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut truth = draw_scene(&cfg, &SceneConfig::default(), &mut rng);
        let cb = gen_codebook(&cfg, 1);
        let pilots = gen_pilots(&cfg).unwrap();
        let y = synthesize(&truth, &cfg, &cb, &pilots).unwrap();
        let lambda = C64::new(-1.5, 0.25);
        truth.gains[0] *= lambda;
        let y2 = synthesize(&truth, &cfg, &cb, &pilots).unwrap();
        assert!(y2.diff_norm_sq(&y.scaled(lambda)).unwrap().sqrt() <= 1e-12 * y2.norm_sq().sqrt());
    }

    #[test]
    fn channel_properties() {
        let cfg = SystemConfig::default();
        let mut truth = draw_scene(&cfg, &SceneConfig::default(), &mut ChaCha8Rng::seed_from_u64(2));
        let g = gen_channel(&truth, &cfg, 0);
        assert_eq!(g.shape(), (4, 4));
        assert!(g.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        let sv = g.singular_values();
        assert!((sv[0] - 4.0).abs() < 1e-12 && sv.iter().skip(1).all(|&s| s < 1e-12));
        // Azimuth 90° with elevation 0° zeroes both spatial frequencies.
        truth.transmitter = Direction::new(FRAC_PI_2, 0.0);
        truth.ris_arrival = Direction::new(FRAC_PI_2, 0.0);
        let g = gen_channel(&truth, &cfg, 0);
        assert!(g.iter().all(|z| (z - one()).norm() < 1e-15));
    }

    #[test]
    fn drawn_scenes_in_range() {
        let cfg = SystemConfig::default();
        let ranges = SceneConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = draw_scene(&cfg, &ranges, &mut rng);
            assert!(s.delay >= 2.0 * 20.0 / SPEED_OF_LIGHT && s.delay <= 2.0 * 500.0 / SPEED_OF_LIGHT);
            assert!(s.delay < 1.0 / cfg.delta_f_hz);
            assert!(s.doppler.abs() <= 2.0 * 25.0 * 28e9 / SPEED_OF_LIGHT + 1e-9);
            for d in [s.target, s.transmitter, s.ris_arrival] {
                assert!(d.azimuth > 0.0 && d.azimuth < FRAC_PI_2);
                assert!(d.elevation > 0.0 && d.elevation < FRAC_PI_2);
            }
            assert!(s.gains[0].norm() > 0.0);
        }
    }

    #[test]
    fn angle_row_is_vec_of_outer_product() {
        let p = [C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(3.0, 0.0)];
        let row = angle_row(&p);
        // vec is column-major: entry i + 3 j holds p_i p_j.
        assert_eq!(row[(0, 1 + 3 * 2)], p[1] * p[2]);
    }
}
