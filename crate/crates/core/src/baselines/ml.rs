use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntfe::{Diagnostics, EstimationResult};
use crate::scene::{
    delay_doppler_weights, delay_vector, doppler_vector, group_steering, spatial_freqs, PilotSet, RisCodebook,
    SystemConfig,
};
use crate::tensor::{ComplexMatrix, ComplexTensor};

/// Coarse grid sizes and the number of halving refinements of the
/// sequential search. Delay spans `[0, 1/Δf)`, Doppler
/// `[-1/(2T_s), 1/(2T_s))` and both angles the open quarter `(0°, 90°)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlGrid {
    pub tau_points: usize,
    pub nu_points: usize,
    pub angle_points: usize,
    pub refinements: usize,
}

impl Default for MlGrid {
    fn default() -> Self {
        Self { tau_points: 64, nu_points: 64, angle_points: 32, refinements: 3 }
    }
}

impl MlGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, points) in
            [("tau_points", self.tau_points), ("nu_points", self.nu_points), ("angle_points", self.angle_points)]
        {
            if points < 2 {
                return Err(Error::Config(format!("ml_grid.{name} must be at least 2, got {points}")));
            }
        }
        Ok(())
    }

    pub fn tau_step(&self, cfg: &SystemConfig) -> f64 {
        1.0 / (cfg.delta_f_hz * self.tau_points as f64)
    }

    pub fn nu_step(&self, cfg: &SystemConfig) -> f64 {
        1.0 / (cfg.symbol_duration() * self.nu_points as f64)
    }

    pub fn angle_step(&self) -> f64 {
        FRAC_PI_2 / self.angle_points as f64
    }

    pub fn tau_node(&self, k: usize, cfg: &SystemConfig) -> f64 {
        k as f64 * self.tau_step(cfg)
    }

    pub fn nu_node(&self, k: usize, cfg: &SystemConfig) -> f64 {
        -0.5 / cfg.symbol_duration() + k as f64 * self.nu_step(cfg)
    }

    /// Angle nodes sit at cell centres so neither prior edge is visited.
    pub fn angle_node(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.angle_step()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Point {
    tau: f64,
    nu: f64,
    azimuth: f64,
    elevation: f64,
}

/// Precomputed pieces of the single-path model
/// `Y_t = α u_t u_tᵀ X D(c ⊗ d)` with `u_t = G S_tᵀ p`.
struct Search<'a> {
    y: &'a ComplexTensor,
    g: &'a ComplexMatrix,
    blocks: Vec<&'a ComplexMatrix>,
    x: ComplexMatrix,
    gram: ComplexMatrix,
    cfg: &'a SystemConfig,
    k: usize,
    energy: f64,
}

/// Echo sample `(l, mq, t)` of an `L x MQ x T` tensor.
fn at(y: &ComplexTensor, l: usize, mq: usize, t: usize) -> C64 {
    let s = y.shape();
    y.data()[l + s[0] * (mq + s[1] * t)]
}

impl Search<'_> {
    /// Columns `u_t` for every slot, as an `L x T` matrix.
    fn slot_vectors(&self, azimuth: f64, elevation: f64) -> ComplexMatrix {
        let (mu, psi) = spatial_freqs(azimuth, elevation);
        let layout = self.cfg.group_layout(self.k);
        let p = ComplexMatrix::from_vec(layout.size, 1, group_steering(mu, psi, self.cfg, &layout));
        let mut u = ComplexMatrix::zeros(self.g.nrows(), self.blocks.len());
        for (t, s) in self.blocks.iter().enumerate() {
            u.set_column(t, &(self.g * s.tr_mul(&p)).column(0));
        }
        u
    }

    /// `‖m‖²` of the unit-gain model, independent of delay and Doppler.
    fn model_energy(&self, u: &ComplexMatrix) -> f64 {
        u.column_iter()
            .map(|ut| ut.norm_squared() * (ut.transpose() * &self.gram * ut.map(|z| z.conj()))[(0, 0)].re)
            .sum()
    }

    /// `W[mq] = Σ_t conj(v_t[mq]) Σ_l conj(u_t[l]) Y[l, mq, t]` with `v_t = u_tᵀ X`,
    /// so that `⟨m, Y⟩ = Σ conj(w) W` for the weights `w = c ⊗ d`.
    fn matched(&self, u: &ComplexMatrix) -> Vec<C64> {
        let (l_count, mq) = (self.x.nrows(), self.x.ncols());
        let mut w = vec![C64::new(0.0, 0.0); mq];
        for t in 0..self.blocks.len() {
            let ut = u.column(t);
            for (j, wj) in w.iter_mut().enumerate() {
                let mut v = C64::new(0.0, 0.0);
                let mut proj = C64::new(0.0, 0.0);
                for l in 0..l_count {
                    v += ut[l] * self.x[(l, j)];
                    proj += ut[l].conj() * at(self.y, l, j, t);
                }
                *wj += v.conj() * proj;
            }
        }
        w
    }

    fn weights(&self, tau: f64, nu: f64) -> Vec<C64> {
        delay_doppler_weights(
            &delay_vector(tau, self.cfg.q, self.cfg.delta_f_hz),
            &doppler_vector(nu, self.cfg.m, self.cfg.symbol_duration()),
        )
    }

    /// Least-squares gain and normalized residual at a point.
    fn fit(&self, p: Point) -> (C64, f64) {
        let u = self.slot_vectors(p.azimuth, p.elevation);
        let energy = self.model_energy(&u);
        if energy == 0.0 {
            return (C64::new(0.0, 0.0), 1.0);
        }
        let matched = self.matched(&u);
        let w = self.weights(p.tau, p.nu);
        let inner: C64 = w.iter().zip(&matched).map(|(a, b)| a.conj() * b).sum();
        let gain = inner / energy;
        let residual = ((self.energy - inner.norm_sqr() / energy) / self.energy).max(0.0);
        (gain, residual)
    }

    /// Best point of a delay-Doppler candidate list with the angles held.
    fn best_delay_doppler(&self, at_angles: Point, candidates: &[(f64, f64)]) -> Point {
        let u = self.slot_vectors(at_angles.azimuth, at_angles.elevation);
        let matched = self.matched(&u);
        let mut best = (f64::NEG_INFINITY, at_angles);
        for &(tau, nu) in candidates {
            let w = self.weights(tau, nu);
            let inner: C64 = w.iter().zip(&matched).map(|(a, b)| a.conj() * b).sum();
            let value = inner.norm_sqr();
            if value > best.0 {
                best = (value, Point { tau, nu, ..at_angles });
            }
        }
        best.1
    }

    /// Best point of an angle candidate list with delay and Doppler held.
    fn best_angles(&self, at_delay: Point, candidates: &[(f64, f64)]) -> Point {
        let w = self.weights(at_delay.tau, at_delay.nu);
        let (l_count, mq) = (self.x.nrows(), self.x.ncols());
        let slots = self.blocks.len();
        // folded[l, l', t] = Σ_mq conj(X[l', mq] w[mq]) Y[l, mq, t]
        let mut folded = vec![C64::new(0.0, 0.0); l_count * l_count * slots];
        for t in 0..slots {
            for j in 0..mq {
                for lp in 0..l_count {
                    let weight = (self.x[(lp, j)] * w[j]).conj();
                    for l in 0..l_count {
                        folded[l + l_count * (lp + l_count * t)] += weight * at(self.y, l, j, t);
                    }
                }
            }
        }
        let mut best = (f64::NEG_INFINITY, at_delay);
        for &(azimuth, elevation) in candidates {
            let u = self.slot_vectors(azimuth, elevation);
            let energy = self.model_energy(&u);
            if energy == 0.0 {
                continue;
            }
            let mut inner = C64::new(0.0, 0.0);
            for t in 0..slots {
                let ut = u.column(t);
                for lp in 0..l_count {
                    let mut row = C64::new(0.0, 0.0);
                    for l in 0..l_count {
                        row += ut[l].conj() * folded[l + l_count * (lp + l_count * t)];
                    }
                    inner += ut[lp].conj() * row;
                }
            }
            let value = inner.norm_sqr() / energy;
            if value > best.0 {
                best = (value, Point { azimuth, elevation, ..at_delay });
            }
        }
        best.1
    }

    /// Angle start that maximizes `(Σ |W|)² / ‖m‖²`, an upper bound of the
    /// score over every delay and Doppler.
    fn initial_angles(&self, nodes: &[(f64, f64)]) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, nodes[0]);
        for &(azimuth, elevation) in nodes {
            let u = self.slot_vectors(azimuth, elevation);
            let energy = self.model_energy(&u);
            if energy == 0.0 {
                continue;
            }
            let total: f64 = self.matched(&u).iter().map(|z| z.norm()).sum();
            let value = total * total / energy;
            if value > best.0 {
                best = (value, (azimuth, elevation));
            }
        }
        best.1
    }
}

fn wrap_delay(tau: f64, cfg: &SystemConfig) -> f64 {
    let period = 1.0 / cfg.delta_f_hz;
    let wrapped = tau.rem_euclid(period);
    if wrapped >= period {
        0.0
    } else {
        wrapped
    }
}

fn wrap_doppler(nu: f64, cfg: &SystemConfig) -> f64 {
    let period = 1.0 / cfg.symbol_duration();
    let wrapped = (nu + period / 2.0).rem_euclid(period) - period / 2.0;
    if wrapped >= period / 2.0 {
        wrapped - period
    } else {
        wrapped
    }
}

/// Sequential grid-search maximum likelihood for the processed group:
/// delay-Doppler on the coarse grid with the angles held, then the angles
/// with delay-Doppler held, twice; then `refinements` rounds of 3 x 3 local
/// searches with halved steps. The gain is the closed-form least-squares fit
/// at every visited point. Ties go to the lowest candidate index.
///
/// `diagnostics.search_trace` holds the normalized residual after the coarse
/// search and after every refinement round.
pub fn seq_ml(
    y: &ComplexTensor,
    g: &ComplexMatrix,
    codebook: &RisCodebook,
    pilots: &PilotSet,
    cfg: &SystemConfig,
    grid: &MlGrid,
) -> Result<EstimationResult> {
    grid.validate()?;
    let k = cfg.group;
    let layout = cfg.processed_group();
    let x = pilots.matrix();
    let (l_count, mq) = x.shape();
    if y.shape() != [l_count, mq, codebook.slots()] || g.shape() != (l_count, layout.size) {
        return Err(Error::Shape(format!(
            "echo {:?} and channel {:?} do not match L = {l_count}, MQ = {mq}, T = {}, N = {}",
            y.shape(),
            g.shape(),
            codebook.slots(),
            layout.size
        )));
    }
    let energy = y.norm_sq();
    if energy == 0.0 {
        return Err(Error::Degenerate("echo tensor is zero".into()));
    }
    let search = Search {
        y,
        g,
        blocks: (0..codebook.slots()).map(|t| codebook.block(t, k)).collect(),
        gram: &x * x.adjoint(),
        x,
        cfg,
        k,
        energy,
    };

    let delay_nodes: Vec<(f64, f64)> = (0..grid.tau_points)
        .flat_map(|i| (0..grid.nu_points).map(move |j| (i, j)))
        .map(|(i, j)| (grid.tau_node(i, cfg), grid.nu_node(j, cfg)))
        .collect();
    let angle_nodes: Vec<(f64, f64)> = (0..grid.angle_points)
        .flat_map(|i| (0..grid.angle_points).map(move |j| (i, j)))
        .map(|(i, j)| (grid.angle_node(i), grid.angle_node(j)))
        .collect();

    let (azimuth, elevation) = search.initial_angles(&angle_nodes);
    let mut point = Point { tau: 0.0, nu: 0.0, azimuth, elevation };
    for _ in 0..2 {
        point = search.best_delay_doppler(point, &delay_nodes);
        point = search.best_angles(point, &angle_nodes);
    }
    let mut trace = vec![search.fit(point).1];

    let (mut d_tau, mut d_nu, mut d_angle) = (grid.tau_step(cfg), grid.nu_step(cfg), grid.angle_step());
    let offsets = [-1.0, 0.0, 1.0];
    for _ in 0..grid.refinements {
        d_tau /= 2.0;
        d_nu /= 2.0;
        d_angle /= 2.0;
        let local: Vec<(f64, f64)> = offsets
            .iter()
            .flat_map(|&a| offsets.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (wrap_delay(point.tau + a * d_tau, cfg), wrap_doppler(point.nu + b * d_nu, cfg)))
            .collect();
        point = search.best_delay_doppler(point, &local);
        let local: Vec<(f64, f64)> = offsets
            .iter()
            .flat_map(|&a| offsets.iter().map(move |&b| (a, b)))
            .map(|(a, b)| {
                (
                    (point.azimuth + a * d_angle).clamp(0.0, FRAC_PI_2),
                    (point.elevation + b * d_angle).clamp(0.0, FRAC_PI_2),
                )
            })
            .collect();
        point = search.best_angles(point, &local);
        trace.push(search.fit(point).1);
    }

    let (gain, residual) = search.fit(point);
    let (mu, psi) = spatial_freqs(point.azimuth, point.elevation);
    Ok(EstimationResult {
        delay: point.tau,
        doppler: point.nu,
        azimuth: point.azimuth,
        elevation: point.elevation,
        mu,
        psi,
        gain,
        diagnostics: Diagnostics { residual, search_trace: trace, ..Diagnostics::default() },
    })
}
