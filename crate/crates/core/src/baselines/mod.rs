//! Comparison estimators: unstructured least squares on the effective
//! channel, its nearest Kronecker factorization, and a sequential grid
//! search maximum likelihood estimator.

mod kf;
mod ls;
mod ml;

pub use kf::{kron_factorize, nearest_kronecker, KfMode, KronDims, KronFactors};
pub use ls::{direct_ls, LsEstimate};
pub use ml::{seq_ml, MlGrid};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::{kronecker, ComplexMatrix};

/// `N⁴ x LMQ` matrix `H_eff` with `[Y]_(2) = S H_eff`, i.e.
/// `α (p′ ⊗ F1 ⊗ G)ᵀ` for a single group.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannel {
    pub matrix: ComplexMatrix,
}

impl EffectiveChannel {
    /// Channel of gain `gain` for the `1 x N²` angle row, the `N x MQ`
    /// delay-Doppler factor and the `L x N` transmitter channel.
    pub fn from_factors(gain: C64, p_prime: &ComplexMatrix, f: &ComplexMatrix, g: &ComplexMatrix) -> Result<Self> {
        let n = g.ncols();
        if p_prime.shape() != (1, n * n) || f.nrows() != n {
            return Err(Error::Shape(format!(
                "angle row {:?} and delay-Doppler factor {:?} do not match N = {n}",
                p_prime.shape(),
                f.shape()
            )));
        }
        let inner = kronecker(f, &g.transpose());
        Ok(Self { matrix: kronecker(&p_prime.transpose(), &inner) * gain })
    }

    /// `(N², (N, MQ), (N, L))`: the shapes of the factors `p′ᵀ`, `F`, `Gᵀ`
    /// for an `N⁴ x LMQ` channel with `L` antennas.
    pub fn dims(&self, antennas: usize) -> Result<KronDims> {
        let (rows, cols) = self.matrix.shape();
        let n = (rows as f64).powf(0.25).round() as usize;
        if n.pow(4) != rows || antennas == 0 || cols % antennas != 0 {
            return Err(Error::Shape(format!("{rows}x{cols} is not an N⁴ x LMQ channel for L = {antennas}")));
        }
        Ok(KronDims { angle: (n * n, 1), delay_doppler: (n, cols / antennas), transmit: (n, antennas) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Direction;
    use crate::scene::{gen_codebook, gen_pilots, group_factors, synthesize, SceneTruth, SystemConfig};

    pub(crate) fn small_truth(cfg: &SystemConfig) -> SceneTruth {
        SceneTruth {
            delay: 1.3e-6,
            doppler: 2100.0,
            target: Direction::new(0.7, 0.4),
            transmitter: Direction::new(1.1, 0.3),
            ris_arrival: Direction::new(0.5, 1.2),
            gains: vec![C64::new(0.6, -0.8); cfg.groups().len()],
        }
    }

    #[test]
    fn channel_matches_slot_unfolding() {
        let cfg = SystemConfig { t: 20, ..SystemConfig::default() };
        let truth = small_truth(&cfg);
        let cb = gen_codebook(&cfg, 4);
        let pilots = gen_pilots(&cfg).unwrap();
        let y = synthesize(&truth, &cfg, &cb, &pilots).unwrap();
        let gf = group_factors(&truth, &cfg, &cb, &pilots, 0);
        let h = EffectiveChannel::from_factors(gf.gain, &gf.p_prime, &gf.f, &gf.g).unwrap();
        let lhs = &gf.selection * &h.matrix;
        let rhs = y.unfold(2).unwrap();
        assert!((lhs - &rhs).norm() <= 1e-12 * rhs.norm());
        let dims = h.dims(4).unwrap();
        assert_eq!(dims.angle, (16, 1));
        assert_eq!(dims.delay_doppler, (4, 16));
        assert_eq!(dims.transmit, (4, 4));
    }
}
