//! Random unitary surface configurations.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::SystemConfig;
use crate::tensor::{kronecker, ComplexMatrix};

/// Per-slot block-diagonal unitary surface responses.
#[derive(Clone, Debug, PartialEq)]
pub struct RisCodebook {
    group_sizes: Vec<usize>,
    /// `blocks[t][k]` is the `N_k x N_k` response of group `k` in slot `t`.
    blocks: Vec<Vec<ComplexMatrix>>,
}

/// Draws a unitary matrix from the Haar measure: QR of a complex Gaussian
/// matrix with the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let z = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn gen_codebook(cfg: &SystemConfig, seed: u64) -> RisCodebook {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group_sizes = cfg.groups();
    let blocks = (0..cfg.t).map(|_| group_sizes.iter().map(|&n| haar_unitary(n, &mut rng)).collect()).collect();
    RisCodebook { group_sizes, blocks }
}

impl RisCodebook {
    /// Builds a codebook from explicit per-slot group blocks.
    pub fn from_blocks(group_sizes: Vec<usize>, blocks: Vec<Vec<ComplexMatrix>>) -> Self {
        Self { group_sizes, blocks }
    }

    /// Splits full block-diagonal slot matrices back into group blocks.
    pub fn from_slot_matrices(group_sizes: Vec<usize>, slots: &[ComplexMatrix]) -> Self {
        let blocks = slots
            .iter()
            .map(|s| {
                let mut offset = 0;
                group_sizes
                    .iter()
                    .map(|&n| {
                        let b = s.view((offset, offset), (n, n)).into_owned();
                        offset += n;
                        b
                    })
                    .collect()
            })
            .collect();
        Self { group_sizes, blocks }
    }

    pub fn slots(&self) -> usize {
        self.blocks.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn block(&self, t: usize, k: usize) -> &ComplexMatrix {
        &self.blocks[t][k]
    }

    /// Full `N x N` block-diagonal response of slot `t`.
    pub fn slot_matrix(&self, t: usize) -> ComplexMatrix {
        let n: usize = self.group_sizes.iter().sum();
        let mut out = ComplexMatrix::zeros(n, n);
        let mut offset = 0;
        for b in &self.blocks[t] {
            let size = b.nrows();
            out.view_mut((offset, offset), (size, size)).copy_from(b);
            offset += size;
        }
        out
    }

    /// `T x N_k⁴` matrix whose row `t` is `vec(S_tᵀ ⊗ S_tᵀ)ᵀ` for group `k`.
    pub fn selection_matrix(&self, k: usize) -> ComplexMatrix {
        let n = self.group_sizes[k];
        let n4 = n.pow(4);
        let mut out = ComplexMatrix::zeros(self.blocks.len(), n4);
        for (t, slot) in self.blocks.iter().enumerate() {
            let st = slot[k].transpose();
            let kr = kronecker(&st, &st);
            for (j, &v) in kr.as_slice().iter().enumerate() {
                out[(t, j)] = v;
            }
        }
        out
    }
}
