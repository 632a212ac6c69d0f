use num_complex::Complex64 as C64;

use super::config::SystemConfig;
use crate::error::{Error, Result};
use crate::tensor::{ComplexMatrix, ComplexTensor};

/// Pilot symbols as an `L x M x Q` tensor; its first unfolding is the
/// `L x MQ` pilot matrix with column `m + M q`.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotSet {
    tensor: ComplexTensor,
}

impl PilotSet {
    pub fn from_matrix(x: &ComplexMatrix, m: usize, q: usize) -> Result<Self> {
        let tensor = ComplexTensor::fold(x, 0, &[x.nrows(), m, q])?;
        Ok(Self { tensor })
    }

    pub fn tensor(&self) -> &ComplexTensor {
        &self.tensor
    }

    pub fn matrix(&self) -> ComplexMatrix {
        self.tensor.unfold(0).expect("order-3 tensor")
    }
}

/// Entry `(i, j)` of the Sylvester Hadamard matrix of a power-of-two order.
fn sylvester(i: usize, j: usize) -> f64 {
    if (i & j).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Hadamard row indices whose pairwise XORs are all distinct, chosen greedily
/// from the smallest index and topped up with the smallest unused rows when
/// no such set of size `l` exists.
///
/// Row `r` of a Sylvester matrix is the Walsh character `(-1)^popcount(r & j)`,
/// so when four rows satisfy `r₀ ⊕ r₁ = r₂ ⊕ r₃` the transmitted beam pattern
/// factors into per-axis terms that vanish on whole sets of delay or Doppler
/// tones. Distinct XORs rule that out.
pub fn pilot_rows(l: usize, order: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = Vec::with_capacity(l);
    let mut xors = vec![false; order];
    for r in 0..order {
        if rows.len() == l {
            break;
        }
        if rows.iter().all(|&c| !xors[r ^ c]) {
            for &c in &rows {
                xors[r ^ c] = true;
            }
            rows.push(r);
        }
    }
    for r in 0..order {
        if rows.len() == l {
            break;
        }
        if !rows.contains(&r) {
            rows.push(r);
        }
    }
    rows
}

/// Takes `L` rows of the Sylvester Hadamard matrix of order `MQ`, see
/// [`pilot_rows`].
pub fn gen_pilots(cfg: &SystemConfig) -> Result<PilotSet> {
    let l = cfg.antennas();
    let mq = cfg.m * cfg.q;
    if !mq.is_power_of_two() {
        return Err(Error::Config(format!("Hadamard pilots need m * q to be a power of two, got {mq}")));
    }
    if l > mq {
        return Err(Error::Config(format!("{l} antennas cannot get orthogonal pilots of length m * q = {mq}")));
    }
    let rows = pilot_rows(l, mq);
    let x = ComplexMatrix::from_fn(l, mq, |i, j| C64::new(sylvester(rows[i], j), 0.0));
    PilotSet::from_matrix(&x, cfg.m, cfg.q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::identity;

    #[test]
    fn rows_orthogonal_with_unit_entries() {
        let p = gen_pilots(&SystemConfig::default()).unwrap();
        let x = p.matrix();
        assert_eq!(x.shape(), (4, 16));
        assert!(x.iter().all(|z| z.im == 0.0 && z.re.abs() == 1.0));
        assert_eq!(&x * x.adjoint(), identity(4) * C64::new(16.0, 0.0));
    }

    #[test]
    fn row_choice() {
        assert_eq!(pilot_rows(4, 16), vec![0, 1, 2, 4]);
        assert_eq!(pilot_rows(1, 1), vec![0]);
        assert_eq!(pilot_rows(2, 2), vec![0, 1]);
        // Only 0, 1, 2 have distinct XORs in order 4; the last row fills in.
        assert_eq!(pilot_rows(4, 4), vec![0, 1, 2, 3]);
        for (l, order) in [(4, 16), (6, 16), (8, 64), (16, 16), (9, 32)] {
            let rows = pilot_rows(l, order);
            assert_eq!(rows.len(), l);
            let mut sorted = rows.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), l);
            assert!(rows.iter().all(|&r| r < order));
        }
        // Pairwise XORs are distinct whenever the greedy pass fills the set.
        let rows = pilot_rows(8, 64);
        let mut xors: Vec<usize> =
            (0..8).flat_map(|a| (a + 1..8).map(move |b| (a, b))).map(|(a, b)| rows[a] ^ rows[b]).collect();
        xors.sort_unstable();
        xors.dedup();
        assert_eq!(xors.len(), 28);
    }

    #[test]
    fn degenerate_single_pilot() {
        let cfg = SystemConfig { l_y: 1, l_z: 1, m: 1, q: 1, ..SystemConfig::default() };
        let x = gen_pilots(&cfg).unwrap().matrix();
        assert_eq!(x, ComplexMatrix::from_element(1, 1, C64::new(1.0, 0.0)));
    }

    #[test]
    fn unsupported_orders() {
        let cfg = SystemConfig { m: 3, ..SystemConfig::default() };
        assert!(matches!(gen_pilots(&cfg), Err(Error::Config(_))));
        let cfg = SystemConfig { l_y: 4, l_z: 8, ..SystemConfig::default() };
        assert!(matches!(gen_pilots(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn tensor_layout() {
        let p = gen_pilots(&SystemConfig::default()).unwrap();
        assert_eq!(p.tensor().shape(), &[4, 4, 4]);
        // Column m + M q of the matrix is the fiber (:, m, q).
        let x = p.matrix();
        assert_eq!(p.tensor().get(&[3, 1, 2]), x[(3, 1 + 4 * 2)]);
    }
}
