use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::ComplexTensor;

/// Adds circular white Gaussian noise scaled so that `‖Y‖²/‖Z‖²` equals the
/// target SNR for this draw. Returns the noisy tensor and the realized SNR in
/// dB. An SNR of `+inf` returns the input unchanged.
pub fn add_noise(y: &ComplexTensor, snr_db: f64, seed: u64) -> Result<(ComplexTensor, f64)> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::Config(format!("SNR must be finite or +inf, got {snr_db}")));
    }
    if snr_db == f64::INFINITY {
        return Ok((y.clone(), f64::INFINITY));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<C64> = (0..y.len()).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let z_energy: f64 = z.iter().map(|v| v.norm_sqr()).sum();
    let scale = (y.norm_sq() / z_energy / 10f64.powf(snr_db / 10.0)).sqrt();
    let data = y.data().iter().zip(&z).map(|(a, b)| a + b * scale).collect();
    let noisy = ComplexTensor::new(y.shape().to_vec(), data)?;
    let realized = 10.0 * (y.norm_sq() / (z_energy * scale * scale)).log10();
    Ok((noisy, realized))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal() -> ComplexTensor {
        ComplexTensor::from_fn(&[3, 4, 5], |i| C64::new(i[0] as f64 + 1.0, i[2] as f64 - i[1] as f64))
    }

    #[test]
    fn infinite_snr_is_identity() {
        let y = signal();
        let (noisy, snr) = add_noise(&y, f64::INFINITY, 1).unwrap();
        assert_eq!(noisy, y);
        assert_eq!(snr, f64::INFINITY);
    }

    #[test]
    fn calibrated_ratio() {
        let y = signal();
        for target in [0.0, 13.0, -7.5] {
            let (noisy, realized) = add_noise(&y, target, 2).unwrap();
            let noise_energy = noisy.diff_norm_sq(&y).unwrap();
            let ratio = y.norm_sq() / noise_energy;
            assert!((ratio / 10f64.powf(target / 10.0) - 1.0).abs() <= 1e-10);
            assert!((realized - target).abs() <= 1e-9);
        }
    }

    #[test]
    fn seeded() {
        let y = signal();
        assert_eq!(add_noise(&y, 5.0, 3).unwrap(), add_noise(&y, 5.0, 3).unwrap());
        assert_ne!(add_noise(&y, 5.0, 3).unwrap().0, add_noise(&y, 5.0, 4).unwrap().0);
    }

    #[test]
    fn rejects_nan() {
        assert!(add_noise(&signal(), f64::NAN, 0).is_err());
    }
}
