use bdsense::harmonic::esprit_2d;
use bdsense::io::{config_to_string, parse_config};
use bdsense::scene::{add_noise, gen_codebook, spatial_freqs, upa_steering, SystemConfig};
use bdsense::tensor::identity;
use bdsense::{ComplexMatrix, ComplexTensor, C64};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codebook_slots_are_unitary(seed in any::<u64>()) {
        let cfg = SystemConfig { t: 4, ..SystemConfig::default() };
        let cb = gen_codebook(&cfg, seed);
        let n = cfg.n_y * cfg.n_z;
        for t in 0..cb.slots() {
            let u = cb.slot_matrix(t);
            let err = (u.adjoint() * &u - identity(u.ncols())).norm();
            prop_assert!(err <= 1e-12 * n as f64, "slot {t}: {err:e}");
        }
    }

    #[test]
    fn angles_survive_the_array_round_trip(az in 0.15f64..1.5, el in 0.15f64..1.5) {
        let (mu, psi) = spatial_freqs(az, el);
        let p = ComplexMatrix::from_column_slice(4, 1, &upa_steering(mu, psi, 2, 2));
        let est = esprit_2d(&(&p * p.transpose()), 2, 2).unwrap();
        prop_assert!((est.azimuth - az).abs() <= 1e-9, "{} vs {az}", est.azimuth);
        prop_assert!((est.elevation - el).abs() <= 1e-9, "{} vs {el}", est.elevation);
    }

    #[test]
    fn noise_hits_the_requested_snr(seed in any::<u64>(), snr in -20.0f64..40.0) {
        let y = ComplexTensor::from_fn(&[2, 3, 4], |i| C64::new(1.0 + i[0] as f64, i[1] as f64 - i[2] as f64));
        let (noisy, realized) = add_noise(&y, snr, seed).unwrap();
        let measured = 10.0 * (y.norm_sq() / noisy.diff_norm_sq(&y).unwrap()).log10();
        prop_assert!((measured - snr).abs() <= 1e-9);
        prop_assert!((realized - snr).abs() <= 1e-9);
    }

    #[test]
    fn config_text_round_trips(t in 1usize..300, seed in 0..=i64::MAX as u64, trials in 1usize..500) {
        let mut cfg = bdsense::eval::SweepConfig::default();
        cfg.system.t = t;
        cfg.sweep.seed = seed;
        cfg.sweep.trials = trials;
        let text = config_to_string(&cfg).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn seeds_past_the_file_range_are_rejected(seed in i64::MAX as u64 + 1..=u64::MAX) {
        let mut cfg = bdsense::eval::SweepConfig::default();
        cfg.sweep.seed = seed;
        prop_assert!(cfg.validate().is_err());
    }
}
