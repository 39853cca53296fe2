//! Property-based invariants across modules.

use nalgebra::DMatrix;
use proptest::prelude::*;

use crate::oracles::*;
use lqo_core::bandpass::butterworth_bandpass;
use lqo_core::dense::{matrix_log_band, orth_basis, solve_dense_sylvester};
use lqo_core::diagnostics::{h2_norm, h2w_norm, sweep, ErrorEvaluator};
use lqo_core::io::{array_string, coordinate_string, parse_matrix_market};
use lqo_core::reducers::random_rom;
use lqo_core::sparse::{solve_sparse_dense_sylvester, CscMatrix};
use lqo_core::{project, FrequencyBand, ProjectionPair};

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn sparse_sweep_matches_bartels_stewart(seed in 0u64..10_000, n in 4usize..60, b in 1usize..6) {
        let mut g = rng(seed);
        let a = stable_matrix(&mut g, n);
        let s = stable_matrix(&mut g, b);
        let d = normal(&mut g, n, b);
        let x = solve_sparse_dense_sylvester(&CscMatrix::from_dense(&a), &s, &d).unwrap();
        let xo = solve_dense_sylvester(&a, &s, &d).unwrap();
        prop_assert!(rel_diff(&x, &xo) < 1e-9);
        prop_assert!((&a * &x + &x * &s + &d).norm() <= 1e-10 * (d.norm() + (a.norm() + s.norm()) * x.norm()));
    }

    #[test]
    fn band_log_is_additive(seed in 0u64..10_000, n in 1usize..7, w1 in 0.05f64..3.0, d1 in 0.1f64..3.0, d2 in 0.1f64..3.0) {
        let a = stable_matrix(&mut rng(seed), n);
        let f = |lo: f64, hi: f64| matrix_log_band(&a, &FrequencyBand::new(lo, hi).unwrap()).unwrap();
        let (w2, w3) = (w1 + d1, w1 + d1 + d2);
        let whole = f(w1, w3);
        let split = f(w1, w2) + f(w2, w3);
        prop_assert!((&whole - &split).norm() <= 1e-9 * (1.0 + whole.norm()));
    }

    #[test]
    fn band_norm_grows_with_the_band(seed in 0u64..10_000, n in 2usize..6, w1 in 0.1f64..2.0, w in 0.2f64..3.0, grow in 0.1f64..3.0) {
        let sys = random_system(&mut rng(seed), n, 1, 1);
        let inner = h2w_norm(&sys, &FrequencyBand::new(w1, w1 + w).unwrap()).unwrap();
        let outer = h2w_norm(&sys, &FrequencyBand::new(w1 * 0.5, w1 + w + grow).unwrap()).unwrap();
        let full = h2_norm(&sys).unwrap();
        prop_assert!(inner <= outer * (1.0 + 1e-10));
        prop_assert!(outer <= full * (1.0 + 1e-10));
    }

    #[test]
    fn similarity_transform_leaves_responses_unchanged(seed in 0u64..10_000, n in 2usize..7) {
        let mut g = rng(seed);
        let sys = random_system(&mut g, n, 2, 2);
        let t = normal(&mut g, n, n) + DMatrix::identity(n, n) * (2.0 * n as f64).sqrt();
        let w = t.clone().try_inverse().unwrap().transpose();
        let rom = project(&sys, &ProjectionPair::new(t, w).unwrap()).unwrap();
        let band = FrequencyBand::new(0.5, 2.0).unwrap();
        let ev = ErrorEvaluator::limited(&sys, &band).unwrap();
        prop_assert!(ev.relative_error(&rom).unwrap() < 1e-5);
        for rec in sweep(&sys, &rom, &[0.3, 1.0, 7.0]).unwrap() {
            prop_assert!(rec.linear_relerr < 1e-8 && rec.quadratic_relerr < 1e-8);
        }
    }

    #[test]
    fn matrix_market_round_trip_is_exact(seed in 0u64..10_000, r in 1usize..12, c in 1usize..12, density in 0.0f64..1.0) {
        let mut g = rng(seed);
        let d = normal(&mut g, r, c).map(|v| if v.abs() < density { 0.0 } else { v * 10f64.powi((v * 40.0) as i32) });
        prop_assert_eq!(parse_matrix_market(&array_string(&d)).unwrap().to_dense(), d.clone());
        let s = CscMatrix::from_dense(&d);
        prop_assert_eq!(parse_matrix_market(&coordinate_string(&s)).unwrap().to_dense(), d);
    }

    #[test]
    fn butterworth_gain_shape(w1 in 0.1f64..20.0, width in 0.05f64..20.0, half in 1usize..10) {
        let band = FrequencyBand::new(w1, w1 + width).unwrap();
        let f = butterworth_bandpass(&band, 2 * half).unwrap();
        let center = (band.omega1() * band.omega2()).sqrt();
        prop_assert!((f.response(center).norm() - 1.0).abs() < 1e-9);
        for edge in [band.omega1(), band.omega2()] {
            prop_assert!((f.response(edge).norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        }
        for x in [0.1, 0.7, 1.3, 5.0] {
            prop_assert!(f.response(center * x).norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn random_initial_roms_are_stable(k in 1usize..12, m in 1usize..3, p in 1usize..3, top in 0.1f64..1e3, seed in 0u64..1000) {
        let rom = random_rom(k, m, p, top, seed).unwrap();
        prop_assert!(rom.is_hurwitz());
        prop_assert_eq!(rom.order(), k);
        let again = random_rom(k, m, p, top, seed).unwrap();
        prop_assert_eq!(rom.a(), again.a());
    }

    #[test]
    fn orth_basis_is_orthonormal(seed in 0u64..10_000, n in 2usize..20, k in 1usize..6, rank in 1usize..6) {
        let mut g = rng(seed);
        let k = k.min(n);
        let rank = rank.min(k);
        let x = normal(&mut g, n, rank) * normal(&mut g, rank, k);
        let (q, r) = orth_basis(&x).unwrap();
        prop_assert_eq!(q.ncols(), k);
        prop_assert!((q.transpose() * &q - DMatrix::identity(k, k)).amax() < 1e-12);
        prop_assert_eq!(r, rank);
        // The leading columns span the range of x.
        let lead = q.columns(0, rank).into_owned();
        prop_assert!((&lead * lead.transpose() * &x - &x).norm() <= 1e-10 * x.norm());
    }
}

proptest! {
    #![proptest_config(cfg(4))]

    #[test]
    fn unlimited_norm_matches_quadrature(seed in 0u64..10_000, n in 1usize..4) {
        let sys = random_system(&mut rng(seed), n, 1, 1);
        let lib = h2_norm(&sys).unwrap();
        let quad = norm_sq_quadrature(&sys, 1e-10).sqrt();
        prop_assert!((lib - quad).abs() <= 1e-6 * quad, "{} vs {}", lib, quad);
    }
}

#[test]
fn quadrature_rule_is_exact_for_polynomials() {
    let v = integrate(|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0, 0.0, 1e-14);
    let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
    assert!((v - exact).abs() < 1e-12 * exact.abs());
    let atan = integrate_real_line(|x| 1.0 / (1.0 + x * x), 1e-12);
    assert!((atan - std::f64::consts::PI).abs() < 1e-10);
}
