use gl3kuz::lfunction::*;
use gl3kuz::special::SpectralPoint;
use gl3kuz::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn satake() -> impl Strategy<Value = SatakeParams> {
    (-2.0..2.0f64, -PI..PI, -2.0..2.0f64, -PI..PI)
        .prop_map(|(l1, t1, l2, t2)| SatakeParams::from_pair(C64::from_polar(l1.exp(), t1), C64::from_polar(l2.exp(), t2)))
}

fn unitary() -> impl Strategy<Value = SatakeParams> {
    (-PI..PI, -PI..PI).prop_map(|(a, b)| SatakeParams::unitary(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hecke_relation(sp in satake()) {
        let scale = hecke_eigenvalue(&sp, 0, 3).norm().max(1.0) * hecke_eigenvalue(&sp, 0, 1).norm().max(1.0);
        prop_assert!(hecke_relation_residual(&sp).norm() < 1e-10 * scale.max(1.0) * 10.0);
    }

    #[test]
    fn dual_swaps_indices(sp in satake(), k1 in 0u32..5, k2 in 0u32..5) {
        let a = hecke_eigenvalue(&sp.dual(), k1, k2);
        let b = hecke_eigenvalue(&sp, k2, k1);
        // individual monomials reach max|root|^(k1+k2) and may cancel
        let big = [sp.alpha, sp.beta, sp.gamma].iter().map(|z| z.norm().max(1.0 / z.norm())).fold(1.0, f64::max);
        prop_assert!((a - b).norm() < 1e-10 * big.powi((k1 + k2) as i32).max(b.norm()));
    }

    #[test]
    fn unitary_eigenvalue_floor(sp in unitary()) {
        let m = (1..=3).map(|j| hecke_eigenvalue(&sp, 0, j).norm()).fold(0.0, f64::max);
        prop_assert!(m >= UNITARY_MAX_EIGENVALUE_FLOOR - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn multiplicativity_random(sp in unitary(), n in 1u64..=500, m in 1u64..=500) {
        let r = hecke_multiplicativity_check(&sp, n, m).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }
}

#[test]
fn multiplicativity_non_unitary_prime_powers() {
    let sp = SatakeParams::from_pair(C64::new(1.3, 0.2), C64::new(-0.4, 0.9));
    for (n, m) in [(2, 2), (4, 8), (27, 9), (12, 18), (49, 343)] {
        let r = hecke_multiplicativity_check(&sp, n, m).unwrap();
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn self_amplification_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let sp = SatakeParams::unitary(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let eig = |_p: u64, j: u32| hecke_eigenvalue(&sp, 0, j);
        let spec = AmplifierSpec::aligned(20, &eig);
        let n = spec.primes.len() as f64;
        assert!(amplifier_value(&spec, &eig).unwrap() >= 0.05 * n * n);
    }
}

#[test]
fn conductor_tracks_gamma_factor_growth() {
    let pts: Vec<_> = [20u32, 40, 80].iter().map(|&t| SpectralPoint::new(t, t as f64).unwrap()).collect();
    let xs: Vec<f64> = pts.iter().map(|p| analytic_conductor(p).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| gamma_ratio_log(p, -0.25).unwrap()).collect();
    for i in 0..2 {
        let slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        assert!((slope / 0.75 - 1.0).abs() < 0.15, "{slope}");
    }
}
