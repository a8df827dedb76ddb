mod common;

use landau_delta::numerics::quad::{gauss_legendre, integrate_real, QuadOptions};
use landau_delta::specfun::{self, kummer_u_integral, kummer_u_log, SpectralPoint};
use num_complex::Complex64;
use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn log_series_matches_integral(neg_lambda in 0.05f64..6.0, rho in 0.05f64..20.0) {
        let s = kummer_u_log(c(neg_lambda), rho).unwrap().value;
        let i = kummer_u_integral(c(neg_lambda), 1, rho).unwrap().value;
        prop_assert!(rel(s, i) <= 1e-8, "a = {}, ρ = {}: {} vs {}", neg_lambda, rho, s, i);
    }

    #[test]
    fn contiguous_recurrence(a in 0.05f64..6.0, rho in 0.05f64..20.0) {
        // U(a,1,ρ) = ρ U(a+1,2,ρ) + a U(a+1,1,ρ)
        let lhs = kummer_u_log(c(a), rho).unwrap().value;
        let rhs = kummer_u_integral(c(a + 1.0), 2, rho).unwrap().value * rho + kummer_u_log(c(a + 1.0), rho).unwrap().value * a;
        prop_assert!(rel(lhs, rhs) <= 1e-8);
    }

    #[test]
    fn complex_energy_kernel_is_conjugate_symmetric(x in -3.0f64..3.0, y in 0.01f64..2.0, d in 0.1f64..2.5) {
        let a = SpectralPoint::new(Complex64::new(x, y), 1.5).unwrap();
        let b = SpectralPoint::new(Complex64::new(x, -y), 1.5).unwrap();
        let ga = specfun::green0_radial(&a, d * d).unwrap().value;
        let gb = specfun::green0_radial(&b, d * d).unwrap().value;
        prop_assert!((ga - gb.conj()).norm() <= 1e-10 * ga.norm().max(1e-300));
    }
}

#[test]
fn digamma_matches_partial_fraction_series() {
    for i in 0..50 {
        let lambda = -5.23 + 0.2 * i as f64;
        let got = specfun::digamma(c(lambda)).unwrap().re;
        let expect = common::digamma_series(lambda);
        assert!(
            (got - expect).abs() <= 1e-10 * expect.abs().max(1.0),
            "λ = {lambda}: {got} vs {expect}"
        );
    }
}

#[test]
fn projectors_are_idempotent() {
    let kappa = 1.0;
    let (x, w) = gauss_legendre(96);
    let half = 7.0;
    let pairs = [
        (c(0.0), Complex64::new(0.4, -0.3)),
        (Complex64::new(0.2, 0.1), Complex64::new(-0.6, 0.5)),
    ];
    for m in 0..=2 {
        for &(z, zp) in &pairs {
            let centre = 0.5 * (z + zp);
            let mut acc = c(0.0);
            for (xi, wi) in x.iter().zip(&w) {
                for (yj, wj) in x.iter().zip(&w) {
                    let v = centre + Complex64::new(half * xi, half * yj);
                    acc += specfun::projector_kernel(m, z, v, kappa)
                        * specfun::projector_kernel(m, v, zp, kappa)
                        * (wi * wj * half * half);
                }
            }
            let expect = specfun::projector_kernel(m, z, zp, kappa);
            assert!(
                (acc - expect).norm() <= 1e-6 * expect.norm().max(1e-3),
                "m = {m}: {acc} vs {expect}"
            );
        }
    }
}

#[test]
fn kernel_norm_matches_level_series() {
    for &(lambda, kappa) in &[(-0.5, 1.0), (0.5, 2.0), (1.3, 1.0)] {
        let sp = SpectralPoint::real(lambda, kappa).unwrap();
        let f = |r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            2.0 * PI * r * specfun::green0_radial(&sp, r * r).unwrap().value.norm_sqr()
        };
        let r_max = (46.0 / kappa).sqrt();
        let mut points = vec![0.0, 1e-6, 1e-3, 0.1];
        points.extend((1..).map(|i| 0.5 * i as f64).take_while(|&r| r < r_max));
        points.push(r_max);
        let (got, _) = integrate_real(f, &points, QuadOptions::rel(1e-11));
        let expect = (2.0 * kappa / PI) * common::level_pair_series(lambda, lambda);
        assert!(
            (got - expect).abs() <= 1e-6 * expect,
            "λ = {lambda}: {got} vs {expect}"
        );
    }
    // λ = −1/2, κ = 1 sums to π.
    let expect = (2.0 / PI) * common::level_pair_series(-0.5, -0.5);
    assert!((expect - PI).abs() < 1e-9);
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn kernel_stays_within_fitted_envelope() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for band in 0..=3u32 {
        let ratios: Vec<f64> = (0..200)
            .map(|_| {
                let lambda = if band == 0 {
                    uniform(&mut rng, -10.0, -0.05)
                } else {
                    band as f64 - 1.0 + uniform(&mut rng, 0.05, 0.95)
                };
                let kappa = uniform(&mut rng, 0.5, 8.0);
                let d = uniform(&mut rng, 0.05, (40.0 / kappa).sqrt().min(3.0));
                let sp = SpectralPoint::real(lambda, kappa).unwrap();
                specfun::green0_radial(&sp, d * d).unwrap().value.norm()
                    / specfun::green0_envelope(&sp, d)
            })
            .collect();
        let fitted = ratios.iter().copied().fold(0.0, f64::max);
        assert!(
            fitted > 0.0 && fitted <= 2.0,
            "band {band}: fitted C = {fitted:e}"
        );
    }
}
