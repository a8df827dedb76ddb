mod common;

use landau_delta::disorder::{derive_seed, sample_field, DisorderField, DisorderLaw, LatticeSite};
use landau_delta::lattice_operator::{
    band_eigenvalues, build_m, hellmann_feynman_probe, single_impurity_levels, Window,
};
use landau_delta::specfun::SpectralPoint;
use proptest::prelude::*;

fn field_for(seed: u64, window: &Window) -> DisorderField {
    sample_field(seed, window.covering_radius(), DisorderLaw::default()).unwrap()
}

/// λ inside band N at relative position t ∈ (0, 1); I₀ is mapped onto [−4, 0).
fn in_band(band: u32, t: f64) -> f64 {
    if band == 0 {
        -4.0 * (1.0 - t)
    } else {
        band as f64 - 1.0 + t
    }
}

#[test]
fn negative_pivots_count_roots_below() {
    let window = Window::square(3).unwrap();
    let sites = window.sites();
    for seed in 0..3 {
        let field = field_for(derive_seed(21, seed), &window);
        for band in 0..=3 {
            let set = band_eigenvalues(&field, &sites, 4.0, band).unwrap();
            assert_eq!(set.pairs.len(), sites.len());
            for i in 1..20 {
                let lambda = in_band(band, i as f64 / 20.0);
                if set.pairs.iter().any(|p| (p.lambda - lambda).abs() < 1e-6) {
                    continue;
                }
                let m = build_m(SpectralPoint::real(lambda, 4.0).unwrap(), &field, &sites).unwrap();
                let below = set.pairs.iter().filter(|p| p.lambda < lambda).count();
                assert_eq!(
                    common::negative_pivots(&m.entries),
                    Some(below),
                    "band {band}, λ = {lambda}"
                );
            }
        }
    }
}

#[test]
fn origin_only_matches_single_impurity_roots() {
    for omega in [0.5, -0.4, 0.9] {
        let field = DisorderField::constant(0.0, DisorderLaw::default(), omega).unwrap();
        let levels = single_impurity_levels(omega, 0..=3);
        for band in 0..=3 {
            let set = band_eigenvalues(&field, &[LatticeSite::ORIGIN], 2.0, band).unwrap();
            assert_eq!(set.pairs.len(), 1);
            let p = &set.pairs[0];
            let l = &levels[band as usize];
            match (p.log_neg_lambda, l.log_neg_lambda) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0)),
                _ => assert!(
                    (p.lambda - l.lambda).abs() <= 1e-9,
                    "ω {omega} band {band}: {} vs {}",
                    p.lambda,
                    l.lambda
                ),
            }
        }
    }
}

#[test]
fn hellmann_feynman_signs() {
    let window = Window::square(3).unwrap();
    let sites = window.sites();
    let field = field_for(8, &window);
    for band in 1..=2 {
        let r =
            hellmann_feynman_probe(&field, &sites, 4.0, band, LatticeSite::ORIGIN, 1e-5).unwrap();
        assert!(r.all_nonincreasing, "band {band}");
        assert!(r.fitted_constant > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn branches_decrease_in_lambda(seed in 0u64..1000, band in 0u32..=3, t in 0.05f64..0.95) {
        let window = Window::square(3).unwrap();
        let sites = window.sites();
        let field = field_for(seed, &window);
        let lambda = in_band(band, t);
        let h = 1e-5;
        let ev = |l: f64| build_m(SpectralPoint::real(l, 4.0).unwrap(), &field, &sites).unwrap().eigenvalues().unwrap();
        let (a, b) = (ev(lambda - h), ev(lambda + h));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(y < x, "λ = {}: {} → {}", lambda, x, y);
        }
    }

    #[test]
    fn every_band_holds_window_size(seed in 0u64..1000, band in 0u32..=3, kappa in prop::sample::select(vec![1.0, 4.0])) {
        let window = Window::square(5).unwrap();
        let sites = window.sites();
        let set = band_eigenvalues(&field_for(seed, &window), &sites, kappa, band).unwrap();
        prop_assert_eq!(set.pairs.len(), sites.len());
        prop_assert!(set.max_relative_residual() <= 1e-8);
    }
}
