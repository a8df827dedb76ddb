mod common;

use landau_delta::disorder::{sample_field, DisorderLaw, LatticeSite};
use landau_delta::lattice_operator::{build_m, resolvent_entry, Window};
use landau_delta::specfun::{self, SpectralPoint};
use num_complex::Complex64;
use std::f64::consts::PI;

#[test]
fn diagonal_difference_matches_level_series() {
    let field = sample_field(11, 2.0, DisorderLaw::default()).unwrap();
    let sites = Window::Disk { radius: 2.0 }.sites();
    for &(l1, l2, kappa) in &[
        (-0.5, 0.5, 1.0),
        (0.3, 2.6, 4.0),
        (-3.2, 1.7, 2.0),
        (1.25, 1.75, 0.5),
    ] {
        let m1 = build_m(SpectralPoint::real(l1, kappa).unwrap(), &field, &sites).unwrap();
        let m2 = build_m(SpectralPoint::real(l2, kappa).unwrap(), &field, &sites).unwrap();
        let expect = (l2 - l1) * (2.0 * kappa / PI) * common::level_pair_series(l1, l2);
        for i in 0..sites.len() {
            let got = (m1.entries[(i, i)] - m2.entries[(i, i)]).re;
            assert!(
                (got - expect).abs() <= 1e-8 * expect.abs().max(1.0),
                "{l1} {l2}: {got} vs {expect}"
            );
        }
    }
}

#[test]
fn kernel_difference_matches_product_quadrature() {
    let kappa = 1.0;
    let (l1, l2) = (-0.5, 0.5);
    let s1 = SpectralPoint::real(l1, kappa).unwrap();
    let s2 = SpectralPoint::real(l2, kappa).unwrap();
    for (a, b) in [
        (LatticeSite::new(0, 0), LatticeSite::new(1, 0)),
        (LatticeSite::new(0, 0), LatticeSite::new(1, 1)),
    ] {
        let (n, np) = (a.point(), b.point());
        let lhs =
            specfun::green0(&s2, n, np).unwrap().value - specfun::green0(&s1, n, np).unwrap().value;
        let rhs = common::green_product(kappa, l1, l2, n, np) * (l2 - l1);
        assert!(
            (lhs - rhs).norm() <= 1e-6 * lhs.norm().max(1e-3),
            "{a:?}-{b:?}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn real_energy_matrix_is_exactly_hermitian() {
    let field = sample_field(5, 3.0, DisorderLaw::default()).unwrap();
    let sites = Window::square(5).unwrap().sites();
    for &l in &[-2.5, 0.5, 3.5] {
        let m = build_m(SpectralPoint::real(l, 4.0).unwrap(), &field, &sites)
            .unwrap()
            .entries;
        assert_eq!(m, m.adjoint());
    }
}

#[test]
fn diagonal_resolvent_follows_rank_one_update() {
    let law = DisorderLaw::default();
    let field = sample_field(3, 2.0, law).unwrap();
    let sites = Window::Disk { radius: 2.0 }.sites();
    let kappa = 2.0;
    let sp = SpectralPoint::real(0.4, kappa).unwrap();
    let z = Complex64::new(0.1, 0.05);
    let n = LatticeSite::new(1, 0);
    let w1 = field.omega(&n).unwrap();
    let b = resolvent_entry(sp, z, &field, &sites, n, n).unwrap().value;
    for w2 in [0.3, -0.7, 0.95] {
        let moved = field.with_value(n, w2).unwrap();
        let got = resolvent_entry(sp, z, &moved, &sites, n, n).unwrap().value;
        let t = 4.0 * kappa * (1.0 / w2 - 1.0 / w1);
        let expect = b / (1.0 - t * b);
        assert!(
            (got - expect).norm() <= 1e-10 * expect.norm(),
            "ω = {w2}: {got} vs {expect}"
        );
    }
}
