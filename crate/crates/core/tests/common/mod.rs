//! Independent reference computations shared by the integration and acceptance suites.
#![allow(dead_code)]

use landau_delta::numerics::quad::gauss_legendre;
use landau_delta::specfun::{self, SpectralPoint};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// ψ(−λ) = −γ − Σ_m (λ+1)/((m+1)(m−λ)), summed to M terms with an Euler–Maclaurin tail.
pub fn digamma_series(lambda: f64) -> f64 {
    const M: usize = 200_000;
    let term = |m: f64| (lambda + 1.0) / ((m + 1.0) * (m - lambda));
    let mut acc = 0.0;
    for m in (0..M).rev() {
        acc += term(m as f64);
    }
    // ∫_M^∞ term + term(M)/2 − term′(M)/12
    let m = M as f64;
    let integral = -((m - lambda) / (m + 1.0)).ln();
    let h = 1e-3 * m;
    let deriv = (term(m + h) - term(m - h)) / (2.0 * h);
    -EULER_GAMMA - (acc + integral + 0.5 * term(m) - deriv / 12.0)
}

/// Σ_m 1/((m−λ₁)(m−λ₂)) with an Euler–Maclaurin tail.
pub fn level_pair_series(l1: f64, l2: f64) -> f64 {
    const M: usize = 200_000;
    let term = |m: f64| 1.0 / ((m - l1) * (m - l2));
    let mut acc = 0.0;
    for m in (0..M).rev() {
        acc += term(m as f64);
    }
    let m = M as f64;
    let integral = if (l1 - l2).abs() < 1e-12 {
        1.0 / (m - l1)
    } else {
        ((m - l2) / (m - l1)).ln() / (l1 - l2)
    };
    let h = 1e-3 * m;
    let deriv = (term(m + h) - term(m - h)) / (2.0 * h);
    acc + integral + 0.5 * term(m) - deriv / 12.0
}

/// Radial pieces of [0, r_max]: a graded first piece r = b·u² and unit pieces after it.
fn radial_nodes(r_max: f64) -> Vec<(f64, f64)> {
    let (x0, w0) = gauss_legendre(24);
    let (x1, w1) = gauss_legendre(16);
    let mut out = Vec::new();
    let b = 0.5;
    for (x, w) in x0.iter().zip(&w0) {
        let u = 0.5 * (x + 1.0);
        out.push((b * u * u, 0.5 * w * 2.0 * b * u));
    }
    let mut a = b;
    while a < r_max {
        let e = (a + 1.0).min(r_max);
        let h = 0.5 * (e - a);
        for (x, w) in x1.iter().zip(&w1) {
            out.push((a + h * (x + 1.0), h * w));
        }
        a = e;
    }
    out
}

fn kernel_or_zero(sp: &SpectralPoint, z: Complex64, zp: Complex64) -> Complex64 {
    if sp.kappa * (z - zp).norm_sqr() > 46.0 {
        return Complex64::new(0.0, 0.0);
    }
    specfun::green0(sp, z, zp)
        .map(|v| v.value)
        .unwrap_or(Complex64::new(0.0, 0.0))
}

/// ∫ G₀^{λ₁}(n, z) G₀^{λ₂}(z, n′) d²z for n ≠ n′.
///
/// The plane is split by χ = d′⁴/(d⁴ + d′⁴) (d, d′ the distances to n, n′); each part is
/// integrated in polar coordinates around the point where it is singular.
pub fn green_product(kappa: f64, l1: f64, l2: f64, n: Complex64, np: Complex64) -> Complex64 {
    let s1 = SpectralPoint::real(l1, kappa).unwrap();
    let s2 = SpectralPoint::real(l2, kappa).unwrap();
    let sep = (n - np).norm();
    let r_max = sep + (40.0 / kappa).sqrt();
    let radial = radial_nodes(r_max);
    const ANGULAR: usize = 96;
    let mut total = Complex64::new(0.0, 0.0);
    for (centre, other, own_part) in [(n, np, true), (np, n, false)] {
        for &(r, wr) in &radial {
            for j in 0..ANGULAR {
                let th = 2.0 * PI * (j as f64 + 0.5) / ANGULAR as f64;
                let z = centre + Complex64::from_polar(r, th);
                let d4 = (z - n).norm_sqr().powi(2);
                let dp4 = (z - np).norm_sqr().powi(2);
                let chi = if own_part {
                    dp4 / (d4 + dp4)
                } else {
                    d4 / (d4 + dp4)
                };
                if chi == 0.0 || z == other {
                    continue;
                }
                let f = kernel_or_zero(&s1, n, z) * kernel_or_zero(&s2, z, np);
                total += f * chi * (wr * r * 2.0 * PI / ANGULAR as f64);
            }
        }
    }
    total
}

/// Number of negative eigenvalues of a Hermitian matrix from the signs of the
/// elimination pivots D_k/D_{k−1} (Sylvester's law of inertia).
pub fn negative_pivots(m: &DMatrix<Complex64>) -> Option<usize> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut negatives = 0;
    for k in 0..n {
        let p = a[(k, k)].re;
        if p.abs() < 1e-300 {
            return None;
        }
        if p < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            for j in k..n {
                let v = a[(k, j)];
                a[(i, j)] -= f * v;
            }
        }
    }
    Some(negatives)
}
