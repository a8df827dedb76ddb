//! Gamma, digamma and trigamma in complex double precision.
//!
//! All functions here take the ordinary argument `z`; the energy-convention
//! wrappers (argument `−λ`) live in the parent module.

use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Bernoulli numbers B_2, B_4, ..., B_16.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// True when `z` sits exactly on a non-positive integer.
pub fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// sin(πz) with exact argument reduction of the real part.
fn sin_pi(z: Complex64) -> Complex64 {
    let k = z.re.round();
    let frac = Complex64::new(z.re - k, z.im);
    let s = (frac * PI).sin();
    if (k as i64).rem_euclid(2) == 0 {
        s
    } else {
        -s
    }
}

fn cot_pi(z: Complex64) -> Complex64 {
    let k = z.re.round();
    let frac = Complex64::new(z.re - k, z.im) * PI;
    frac.cos() / frac.sin()
}

/// Γ(z) by the Lanczos approximation with reflection. Poles give infinity.
pub fn gamma(z: Complex64) -> Complex64 {
    if is_pole(z) {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    if z.re < 0.5 {
        return PI / (sin_pi(z) * gamma(Complex64::new(1.0, 0.0) - z));
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        x += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// ln Γ(z) for Re z ≥ 0.5 (principal branch of the Lanczos form); reflects otherwise.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let s = sin_pi(z);
        return Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(Complex64::new(1.0, 0.0) - z);
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        x += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// ψ(z). Poles give infinity.
pub fn psi(z: Complex64) -> Complex64 {
    if is_pole(z) {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    if z.re < -20.0 {
        return psi(Complex64::new(1.0, 0.0) - z) - PI * cot_pi(z);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut y = z;
    while y.re < 15.0 {
        acc -= 1.0 / y;
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut pow = inv2;
    let mut series = Complex64::new(0.0, 0.0);
    for (k, &b) in BERNOULLI.iter().enumerate() {
        series += pow * (b / (2 * (k + 1)) as f64);
        pow *= inv2;
    }
    acc + y.ln() - 0.5 * inv - series
}

/// ψ₁(z) = Σ_k (z+k)^{-2}. Poles give infinity.
pub fn psi1(z: Complex64) -> Complex64 {
    if is_pole(z) {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    if z.re < -20.0 {
        let s = sin_pi(z);
        return PI * PI / (s * s) - psi1(Complex64::new(1.0, 0.0) - z);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut y = z;
    while y.re < 15.0 {
        acc += 1.0 / (y * y);
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut pow = inv2 * inv;
    let mut series = inv + 0.5 * inv2;
    for &b in BERNOULLI.iter() {
        series += pow * b;
        pow *= inv2;
    }
    acc + series
}

/// Real ψ on (0, ∞) with an asymptotic branch valid for astronomically large
/// arguments given through their logarithm `s = ln x`.
pub fn psi_of_exp(s: f64) -> f64 {
    if s < 30.0 {
        return psi(Complex64::new(s.exp(), 0.0)).re;
    }
    // ψ(x) = ln x − 1/(2x) − 1/(12x²) + ...; beyond s = 30 the corrections are < 1e-13.
    let inv = (-s).exp();
    s - 0.5 * inv - inv * inv / 12.0
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER: f64 = 0.577_215_664_901_532_9;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn gamma_reference_values() {
        assert!((gamma(c(1.0)).re - 1.0).abs() < 1e-14);
        assert!((gamma(c(0.5)).re - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(c(-0.5)).re + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert!((gamma(c(10.0)).re - 362_880.0).abs() / 362_880.0 < 1e-14);
        assert!(gamma(c(-2.0)).re.is_infinite());
    }

    #[test]
    fn gamma_recurrence_complex() {
        let z = Complex64::new(0.3, 1.7);
        let lhs = gamma(z + 1.0);
        let rhs = z * gamma(z);
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-13);
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &z in &[
            Complex64::new(2.5, 0.0),
            Complex64::new(3.0, 4.0),
            Complex64::new(-1.3, 0.2),
        ] {
            let a = ln_gamma(z).exp();
            let b = gamma(z);
            assert!((a - b).norm() / b.norm() < 1e-12, "{z}");
        }
    }

    #[test]
    fn psi_reference_values() {
        assert!((psi(c(1.0)).re + EULER).abs() < 1e-15);
        assert!((psi(c(3.0)).re - (1.5 - EULER)).abs() < 1e-14);
        assert!((psi(c(0.5)).re + EULER + 2.0 * 2f64.ln()).abs() < 1e-14);
        // reflection branch
        let z = c(-40.3);
        let direct = {
            let mut acc = psi(c(-40.3 + 60.0)).re;
            for j in 0..60 {
                acc -= 1.0 / (-40.3 + j as f64);
            }
            acc
        };
        assert!((psi(z).re - direct).abs() < 1e-11);
    }

    #[test]
    fn psi_complex_recurrence() {
        let z = Complex64::new(-2.7, 3.1);
        let d = psi(z + 1.0) - psi(z) - 1.0 / z;
        assert!(d.norm() < 1e-14);
    }

    #[test]
    fn psi1_reference_and_derivative() {
        assert!((psi1(c(1.0)).re - PI * PI / 6.0).abs() < 1e-14);
        for &x in &[-2.5, -0.3, 0.7, 4.2, -33.4] {
            let h = 1e-5;
            let fd = (psi(c(x + h)).re - psi(c(x - h)).re) / (2.0 * h);
            let exact = psi1(c(x)).re;
            assert!((fd - exact).abs() / exact.abs() < 1e-7, "x = {x}");
        }
    }

    #[test]
    fn psi_of_exp_continuity() {
        let below = psi_of_exp(29.999_999);
        let above = psi_of_exp(30.000_001);
        assert!((above - below - 2e-6).abs() < 1e-9);
    }
}
