//! Deterministic ingredients of the fractional-moment bound.

use crate::disorder::{DisorderLaw, LatticeSite};
use crate::error::{Error, Result};
use crate::numerics::quad::{integrate_real, QuadOptions};
use crate::specfun::{self, SpectralPoint};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

fn support_points(law: &DisorderLaw, extra: &[f64]) -> Vec<f64> {
    let a = law.half_width;
    let mut pts = vec![-a, 0.0, a];
    pts.extend(
        extra
            .iter()
            .copied()
            .filter(|x| x.is_finite() && x.abs() < a),
    );
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// ∫ f(ω)|α+βω|^{−s} dω over the support, with breakpoints `extra`.
///
/// Pieces ending at the zero c = −α/β are integrated in y = |ω − c|^{1−s},
/// which absorbs the singular factor.
fn singular_integral<F: Fn(f64) -> f64>(
    f: F,
    law: &DisorderLaw,
    s: f64,
    alpha: f64,
    beta: f64,
    extra: &[f64],
) -> f64 {
    let opts = QuadOptions::rel(1e-11).with_abs(1e-300);
    let c = (beta != 0.0).then(|| -alpha / beta);
    let mut brk = extra.to_vec();
    brk.extend(c);
    let pts = support_points(law, &brk);
    let q = 1.0 - s;
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        match c {
            Some(c) if a == c || b == c => {
                let far = if a == c { b } else { a };
                let dir = (far - c).signum();
                let ymax = (far - c).abs().powf(q);
                let (v, _) = integrate_real(|y| f(c + dir * y.powf(1.0 / q)), &[0.0, ymax], opts);
                total += v * beta.abs().powf(-s) / q;
            }
            _ => {
                let (v, _) =
                    integrate_real(|x| f(x) * (alpha + beta * x).abs().powf(-s), &[a, b], opts);
                total += v;
            }
        }
    }
    total
}

/// ∫|u−η|^s |αu+β|^{−s} μ(du) / ∫|αu+β|^{−s} μ(du) for u = 1/ω, ω distributed by `law`.
///
/// Evaluated in the ω variable, where the only unbounded factor is the
/// integrable |α + βω|^{−s}.
pub fn decoupling_ratio(law: &DisorderLaw, s: f64, eta: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "s must lie in (0, 1), got {s}"
        )));
    }
    let extra: Vec<f64> = if eta != 0.0 { vec![1.0 / eta] } else { vec![] };
    let num = singular_integral(
        |w| (1.0 - eta * w).abs().powf(s) * law.density(w),
        law,
        s,
        alpha,
        beta,
        &extra,
    );
    let den = singular_integral(
        |w| w.abs().powf(s) * law.density(w),
        law,
        s,
        alpha,
        beta,
        &extra,
    );
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub s: f64,
    pub samples: usize,
    /// Infimum of the ratio over the samples (proxy for ξ_s(0)^s).
    pub min_ratio: f64,
    /// min_ratio^{1/s}
    pub xi0_estimate: f64,
    /// (η, α, β) attaining the minimum.
    pub argmin: (f64, f64, f64),
    /// Range of ratio/|η|^s at |η| = 10³ over a fan of (α, β).
    pub large_eta_range: (f64, f64),
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Samples (η, α, β) and records the smallest decoupling ratio.
///
/// η is Cauchy with scale 1/a (the typical size of u = 1/ω), (α, β) is a uniform direction.
pub fn decoupling_probe(
    law: &DisorderLaw,
    s: f64,
    samples: usize,
    seed: u64,
) -> Result<DecouplingReport> {
    law.validate()?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(f64, f64, f64)> = (0..samples)
        .map(|_| {
            let eta = (PI * (uniform01(&mut rng) - 0.5)).tan() / law.half_width;
            let th = PI * uniform01(&mut rng);
            (eta, th.cos(), th.sin())
        })
        .collect();
    let ratios: Vec<f64> = draws
        .par_iter()
        .map(|&(e, a, b)| decoupling_ratio(law, s, e, a, b))
        .collect::<Result<_>>()?;
    let (imin, &min_ratio) = ratios
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .ok_or_else(|| Error::InsufficientData("no samples".into()))?;

    let big = 1e3;
    let fan: Vec<f64> = (0..16)
        .map(|j| {
            let th = PI * (j as f64 + 0.5) / 16.0;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            decoupling_ratio(law, s, sign * big, th.cos(), th.sin()).map(|r| r / big.powf(s))
        })
        .collect::<Result<_>>()?;
    let lo = fan.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fan.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DecouplingReport {
        s,
        samples,
        min_ratio,
        xi0_estimate: min_ratio.powf(1.0 / s),
        argmin: draws[imin],
        large_eta_range: (lo, hi),
    })
}

/// F(s, λ) = (4κ)^{−s} Σ_{n≠0} e^{γκ|n|} |G₀^λ(n, 0)|^s / ξ^s, with ξ the constant `xi0`.
///
/// The row sum is the same for every n′ because |G₀^λ(n, n′)| depends on |n − n′| only.
/// It is truncated where sκ|n|² − γκ|n| exceeds 60.
pub fn contraction_f(s: f64, lambda: f64, kappa: f64, gamma: f64, xi0: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) || !(xi0 > 0.0) {
        return Err(Error::InvalidParameter("need s ∈ (0, 1) and ξ > 0".into()));
    }
    let sp = SpectralPoint::real(lambda, kappa)?;
    sp.check_off_level()?;
    // Smallest R with sκR² − γκR ≥ 60.
    let (qa, qb) = (s * kappa, -gamma * kappa);
    let r = ((-qb + (qb * qb + 4.0 * qa * 60.0).sqrt()) / (2.0 * qa)).ceil() + 1.0;
    let m = r as i32;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for n1 in -m..=m {
        for n2 in -m..=m {
            let d2 = LatticeSite::new(n1, n2).norm_sqr();
            if d2 > 0 && (d2 as f64) <= r * r {
                *counts.entry(d2).or_default() += 1;
            }
        }
    }
    let terms: Vec<(i64, usize)> = counts.into_iter().collect();
    let parts: Vec<f64> = terms
        .par_iter()
        .map(|&(d2, count)| -> Result<f64> {
            let g = specfun::green0_radial(&sp, d2 as f64)?.value.norm();
            let d = (d2 as f64).sqrt();
            Ok(count as f64 * (gamma * kappa * d).exp() * g.powf(s))
        })
        .collect::<Result<_>>()?;
    let sum: f64 = parts.iter().sum();
    Ok((4.0 * kappa).powf(-s) * sum / xi0.powf(s))
}

/// K(t) = (1 + e^{−t/4} + (π/t)^{1/2})².
pub fn gaussian_sum_bound(t: f64) -> f64 {
    (1.0 + (-t / 4.0).exp() + (PI / t).sqrt()).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSum {
    pub t: f64,
    pub value: f64,
    pub tail_bound: f64,
    pub k_bound: f64,
}

/// Σ_{n∈ℤ[i]} e^{−t|n|²}, computed as the square of the one-dimensional theta sum.
pub fn lattice_gaussian_sum(t: f64) -> Result<GaussianSum> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t must be positive, got {t}"
        )));
    }
    let kmax = (745.0 / t).sqrt().ceil() as i64 + 1;
    let mut theta = 1.0;
    // Smallest terms first.
    for k in (1..=kmax).rev() {
        theta += 2.0 * (-t * (k * k) as f64).exp();
    }
    let k1 = (kmax + 1) as f64;
    let tail1 = 2.0 * (-t * k1 * k1).exp() / (1.0 - (-t * (2.0 * k1 + 1.0)).exp());
    Ok(GaussianSum {
        t,
        value: theta * theta,
        tail_bound: 2.0 * theta * tail1 + tail1 * tail1,
        k_bound: gaussian_sum_bound(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_sum_examples() {
        let g = lattice_gaussian_sum(1.0).unwrap();
        let theta: f64 = (-30..=30).map(|k: i32| (-(k * k) as f64).exp()).sum();
        assert!((g.value - theta * theta).abs() < 1e-14);
        assert!((g.value - 3.1423).abs() < 1e-4);
        assert!((g.k_bound - 12.61).abs() < 0.01);
        assert!((lattice_gaussian_sum(60.0).unwrap().value - 1.0).abs() < 1e-25);
        for &t in &[0.05, 0.1, 0.5, 1.0, 2.0, 5.0] {
            let g = lattice_gaussian_sum(t).unwrap();
            assert!(g.value + g.tail_bound <= g.k_bound, "t = {t}");
        }
    }

    #[test]
    fn decoupling_trivial_denominator() {
        let law = DisorderLaw::default();
        // α = 0, β = 1: ratio is the s-moment of |u − η|; at η = 0 that is ∫|ω|^{−s}dω/2 = 1/(1−s).
        let r = decoupling_ratio(&law, 0.7, 0.0, 0.0, 1.0).unwrap();
        assert!((r - 1.0 / 0.3).abs() < 1e-8);
    }

    #[test]
    fn decoupling_probe_uniform() {
        let law = DisorderLaw::default();
        let rep = decoupling_probe(&law, 0.7, 400, 1).unwrap();
        assert!(rep.min_ratio > 0.0);
        assert!(
            rep.large_eta_range.0 >= 0.9 && rep.large_eta_range.1 <= 1.1,
            "{:?}",
            rep.large_eta_range
        );
    }

    #[test]
    fn decoupling_matches_monte_carlo() {
        let law = DisorderLaw::default();
        let (s, eta, a, b) = (0.7, 0.8, 0.6, 0.8);
        let q = decoupling_ratio(&law, s, eta, a, b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..200_000 {
            let w = 2.0 * uniform01(&mut rng) - 1.0;
            let u = 1.0 / w;
            let wt = (a * u + b).abs().powf(-s);
            num += (u - eta).abs().powf(s) * wt;
            den += wt;
        }
        assert!((num / den - q).abs() < 0.02 * q, "{} vs {}", num / den, q);
    }

    #[test]
    fn contraction_shrinks_deep_in_lowest_band() {
        let f1 = contraction_f(0.7, -10.0, 2.0, 0.35, 1.0).unwrap();
        let f2 = contraction_f(0.7, -100.0, 2.0, 0.35, 1.0).unwrap();
        let f3 = contraction_f(0.7, -1000.0, 2.0, 0.35, 1.0).unwrap();
        assert!(f1 > f2 && f2 > f3);
    }
}
