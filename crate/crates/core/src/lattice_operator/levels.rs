//! Single-impurity levels, the roots of ψ(−λ) = 2π/ω, and the deterministic band sets.

use super::GAUSSIAN_CUTOFF;
use crate::disorder::DisorderLaw;
use crate::error::Result;
use crate::numerics::roots::brent;
use crate::specfun::{gamma, green0_radial, SpectralPoint};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::RangeInclusive;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub band: u32,
    pub lambda: f64,
    /// ln(−λ) for the root in I₀.
    pub log_neg_lambda: Option<f64>,
}

/// ln x for the x > 0 with ψ(x) = y.
pub fn psi_inverse_log(y: f64) -> f64 {
    let lo = -(y.abs() + 2.0).ln() - 1.0;
    let hi = y.max(1.0) + 2.0;
    let tol = 4.0 * f64::EPSILON * hi.abs().max(lo.abs());
    brent(|s| gamma::psi_of_exp(s) - y, lo, hi, tol, 300).unwrap_or(f64::NAN)
}

/// The x > 0 with ψ(x) = y (may overflow to +∞).
pub fn psi_inverse(y: f64) -> f64 {
    psi_inverse_log(y).exp()
}

pub(crate) fn deep_root_log(y: f64) -> f64 {
    psi_inverse_log(y)
}

/// λ in I_N (N ≥ 1) solving ψ(−λ) = y.
fn level_in_band(y: f64, band: u32) -> f64 {
    let n = band as f64;
    let lambda = |t: f64| {
        if t < 0.0 {
            let e = t.exp();
            (n - 1.0) + e / (1.0 + e)
        } else {
            let e = (-t).exp();
            n - e / (1.0 + e)
        }
    };
    let f = |t: f64| gamma::psi(Complex64::new(-lambda(t), 0.0)).re - y;
    let (mut lo, mut hi) = (-36.0, 36.0);
    while lambda(lo) <= n - 1.0 {
        lo += 1.0;
    }
    while lambda(hi) >= n {
        hi -= 1.0;
    }
    if f(lo) <= 0.0 {
        // Beyond the representable neighbourhood of the pole: ψ(−λ) ≈ 1/(λ − N + 1).
        return (n - 1.0) + 1.0 / y;
    }
    if f(hi) >= 0.0 {
        return n + 1.0 / y;
    }
    let tol = 4.0 * f64::EPSILON * (1.0 + hi.abs());
    brent(f, lo, hi, tol, 300).map(lambda).unwrap_or(f64::NAN)
}

fn level(y: f64, band: u32) -> Level {
    if band == 0 {
        let s = psi_inverse_log(y);
        Level {
            band,
            lambda: -s.exp(),
            log_neg_lambda: Some(s),
        }
    } else {
        Level {
            band,
            lambda: level_in_band(y, band),
            log_neg_lambda: None,
        }
    }
}

/// Real energies where the single-site matrix c^λ vanishes, one per requested band.
pub fn single_impurity_levels(omega: f64, bands: RangeInclusive<u32>) -> Vec<Level> {
    let y = 2.0 * PI / omega;
    bands.map(|b| level(y, b)).collect()
}

/// An interval of the deterministic spectrum inside one band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandInterval {
    pub band: u32,
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
    /// ln(−upper) for the unbounded interval in I₀.
    pub log_neg_upper: Option<f64>,
}

impl BandInterval {
    pub fn contains(&self, x: f64) -> bool {
        let lo = if self.lower_open {
            x > self.lower
        } else {
            x >= self.lower
        };
        let hi = if self.upper_open {
            x < self.upper
        } else {
            x <= self.upper
        };
        lo && hi
    }

    /// Containment for a root that may only be known through ln(−λ).
    pub fn contains_root(&self, lambda: f64, log_neg_lambda: Option<f64>) -> bool {
        match (log_neg_lambda, self.log_neg_upper) {
            (Some(s), Some(u)) if self.lower == f64::NEG_INFINITY => s >= u,
            _ => self.contains(lambda),
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Energies swept by single-impurity roots as ω runs over [−a, a] ∖ {0}.
pub fn band_edges(law: &DisorderLaw, bands: RangeInclusive<u32>) -> Result<Vec<BandInterval>> {
    law.validate()?;
    let y = 2.0 * PI / law.half_width;
    let mut out = Vec::new();
    for band in bands {
        if band == 0 {
            let shallow = psi_inverse(-y);
            out.push(BandInterval {
                band,
                lower: -shallow,
                upper: 0.0,
                lower_open: false,
                upper_open: true,
                log_neg_upper: None,
            });
            let s = psi_inverse_log(y);
            out.push(BandInterval {
                band,
                lower: f64::NEG_INFINITY,
                upper: -s.exp(),
                lower_open: true,
                upper_open: false,
                log_neg_upper: Some(s),
            });
        } else {
            let n = band as f64;
            out.push(BandInterval {
                band,
                lower: n - 1.0,
                upper: level_in_band(y, band),
                lower_open: true,
                upper_open: false,
                log_neg_upper: None,
            });
            out.push(BandInterval {
                band,
                lower: level_in_band(-y, band),
                upper: n,
                lower_open: false,
                upper_open: true,
                log_neg_upper: None,
            });
        }
    }
    Ok(out)
}

/// Σ_{n≠0} |G₀^λ(n, 0)| over the lattice, cut where κ|n|² exceeds the Gaussian cutoff.
fn kernel_row_sum(lambda: f64, kappa: f64) -> Result<f64> {
    let sp = SpectralPoint::real(lambda, kappa)?;
    let m = (GAUSSIAN_CUTOFF / kappa).sqrt().floor() as i64;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for a in -m..=m {
        for b in -m..=m {
            let d2 = a * a + b * b;
            if d2 > 0 && kappa * d2 as f64 <= GAUSSIAN_CUTOFF {
                *counts.entry(d2).or_default() += 1;
            }
        }
    }
    let mut sum = 0.0;
    for (d2, c) in counts {
        sum += c as f64 * green0_radial(&sp, d2 as f64)?.value.norm();
    }
    Ok(sum)
}

/// Band sets widened by Gershgorin discs of `M^λ`, valid for every window.
///
/// λ can only be an eigenvalue where |ψ(−λ)| ≥ 2π/a − (π/2κ) Σ_{n≠0}|G₀^λ(n, 0)|.
/// Each closed edge is moved into the neighbouring gap until that inequality fails;
/// if it holds across the whole gap the two pieces meet at the gap midpoint.
pub fn gershgorin_band_edges(
    law: &DisorderLaw,
    kappa: f64,
    bands: RangeInclusive<u32>,
) -> Result<Vec<BandInterval>> {
    let mut out = band_edges(law, bands)?;
    let y = 2.0 * PI / law.half_width;
    let slack = |lambda: f64| -> Result<f64> {
        let psi = gamma::psi(Complex64::new(-lambda, 0.0)).re.abs();
        Ok(psi + PI / (2.0 * kappa) * kernel_row_sum(lambda, kappa)? - y)
    };
    for pair in out.chunks_mut(2) {
        // The left piece ends at a closed upper edge, the right piece starts at a closed lower edge.
        let (left, right) = if pair[0].band == 0 { (1, 0) } else { (0, 1) };
        let (l, r) = (pair[left].upper, pair[right].lower);
        // Deep gaps in I₀ are sampled in ln(−λ).
        let deep = pair[0].band == 0 && l < -2.0;
        let to_x = |lambda: f64| if deep { (-lambda).ln() } else { lambda };
        let from_x = |x: f64| if deep { -x.exp() } else { x };
        let (xl, xr) = (to_x(l), to_x(r));
        const STEPS: usize = 400;
        let xs: Vec<f64> = (0..=STEPS)
            .map(|i| xl + (xr - xl) * i as f64 / STEPS as f64)
            .collect();
        let h: Vec<f64> = xs
            .iter()
            .map(|&x| slack(from_x(x)))
            .collect::<Result<_>>()?;
        let edge = |a: usize, b: usize| -> Result<f64> {
            let root = brent(
                |x| slack(from_x(x)).unwrap_or(f64::NAN),
                xs[a],
                xs[b],
                1e-13 * (1.0 + xs[a].abs()),
                200,
            );
            Ok(from_x(root.unwrap_or(xs[b])))
        };
        match (
            h.iter().position(|&v| v < 0.0),
            h.iter().rposition(|&v| v < 0.0),
        ) {
            (Some(first), Some(last)) => {
                if first > 0 {
                    pair[left].upper = edge(first - 1, first)?;
                }
                if last < STEPS {
                    pair[right].lower = edge(last, last + 1)?;
                }
            }
            _ => {
                let mid = from_x(0.5 * (xl + xr));
                pair[left].upper = mid;
                pair[right].lower = mid;
            }
        }
        pair[left].log_neg_upper = (pair[left].upper < 0.0).then(|| (-pair[left].upper).ln());
    }
    Ok(out)
}
