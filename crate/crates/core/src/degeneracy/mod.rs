//! The canonical product over the Gaussian integers and the degenerate Landau states built from it.
//!
//! ψ₀(z) = z Π_{0<|n|≤R}(1 − z/n) e^{z/n + z²/2n²} vanishes exactly on the
//! represented lattice points. The disk truncation keeps the fourfold symmetry
//! n ↦ in, so ψ₀(iz) = iψ₀(z) holds for the truncated product as well.

mod state;

pub use state::{
    build_state, gram_report, ladder_apply, state_grid_csv, verify_state, GramReport, Ladder,
    LandauState, StateReport,
};

use crate::error::{Error, Result};
use crate::specfun::KernelValue;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

pub const DEFAULT_CUTOFF: f64 = 32.0;

/// The truncated canonical product with its cached lattice orbits.
///
/// Points are stored as representatives a + ib (a > 0, b ≥ 0) of the orbits
/// {n, in, −n, −in}; an orbit contributes ln(1 − z⁴/n⁴) to ln ψ₀ because the
/// exponential factors cancel around it.
#[derive(Debug)]
pub struct CanonicalProduct {
    cutoff: f64,
    reps: Vec<Complex64>,
    growth: OnceLock<f64>,
}

impl Clone for CanonicalProduct {
    fn clone(&self) -> Self {
        CanonicalProduct::new(self.cutoff)
    }
}

impl Default for CanonicalProduct {
    fn default() -> Self {
        Self::new(DEFAULT_CUTOFF)
    }
}

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

const ROTATIONS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// ln(1 − y), with a short series for small y.
fn ln_one_minus(y: Complex64) -> Complex64 {
    if y.norm() < 1e-2 {
        let mut pow = y;
        let mut acc = c0();
        for k in 1..=9 {
            acc -= pow / k as f64;
            pow *= y;
        }
        acc
    } else {
        (Complex64::new(1.0, 0.0) - y).ln()
    }
}

/// ln(1 − x) + x + x²/2.
fn log_factor(x: Complex64) -> Complex64 {
    if x.norm() < 0.25 {
        let mut pow = x * x * x;
        let mut acc = c0();
        for k in 3..60 {
            let t = pow / k as f64;
            acc -= t;
            if t.norm() < 1e-18 * acc.norm() {
                break;
            }
            pow *= x;
        }
        acc
    } else {
        (Complex64::new(1.0, 0.0) - x).ln() + x + x * x * 0.5
    }
}

/// d^r/dz^r ln z = (−1)^{r−1}(r−1)!/z^r.
fn log_power_derivative(z: Complex64, r: usize) -> Complex64 {
    let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
    let fact: f64 = (1..r).map(|i| i as f64).product();
    z.powi(-(r as i32)) * (sign * fact)
}

/// Contribution of one lattice point n to the r-th derivative of ln ψ₀.
fn point_derivative(z: Complex64, n: Complex64, r: usize) -> Complex64 {
    let w = (z - n).inv();
    match r {
        1 => w + n.inv() + z / (n * n),
        2 => -(w * w) + (n * n).inv(),
        _ => log_power_derivative(z - n, r),
    }
}

/// Local data at z for Taylor expansion: ψ₀(z + δ) = (z − n₀ + δ)^e · q(z + δ),
/// with e = 1 when the nearest lattice point n₀ is represented (else e = 0).
#[derive(Clone, Debug)]
pub(crate) struct LocalExpansion {
    pub z: Complex64,
    pub factored: Option<Complex64>,
    pub ln_q: Complex64,
    /// d^r/dz^r ln q at z for r = 1..=order.
    pub log_derivs: Vec<Complex64>,
}

impl CanonicalProduct {
    pub fn new(cutoff: f64) -> Self {
        let m = cutoff.floor() as i32;
        let mut reps = Vec::new();
        for a in 1..=m {
            for b in 0..=m {
                if ((a * a + b * b) as f64) <= cutoff * cutoff + 1e-9 {
                    reps.push(Complex64::new(a as f64, b as f64));
                }
            }
        }
        // Largest |n| first so the partial sums accumulate small terms early.
        reps.sort_by(|x, y| {
            y.norm_sqr()
                .total_cmp(&x.norm_sqr())
                .then(x.re.total_cmp(&y.re))
        });
        CanonicalProduct {
            cutoff,
            reps,
            growth: OnceLock::new(),
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// The represented lattice point, if any, at z.
    fn lattice_point_at(&self, z: Complex64) -> Option<Complex64> {
        let n = Complex64::new(z.re.round(), z.im.round());
        (n == z && n.norm() <= self.cutoff + 1e-9).then_some(n)
    }

    fn nearest_represented(&self, z: Complex64) -> Option<Complex64> {
        let n = Complex64::new(z.re.round(), z.im.round());
        (n.norm() <= self.cutoff + 1e-9).then_some(n)
    }

    /// Bound on |ln ψ₀ − ln ψ₀^{(R)}| from Σ_{|n|>R} |z/n|³/(3(1 − |z/n|)).
    fn log_tail(&self, z: Complex64) -> f64 {
        let r = self.cutoff;
        let a = z.norm();
        if a >= r {
            return f64::INFINITY;
        }
        (2.0 * PI / 3.0) * a.powi(3) / (r * (1.0 - a / r))
    }

    /// Σ_{n ≠ 0, n ≠ skip} of ln(1 − z/n) + z/n + z²/2n² (when `with_log`) and its z-derivatives up to `order`.
    fn lattice_sums(
        &self,
        z: Complex64,
        order: usize,
        skip: Option<Complex64>,
        with_log: bool,
    ) -> (Complex64, Vec<Complex64>) {
        let mut ln = c0();
        let mut d = vec![c0(); order];
        let z2 = z * z;
        let z4 = z2 * z2;
        let skip_rep = skip.and_then(|s| {
            ROTATIONS
                .iter()
                .map(|&u| u * s)
                .find(|p| p.re > 0.0 && p.im >= 0.0)
        });
        for &n in &self.reps {
            if let (Some(s), true) = (skip, skip_rep == Some(n)) {
                for &u in &ROTATIONS {
                    let p = u * n;
                    if p == s {
                        continue;
                    }
                    if with_log {
                        ln += log_factor(z / p);
                    }
                    for (r, dr) in d.iter_mut().enumerate() {
                        *dr += point_derivative(z, p, r + 1);
                    }
                }
                continue;
            }
            let n2 = n * n;
            let n4 = n2 * n2;
            if with_log {
                ln += ln_one_minus(z4 / n4);
            }
            if order >= 1 {
                let den = (n4 - z4).inv();
                d[0] += -4.0 * z2 * z * den;
                if order >= 2 {
                    d[1] += (-12.0 * z2 * (n4 - z4) - 16.0 * z4 * z2) * den * den;
                }
                for (r, dr) in d.iter_mut().enumerate().skip(2) {
                    for &u in &ROTATIONS {
                        *dr += log_power_derivative(z - u * n, r + 1);
                    }
                }
            }
        }
        (ln, d)
    }

    pub(crate) fn expansion(&self, z: Complex64, order: usize) -> LocalExpansion {
        let n0 = self.nearest_represented(z);
        let skip = n0.filter(|n| *n != c0());
        let (mut ln_q, mut d) = self.lattice_sums(z, order, skip, true);
        if n0 != Some(c0()) {
            // Either the factor z survives or n₀ ≠ 0 carries its own smooth part.
            ln_q += z.ln();
            for (r, dr) in d.iter_mut().enumerate() {
                *dr += log_power_derivative(z, r + 1);
            }
            if let Some(n) = n0 {
                ln_q += (-n.inv()).ln() + z / n + z * z / (n * n * 2.0);
                if order >= 1 {
                    d[0] += n.inv() + z / (n * n);
                }
                if order >= 2 {
                    d[1] += (n * n).inv();
                }
            }
        }
        LocalExpansion {
            z,
            factored: n0,
            ln_q,
            log_derivs: d,
        }
    }

    /// ψ₀(z) with a bound on the truncation error.
    pub fn sigma_eval(&self, z: Complex64) -> KernelValue {
        if self.lattice_point_at(z).is_some() {
            return KernelValue {
                value: c0(),
                truncation_error: 0.0,
            };
        }
        let (sum, _) = self.lattice_sums(z, 0, None, true);
        let value = (z.ln() + sum).exp();
        let tail = self.log_tail(z);
        KernelValue {
            value,
            truncation_error: value.norm() * tail.exp_m1(),
        }
    }

    /// (ln ψ₀)^{(r)}(z) for r = 1..=order from the truncated lattice sums.
    pub fn sigma_log_derivatives(&self, z: Complex64, order: usize) -> Result<Vec<KernelValue>> {
        if self.lattice_point_at(z).is_some() {
            return Err(Error::Pole(format!("ψ₀ vanishes at the lattice point {z}")));
        }
        let (_, mut d) = self.lattice_sums(z, order, None, false);
        for r in 1..=order {
            d[r - 1] += log_power_derivative(z, r);
        }
        let rr = self.cutoff - z.norm();
        let a = z.norm();
        Ok(d.into_iter()
            .enumerate()
            .map(|(i, value)| {
                let r = i + 1;
                let tail = if rr <= 0.0 {
                    f64::INFINITY
                } else if r == 1 {
                    2.0 * PI * a * a / rr
                } else if r == 2 {
                    4.0 * PI * a / rr
                } else {
                    let fact: f64 = (1..r).map(|i| i as f64).product();
                    fact * 2.0 * PI / ((r - 2) as f64 * rr.powi(r as i32 - 2))
                };
                KernelValue {
                    value,
                    truncation_error: tail,
                }
            })
            .collect())
    }

    /// The growth constant over circles of radius 2..8, computed once.
    pub fn growth_constant(&self) -> f64 {
        *self
            .growth
            .get_or_init(|| growth_estimate(self, &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// max over the circles of sup log|ψ₀(z)|/|z|²
    pub a: f64,
    pub radii: Vec<f64>,
    pub per_radius: Vec<f64>,
    /// Relative change of the per-circle value between the two outermost circles.
    pub outer_change: f64,
}

const CIRCLE_SAMPLES: usize = 256;

/// Samples sup log|ψ₀|/|z|² on circles; radii should stay within R_p/2.
pub fn growth_estimate(product: &CanonicalProduct, radii: &[f64]) -> GrowthEstimate {
    let per_radius: Vec<f64> = radii
        .iter()
        .map(|&r| {
            (0..CIRCLE_SAMPLES)
                .map(|j| {
                    let z = Complex64::from_polar(
                        r,
                        2.0 * PI * (j as f64 + 0.5) / CIRCLE_SAMPLES as f64,
                    );
                    product.sigma_eval(z).value.norm().ln() / (r * r)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let a = per_radius.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let outer_change = match per_radius.len() {
        0 | 1 => 0.0,
        n => ((per_radius[n - 1] - per_radius[n - 2]) / per_radius[n - 2]).abs(),
    };
    GrowthEstimate {
        a,
        radii: radii.to_vec(),
        per_radius,
        outer_change,
    }
}
