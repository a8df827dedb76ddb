//! Landau states in the closed form Σ_{i,j} c_{ij} (D^i g)(z) w^j e^{−κ|z|²}.
//!
//! Here g = z^k ψ₀^p, D = ∂_z/√(2κ) and w = √(2κ) z̄. In these variables the
//! creation operator acts as T(i,j) ↦ −T(i+1,j) + T(i,j+1) and the
//! annihilation operator as T(i,j) ↦ j T(i,j−1), so both act on integer
//! coefficient tables without rounding.

use super::{CanonicalProduct, LocalExpansion};
use crate::error::{Error, Result};
use crate::numerics::quad::gauss_legendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::Sub;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ladder {
    Raise,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauState {
    /// Landau level reached by the ladder moves applied so far.
    pub level: i32,
    /// Power k of the z^k factor.
    pub power: u32,
    /// Exponent p of ψ₀ in the seed g = z^k ψ₀^p.
    pub psi_power: u32,
    pub kappa: f64,
    /// coeffs[j][i] multiplies (D^i g) w^j.
    coeffs: Vec<Vec<i64>>,
}

impl LandauState {
    /// The lowest-level state z^k ψ₀^p e^{−κ|z|²}.
    pub fn seed(power: u32, psi_power: u32, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        Ok(LandauState {
            level: 0,
            power,
            psi_power,
            kappa,
            coeffs: vec![vec![1]],
        })
    }

    pub fn coefficients(&self) -> &[Vec<i64>] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|row| row.iter().all(|&c| c == 0))
    }

    fn trimmed(mut coeffs: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
        for row in coeffs.iter_mut() {
            while row.last() == Some(&0) {
                row.pop();
            }
        }
        while coeffs.last().is_some_and(|r| r.is_empty()) {
            coeffs.pop();
        }
        coeffs
    }

    /// Same seed and coefficients, level ignored.
    pub fn same_representation(&self, other: &LandauState) -> bool {
        self.power == other.power
            && self.psi_power == other.psi_power
            && self.kappa == other.kappa
            && Self::trimmed(self.coeffs.clone()) == Self::trimmed(other.coeffs.clone())
    }

    pub fn scaled(&self, factor: i64) -> LandauState {
        let mut s = self.clone();
        for row in s.coeffs.iter_mut() {
            for c in row.iter_mut() {
                *c *= factor;
            }
        }
        s
    }

    /// Highest derivative order of g that appears.
    pub fn derivative_order(&self) -> usize {
        self.coeffs
            .iter()
            .filter_map(|row| row.iter().rposition(|&c| c != 0))
            .max()
            .unwrap_or(0)
    }

    fn seed_derivatives(&self, e: &LocalExpansion, order: usize) -> Vec<Complex64> {
        // Q(δ) = q(z+δ)/q(z) = exp(Σ_r q_r δ^r / r!).
        let mut a = vec![Complex64::new(0.0, 0.0); order + 1];
        let mut fact = 1.0;
        for (r, ar) in a.iter_mut().enumerate().skip(1) {
            fact *= r as f64;
            *ar = e.log_derivs[r - 1] / fact;
        }
        let mut q = vec![Complex64::new(0.0, 0.0); order + 1];
        q[0] = Complex64::new(1.0, 0.0);
        for n in 1..=order {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 1..=n {
                acc += a[r] * q[n - r] * r as f64;
            }
            q[n] = acc / n as f64;
        }
        let psi = match e.factored {
            Some(n0) => mul_series(&[e.z - n0, Complex64::new(1.0, 0.0)], &q, order),
            None => q,
        };
        let mut g = binomial_series(e.z, self.power, order);
        for _ in 0..self.psi_power {
            g = mul_series(&g, &psi, order);
        }
        // Taylor coefficients to D^i g up to the common factor q(z)^p.
        let mut fact = 1.0;
        let s = (2.0 * self.kappa).sqrt();
        let mut scale = 1.0;
        for (i, gi) in g.iter_mut().enumerate() {
            if i > 0 {
                fact *= i as f64;
                scale *= s;
            }
            *gi *= fact / scale;
        }
        g
    }

    pub(crate) fn eval_expansion(&self, e: &LocalExpansion) -> Complex64 {
        let order = self.derivative_order();
        let d = self.seed_derivatives(e, order);
        let w = e.z.conj() * (2.0 * self.kappa).sqrt();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut wj = Complex64::new(1.0, 0.0);
        for row in &self.coeffs {
            let mut inner = Complex64::new(0.0, 0.0);
            for (i, &c) in row.iter().enumerate() {
                if c != 0 {
                    inner += d[i] * c as f64;
                }
            }
            sum += inner * wj;
            wj *= w;
        }
        if sum == Complex64::new(0.0, 0.0) {
            return sum;
        }
        (e.ln_q * self.psi_power as f64 - self.kappa * e.z.norm_sqr()).exp() * sum
    }

    pub fn eval(&self, z: Complex64, product: &CanonicalProduct) -> Complex64 {
        self.eval_expansion(&product.expansion(z, self.derivative_order()))
    }

    /// h_j(z) in state(z) = Σ_j h_j(z) z̄^j e^{−κ|z|²}.
    pub fn holomorphic_coefficients(
        &self,
        z: Complex64,
        product: &CanonicalProduct,
    ) -> Vec<Complex64> {
        let e = product.expansion(z, self.derivative_order());
        let order = self.derivative_order();
        let d = self.seed_derivatives(&e, order);
        let pref = (e.ln_q * self.psi_power as f64).exp();
        let s = (2.0 * self.kappa).sqrt();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let inner: Complex64 = row.iter().enumerate().map(|(i, &c)| d[i] * c as f64).sum();
                pref * inner * s.powi(j as i32)
            })
            .collect()
    }
}

impl Sub for &LandauState {
    type Output = LandauState;

    /// Coefficientwise difference; both states must share the seed.
    fn sub(self, rhs: &LandauState) -> LandauState {
        assert!(
            self.power == rhs.power && self.psi_power == rhs.psi_power && self.kappa == rhs.kappa,
            "states built on different seeds"
        );
        let rows = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..rows)
            .map(|j| {
                let a = self.coeffs.get(j).map(Vec::as_slice).unwrap_or(&[]);
                let b = rhs.coeffs.get(j).map(Vec::as_slice).unwrap_or(&[]);
                (0..a.len().max(b.len()))
                    .map(|i| a.get(i).copied().unwrap_or(0) - b.get(i).copied().unwrap_or(0))
                    .collect()
            })
            .collect();
        LandauState {
            coeffs: LandauState::trimmed(coeffs),
            ..self.clone()
        }
    }
}

fn mul_series(a: &[Complex64], b: &[Complex64], order: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); order + 1];
    for (i, &x) in a.iter().enumerate().take(order + 1) {
        if x == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Taylor coefficients of (z + δ)^k.
fn binomial_series(z: Complex64, k: u32, order: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); order + 1];
    let mut binom = 1.0;
    for (i, o) in out.iter_mut().enumerate() {
        if i as u32 > k {
            break;
        }
        if i > 0 {
            binom *= (k as f64 - i as f64 + 1.0) / i as f64;
        }
        *o = z.powu(k - i as u32) * binom;
    }
    out
}

pub fn ladder_apply(state: &LandauState, which: Ladder) -> LandauState {
    let rows = state.coeffs.len();
    let width = state.coeffs.iter().map(Vec::len).max().unwrap_or(0);
    let mut next = match which {
        Ladder::Raise => vec![vec![0i64; width + 1]; rows + 1],
        Ladder::Lower => vec![vec![0i64; width]; rows.max(1)],
    };
    for (j, row) in state.coeffs.iter().enumerate() {
        for (i, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            match which {
                Ladder::Raise => {
                    next[j][i + 1] -= c;
                    next[j + 1][i] += c;
                }
                Ladder::Lower => {
                    if j > 0 {
                        next[j - 1][i] += j as i64 * c;
                    }
                }
            }
        }
    }
    let level = match which {
        Ladder::Raise => state.level + 1,
        Ladder::Lower => state.level - 1,
    };
    LandauState {
        level,
        coeffs: LandauState::trimmed(next),
        ..state.clone()
    }
}

/// (a*)^m applied to z^k ψ₀^{m+1} e^{−κ|z|²}.
pub fn build_state(m: u32, k: u32, kappa: f64, product: &CanonicalProduct) -> Result<LandauState> {
    let mut s = LandauState::seed(k, m + 1, kappa)?;
    let threshold = product.growth_constant() * (m + 1) as f64;
    if kappa <= threshold {
        log::warn!("kappa = {kappa} does not exceed A(m+1) = {threshold:.3}; the level-{m} state need not be square integrable");
    }
    for _ in 0..m {
        s = ladder_apply(&s, Ladder::Raise);
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub level: i32,
    pub power: u32,
    pub kappa: f64,
    pub window_radius: f64,
    pub lattice_points: usize,
    pub max_lattice_value: f64,
    /// max |state| over a grid of spacing 1/4 in the window.
    pub peak: f64,
    pub disk_radii: Vec<f64>,
    /// ∫_{|z|≤r} |state|² for each radius.
    pub disk_norms: Vec<f64>,
    /// Disk norms settle: increments shrink and the last one is below 1% of the total.
    pub converging: bool,
    pub growth_constant: f64,
    /// A(m+1) with m the ψ₀ exponent minus one.
    pub threshold: f64,
}

impl StateReport {
    pub fn relative_lattice_max(&self) -> f64 {
        if self.peak > 0.0 {
            self.max_lattice_value / self.peak
        } else {
            0.0
        }
    }
}

/// Polar nodes (z, weight) covering the annulus r0 ≤ |z| ≤ r1.
fn annulus_nodes(r0: f64, r1: f64, radial: usize, angular: usize) -> Vec<(Complex64, f64)> {
    let (x, w) = gauss_legendre(radial);
    let mut out = Vec::with_capacity(radial * angular);
    let half = 0.5 * (r1 - r0);
    for (xi, wi) in x.iter().zip(&w) {
        let r = r0 + half * (xi + 1.0);
        for j in 0..angular {
            let th = 2.0 * PI * (j as f64 + 0.5) / angular as f64;
            out.push((
                Complex64::from_polar(r, th),
                half * wi * r * 2.0 * PI / angular as f64,
            ));
        }
    }
    out
}

/// Angular node count giving `per_unit` nodes per unit of arc at radius r.
fn angular_nodes(r: f64, per_unit: f64) -> usize {
    ((per_unit * 2.0 * PI * r / 8.0).ceil() as usize).max(4) * 8
}

fn annulus_mass(
    state: &LandauState,
    product: &CanonicalProduct,
    r0: f64,
    r1: f64,
    tol: f64,
) -> f64 {
    let mut radial = 8;
    let mut angular = angular_nodes(r1, 6.0);
    let mass = |radial: usize, angular: usize| -> f64 {
        let terms: Vec<f64> = annulus_nodes(r0, r1, radial, angular)
            .par_iter()
            .map(|&(z, w)| w * state.eval(z, product).norm_sqr())
            .collect();
        terms.iter().sum()
    };
    let mut prev = mass(radial, angular);
    for _ in 0..2 {
        radial *= 2;
        angular *= 2;
        let next = mass(radial, angular);
        if (next - prev).abs() <= tol * next.abs() {
            return next;
        }
        prev = next;
    }
    prev
}

pub fn verify_state(
    state: &LandauState,
    product: &CanonicalProduct,
    window_radius: f64,
    tol: f64,
) -> Result<StateReport> {
    if !(window_radius >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "window radius must be at least 1, got {window_radius}"
        )));
    }
    let m = window_radius.floor() as i32;
    let mut lattice = Vec::new();
    let mut grid = Vec::new();
    for a in -4 * m..=4 * m {
        for b in -4 * m..=4 * m {
            let z = Complex64::new(a as f64 / 4.0, b as f64 / 4.0);
            if z.norm() > window_radius {
                continue;
            }
            if a % 4 == 0 && b % 4 == 0 {
                lattice.push(z);
            } else {
                grid.push(z);
            }
        }
    }
    let max_lattice_value = lattice
        .par_iter()
        .map(|&z| state.eval(z, product).norm())
        .reduce(|| 0.0, f64::max);
    let peak = grid
        .par_iter()
        .map(|&z| state.eval(z, product).norm())
        .reduce(|| 0.0, f64::max);

    let mut disk_radii = Vec::new();
    let mut disk_norms = Vec::new();
    let mut total = 0.0;
    let mut increments = Vec::new();
    let mut r0 = 0.0;
    while r0 < window_radius - 1e-12 {
        let r1 = (r0 + 1.0).min(window_radius);
        let inc = annulus_mass(state, product, r0, r1, tol);
        total += inc;
        increments.push(inc);
        disk_radii.push(r1);
        disk_norms.push(total);
        r0 = r1;
    }
    let n = increments.len();
    let converging =
        n >= 2 && increments[n - 1] < increments[n - 2] && increments[n - 1] <= 1e-2 * total;
    let growth_constant = product.growth_constant();
    Ok(StateReport {
        level: state.level,
        power: state.power,
        kappa: state.kappa,
        window_radius,
        lattice_points: lattice.len(),
        max_lattice_value,
        peak,
        disk_radii,
        disk_norms,
        converging,
        growth_constant,
        threshold: growth_constant * state.psi_power as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub disk_radius: f64,
    /// ⟨φ_a, φ_b⟩ over the disk.
    pub gram: Vec<Vec<Complex64>>,
    /// Singular values of the Gram matrix after unit-diagonal scaling.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub full_rank: bool,
}

impl GramReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

const RANK_TOLERANCE: f64 = 1e-10;

/// Gram matrix of a family over the disk |z| ≤ radius; rank counted above 1e-10 of the largest singular value.
pub fn gram_report(
    states: &[LandauState],
    product: &CanonicalProduct,
    radius: f64,
) -> Result<GramReport> {
    if states.is_empty() || !(radius > 0.0) {
        return Err(Error::InvalidParameter(
            "need a nonempty family and a positive radius".into(),
        ));
    }
    let order = states
        .iter()
        .map(LandauState::derivative_order)
        .max()
        .unwrap_or(0);
    let mut nodes = Vec::new();
    let mut r0 = 0.0;
    while r0 < radius - 1e-12 {
        let r1 = (r0 + 1.0).min(radius);
        nodes.extend(annulus_nodes(r0, r1, 16, angular_nodes(r1, 12.0)));
        r0 = r1;
    }
    let values: Vec<Vec<Complex64>> = nodes
        .par_iter()
        .map(|&(z, _)| {
            let e = product.expansion(z, order);
            states.iter().map(|s| s.eval_expansion(&e)).collect()
        })
        .collect();
    let n = states.len();
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for (vals, &(_, w)) in values.iter().zip(&nodes) {
        for a in 0..n {
            for b in 0..n {
                g[(a, b)] += vals[a].conj() * vals[b] * w;
            }
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| g[(i, i)].re.sqrt()).collect();
    if diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InsufficientData(
            "a state has zero or non-finite disk norm".into(),
        ));
    }
    let scaled = DMatrix::from_fn(n, n, |a, b| g[(a, b)] / (diag[a] * diag[b]));
    let mut sv: Vec<f64> = scaled.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let rank = sv.iter().filter(|&&s| s > RANK_TOLERANCE * sv[0]).count();
    Ok(GramReport {
        disk_radius: radius,
        gram: (0..n)
            .map(|a| (0..n).map(|b| g[(a, b)]).collect())
            .collect(),
        singular_values: sv,
        rank,
        full_rank: rank == n,
    })
}

/// CSV grid `re,im,abs2` over the square [−half, half]² with the given spacing.
pub fn state_grid_csv(
    state: &LandauState,
    product: &CanonicalProduct,
    half_width: f64,
    step: f64,
) -> Result<String> {
    if !(step > 0.0 && half_width > 0.0) {
        return Err(Error::InvalidParameter(
            "grid spacing and extent must be positive".into(),
        ));
    }
    let m = (half_width / step).floor() as i64;
    let pts: Vec<Complex64> = (-m..=m)
        .flat_map(|b| (-m..=m).map(move |a| Complex64::new(a as f64 * step, b as f64 * step)))
        .collect();
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|&z| state.eval(z, product).norm_sqr())
        .collect();
    let mut out = String::from("re,im,abs2\n");
    for (z, v) in pts.iter().zip(vals) {
        let _ = writeln!(out, "{:?},{:?},{:?}", z.re, z.im, v);
    }
    Ok(out)
}
