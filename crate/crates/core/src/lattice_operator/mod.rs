//! The finite-volume lattice matrix `M^λ_Λ` and the spectral problems built on it.
//!
//! For a window Λ of impurity sites the matrix has diagonal entries
//! `c_n = (2κ/π)(ψ(−λ) − 2π/ω_n)` and off-diagonal entries `−G₀^λ(n, n′)`.
//! A real λ off the Landau levels is an eigenvalue of the finite-volume
//! Hamiltonian exactly when `M^λ_Λ` is singular.

mod eigenfunction;
mod levels;
mod probe;
mod spectrum;

pub use eigenfunction::{
    eigenfunction_eval, eigenfunction_norm_sqr, local_l2_profile, EigenfunctionProfile, ProfileRow,
};
pub use levels::{
    band_edges, gershgorin_band_edges, psi_inverse, single_impurity_levels, BandInterval, Level,
};
pub use probe::{hellmann_feynman_probe, u_sweep, BranchDerivative, ProbeReport};
pub use spectrum::{band_eigenvalues, band_eigenvalues_with, EigenPair, EigenpairSet, ScanOptions};

use crate::disorder::{DisorderField, LatticeSite};
use crate::error::{Error, Result};
use crate::specfun::{self, gamma, SpectralPoint};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Entries with κd² above this are dropped; the Gaussian envelope is below f64 resolution.
pub const GAUSSIAN_CUTOFF: f64 = 46.0;

/// The set Λ of impurity sites kept in a finite-volume computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Window {
    /// Lattice disk |n| ≤ radius.
    Disk { radius: f64 },
    /// Square |n₁|, |n₂| ≤ half_width, e.g. half_width 1 for a 3×3 block.
    Square { half_width: u32 },
}

impl Window {
    /// A (2h+1)×(2h+1) square block; `side` must be odd.
    pub fn square(side: u32) -> Result<Self> {
        if side.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "square window side must be odd, got {side}"
            )));
        }
        Ok(Window::Square {
            half_width: side / 2,
        })
    }

    pub fn sites(&self) -> Vec<LatticeSite> {
        match *self {
            Window::Disk { radius } => crate::disorder::sites_in_disk(radius),
            Window::Square { half_width } => {
                let h = half_width as i32;
                let mut out = Vec::with_capacity(((2 * h + 1) * (2 * h + 1)) as usize);
                for n2 in -h..=h {
                    for n1 in -h..=h {
                        out.push(LatticeSite::new(n1, n2));
                    }
                }
                out
            }
        }
    }

    /// Radius of the smallest origin-centred disk containing the window.
    pub fn covering_radius(&self) -> f64 {
        match *self {
            Window::Disk { radius } => radius,
            Window::Square { half_width } => half_width as f64 * std::f64::consts::SQRT_2,
        }
    }
}

/// Assembled `M^λ_Λ`. Immutable once built.
#[derive(Clone, Debug)]
pub struct FiniteOperator {
    pub sites: Vec<LatticeSite>,
    pub point: SpectralPoint,
    pub entries: DMatrix<Complex64>,
    pub hermitian: bool,
}

impl FiniteOperator {
    pub fn kappa(&self) -> f64 {
        self.point.kappa
    }

    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    pub fn index_of(&self, site: &LatticeSite) -> Option<usize> {
        self.sites.iter().position(|s| s == site)
    }

    /// Ascending eigenvalues; `None` unless the matrix is Hermitian.
    pub fn eigenvalues(&self) -> Option<Vec<f64>> {
        self.hermitian.then(|| sorted_eigenvalues(&self.entries))
    }
}

/// Off-diagonal part of `M^λ_Λ` at fixed λ, reusable across fields.
#[derive(Clone, Debug)]
pub(crate) struct OperatorTemplate {
    pub point: SpectralPoint,
    /// (2κ/π)ψ(−λ)
    pub diag_shift: Complex64,
    pub off: DMatrix<Complex64>,
}

/// Squared distances occurring in Λ, deduplicated and ascending.
fn distinct_d2(sites: &[LatticeSite]) -> Vec<i64> {
    let mut d2: Vec<i64> = Vec::new();
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            d2.push(a.sub(b).norm_sqr());
        }
    }
    d2.sort_unstable();
    d2.dedup();
    d2
}

/// Evaluates a radial kernel on every distinct squared distance of Λ (in parallel)
/// and fills an off-diagonal matrix `−radial(d²)·phase(n, n′)`.
fn fill_off_diagonal<F>(sites: &[LatticeSite], kappa: f64, radial: F) -> Result<DMatrix<Complex64>>
where
    F: Fn(f64) -> Result<Complex64> + Sync,
{
    let d2s: Vec<i64> = distinct_d2(sites)
        .into_iter()
        .filter(|&d| kappa * d as f64 <= GAUSSIAN_CUTOFF)
        .collect();
    let values: Vec<Complex64> = d2s
        .par_iter()
        .map(|&d| radial(d as f64))
        .collect::<Result<_>>()?;
    let table: BTreeMap<i64, Complex64> = d2s.into_iter().zip(values).collect();
    let l = sites.len();
    let mut m = DMatrix::<Complex64>::zeros(l, l);
    for i in 0..l {
        for j in i + 1..l {
            let d2 = sites[i].sub(&sites[j]).norm_sqr();
            if let Some(&g) = table.get(&d2) {
                let phase =
                    Complex64::from_polar(1.0, -2.0 * kappa * sites[i].wedge(&sites[j]) as f64);
                m[(i, j)] = -g * phase;
                m[(j, i)] = -g * phase.conj();
            }
        }
    }
    Ok(m)
}

impl OperatorTemplate {
    pub fn new(point: SpectralPoint, sites: &[LatticeSite]) -> Result<Self> {
        point.check_off_level()?;
        let kappa = point.kappa;
        let diag_shift = gamma::psi(-point.lambda) * (2.0 * kappa / PI);
        let off = fill_off_diagonal(sites, kappa, |d2| {
            Ok(specfun::green0_radial(&point, d2)?.value)
        })?;
        Ok(OperatorTemplate {
            point,
            diag_shift,
            off,
        })
    }

    /// `M^λ` for the given inverse strengths u_n = 1/ω_n (aligned with `sites`).
    pub fn assemble(&self, inverse_strengths: &[f64]) -> DMatrix<Complex64> {
        let kappa = self.point.kappa;
        let mut m = self.off.clone();
        for (i, &u) in inverse_strengths.iter().enumerate() {
            m[(i, i)] = self.diag_shift - 4.0 * kappa * u;
        }
        m
    }
}

pub(crate) fn inverse_strengths(field: &DisorderField, sites: &[LatticeSite]) -> Result<Vec<f64>> {
    sites
        .iter()
        .map(|s| field.omega(s).map(|w| 1.0 / w))
        .collect()
}

pub(crate) fn sorted_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Builds `M^λ_Λ` for the field restricted to `sites`.
pub fn build_m(
    point: SpectralPoint,
    field: &DisorderField,
    sites: &[LatticeSite],
) -> Result<FiniteOperator> {
    let u = inverse_strengths(field, sites)?;
    let template = OperatorTemplate::new(point, sites)?;
    Ok(FiniteOperator {
        sites: sites.to_vec(),
        point,
        entries: template.assemble(&u),
        hermitian: point.is_real(),
    })
}

/// `dM^λ/dλ` on Λ: diagonal −(2κ/π)ψ′(−λ), off-diagonal −∂_λG₀^λ(n, n′).
pub fn lambda_derivative(
    point: SpectralPoint,
    sites: &[LatticeSite],
) -> Result<DMatrix<Complex64>> {
    point.check_off_level()?;
    let kappa = point.kappa;
    let mut m = fill_off_diagonal(sites, kappa, |d2| {
        specfun::green0_radial_dlambda(&point, d2)
    })?;
    let diag = -gamma::psi1(-point.lambda) * (2.0 * kappa / PI);
    for i in 0..sites.len() {
        m[(i, i)] = diag;
    }
    Ok(m)
}

/// A verified choice of the auxiliary non-real energy λ_κ = −r(1+i).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizerChoice {
    pub lambda_kappa: Complex64,
    pub r: f64,
    pub contraction_norm: f64,
    pub im_psi: f64,
}

pub const DEFAULT_R_MAX: f64 = 1.0e6;

/// Doubling search for the smallest r = 2^j with ‖A^λ (D^λ)⁻¹‖ < 1/2 on Λ,
/// where D^λ is the diagonal and A^λ the off-diagonal part of `M^λ` at λ = −r(1+i).
pub fn choose_regularizer(
    field: &DisorderField,
    sites: &[LatticeSite],
    kappa: f64,
    r_max: f64,
) -> Result<RegularizerChoice> {
    if kappa < 1.0 {
        log::warn!("choose_regularizer: κ = {kappa} < 1, contraction is not guaranteed");
    }
    let u = inverse_strengths(field, sites)?;
    let mut best = f64::INFINITY;
    let mut r = 1.0;
    while r <= r_max {
        let lambda = Complex64::new(-r, -r);
        let point = SpectralPoint::new(lambda, kappa)?;
        let template = OperatorTemplate::new(point, sites)?;
        let psi = gamma::psi(-lambda);
        // A = −off, D = diag(c_n); ‖A D⁻¹‖ is invariant under the sign of A.
        let mut scaled = template.off.clone();
        for (j, &uj) in u.iter().enumerate() {
            let c = template.diag_shift - 4.0 * kappa * uj;
            if c.norm() == 0.0 {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                });
            }
            let inv = c.inv();
            for i in 0..u.len() {
                scaled[(i, j)] *= inv;
            }
        }
        let norm = if sites.len() > 1 {
            scaled.singular_values().max()
        } else {
            0.0
        };
        best = best.min(norm);
        if norm < 0.5 && psi.im != 0.0 {
            return Ok(RegularizerChoice {
                lambda_kappa: lambda,
                r,
                contraction_norm: norm,
                im_psi: psi.im,
            });
        }
        r *= 2.0;
    }
    Err(Error::NoContraction { r_max, best })
}

/// A resolvent matrix element with the 1-norm condition number of `M^λ − z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventEntry {
    pub value: Complex64,
    pub condition: f64,
}

/// Systems with a condition estimate above this are reported as singular.
pub const SINGULAR_CONDITION: f64 = 1.0e14;

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `(M − z)x = e_m` and returns x_n together with a condition estimate.
pub fn solve_resolvent_column(
    m: &DMatrix<Complex64>,
    z: Complex64,
    column: usize,
) -> Result<(DVector<Complex64>, f64)> {
    let l = m.nrows();
    let mut a = m.clone();
    for i in 0..l {
        a[(i, i)] -= z;
    }
    let norm = one_norm(&a);
    let lu = a.lu();
    let inv = lu.try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = norm * one_norm(&inv);
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(Error::Singular { condition });
    }
    Ok((inv.column(column).into_owned(), condition))
}

/// ⟨n|(M^λ_Λ − z)⁻¹|m⟩.
pub fn resolvent_entry(
    point: SpectralPoint,
    z: Complex64,
    field: &DisorderField,
    sites: &[LatticeSite],
    n: LatticeSite,
    m: LatticeSite,
) -> Result<ResolventEntry> {
    let op = build_m(point, field, sites)?;
    let i = op.index_of(&n).ok_or(Error::MissingSite(n))?;
    let j = op.index_of(&m).ok_or(Error::MissingSite(m))?;
    let (col, condition) = solve_resolvent_column(&op.entries, z, j)?;
    Ok(ResolventEntry {
        value: col[i],
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_field, DisorderLaw};

    fn origin_field(omega: f64) -> DisorderField {
        DisorderField::constant(0.0, DisorderLaw::default(), omega).unwrap()
    }

    #[test]
    fn single_site_matrix() {
        let f = origin_field(0.5);
        let sp = SpectralPoint::real(-0.3, 2.0).unwrap();
        let op = build_m(sp, &f, &[LatticeSite::ORIGIN]).unwrap();
        let expect = (4.0 / PI) * (gamma::psi(Complex64::new(0.3, 0.0)).re - 4.0 * PI);
        assert!((op.entries[(0, 0)].re - expect).abs() < 1e-12 * expect.abs());
        assert!(op.hermitian);
    }

    #[test]
    fn real_energy_gives_exactly_hermitian_matrix() {
        let f = sample_field(7, 3.0, DisorderLaw::default()).unwrap();
        let sites = Window::square(5).unwrap().sites();
        let op = build_m(SpectralPoint::real(0.4, 1.0).unwrap(), &f, &sites).unwrap();
        let m = &op.entries;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                assert_eq!(m[(i, j)], m[(j, i)].conj());
            }
        }
    }

    #[test]
    fn off_diagonal_matches_direct_kernel() {
        let sites = [LatticeSite::ORIGIN, LatticeSite::new(1, 0)];
        let f = DisorderField::constant(1.0, DisorderLaw::default(), 0.3).unwrap();
        let sp = SpectralPoint::real(-0.5, 2.0).unwrap();
        let op = build_m(sp, &f, &sites).unwrap();
        let g = specfun::green0(&sp, sites[0].point(), sites[1].point())
            .unwrap()
            .value;
        assert!((op.entries[(0, 1)] + g).norm() < 1e-15 * g.norm());
        let env = specfun::green0_envelope(&sp, 1.0);
        assert!(op.entries[(0, 1)].norm() <= 4.0 * env);
    }

    #[test]
    fn missing_site_and_pole_are_errors() {
        let f = origin_field(0.5);
        let sp = SpectralPoint::real(-0.3, 1.0).unwrap();
        assert!(matches!(
            build_m(sp, &f, &[LatticeSite::new(1, 0)]),
            Err(Error::MissingSite(_))
        ));
        let lvl = SpectralPoint::real(2.0, 1.0).unwrap();
        assert!(matches!(
            build_m(lvl, &f, &[LatticeSite::ORIGIN]),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn single_site_resolvent() {
        let f = origin_field(-0.7);
        let sp = SpectralPoint::real(0.5, 1.5).unwrap();
        let z = Complex64::new(0.2, 0.1);
        let c = build_m(sp, &f, &[LatticeSite::ORIGIN]).unwrap().entries[(0, 0)];
        let r = resolvent_entry(
            sp,
            z,
            &f,
            &[LatticeSite::ORIGIN],
            LatticeSite::ORIGIN,
            LatticeSite::ORIGIN,
        )
        .unwrap();
        assert!((r.value - 1.0 / (c - z)).norm() < 1e-14 * r.value.norm());
    }

    #[test]
    fn regularizer_single_site_and_window() {
        let f = origin_field(0.5);
        let choice = choose_regularizer(&f, &[LatticeSite::ORIGIN], 1.0, DEFAULT_R_MAX).unwrap();
        assert_eq!(choice.contraction_norm, 0.0);
        assert!(choice.im_psi != 0.0);

        let f = sample_field(3, 3.0, DisorderLaw::default()).unwrap();
        let sites = Window::square(5).unwrap().sites();
        let choice = choose_regularizer(&f, &sites, 4.0, DEFAULT_R_MAX).unwrap();
        assert!(choice.contraction_norm < 0.5);
    }

    #[test]
    fn derivative_matches_finite_difference_of_matrix() {
        let f = sample_field(11, 2.0, DisorderLaw::default()).unwrap();
        let sites = Window::square(3).unwrap().sites();
        let lam = 0.37;
        let d = lambda_derivative(SpectralPoint::real(lam, 1.0).unwrap(), &sites).unwrap();
        let h = 1e-5;
        let mp = build_m(SpectralPoint::real(lam + h, 1.0).unwrap(), &f, &sites)
            .unwrap()
            .entries;
        let mm = build_m(SpectralPoint::real(lam - h, 1.0).unwrap(), &f, &sites)
            .unwrap()
            .entries;
        let fd = (mp - mm) / Complex64::new(2.0 * h, 0.0);
        assert!((fd - &d).norm() < 1e-6 * d.norm());
    }
}
