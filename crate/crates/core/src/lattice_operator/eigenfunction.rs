//! Continuum eigenfunctions reconstructed from kernel vectors of `M^λ`.
//!
//! For a kernel vector v the function φ(z) = Σ_n G₀^λ(z, n) v_n solves the
//! eigenvalue equation away from Λ. It is returned unnormalised; its squared
//! L² norm is v*(−dM^λ/dλ)v, see [`eigenfunction_norm_sqr`].

use super::{lambda_derivative, GAUSSIAN_CUTOFF};
use crate::disorder::LatticeSite;
use crate::error::{Error, Result};
use crate::numerics::quad::gauss_legendre;
use crate::specfun::{self, SpectralPoint};
use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

fn phi_at(
    sp: &SpectralPoint,
    v: &[Complex64],
    sites: &[LatticeSite],
    z: Complex64,
) -> Result<Complex64> {
    let floor = 1e-13 * v.iter().fold(0.0f64, |a, x| a.max(x.norm()));
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, &c) in sites.iter().zip(v) {
        if c.norm() <= floor {
            continue;
        }
        let d2 = (z - s.point()).norm_sqr();
        if sp.kappa * d2 > GAUSSIAN_CUTOFF {
            continue;
        }
        acc += specfun::green0(sp, z, s.point())?.value * c;
    }
    Ok(acc)
}

/// φ(z) = Σ_n G₀^λ(z, n) v_n at each point. Points on Λ are a coincidence error.
pub fn eigenfunction_eval(
    lambda: f64,
    v: &[Complex64],
    sites: &[LatticeSite],
    kappa: f64,
    points: &[Complex64],
) -> Result<Vec<Complex64>> {
    if v.len() != sites.len() {
        return Err(Error::InvalidParameter(
            "vector length does not match the window".into(),
        ));
    }
    let sp = SpectralPoint::real(lambda, kappa)?;
    sp.check_off_level()?;
    points
        .par_iter()
        .map(|&z| phi_at(&sp, v, sites, z))
        .collect()
}

/// ‖φ‖² = v*(−dM^λ/dλ)v.
pub fn eigenfunction_norm_sqr(
    lambda: f64,
    v: &[Complex64],
    sites: &[LatticeSite],
    kappa: f64,
) -> Result<f64> {
    let d = lambda_derivative(SpectralPoint::real(lambda, kappa)?, sites)?;
    let dv = DVector::from_column_slice(v);
    Ok(-(dv.adjoint() * d * &dv)[(0, 0)].re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub site: LatticeSite,
    /// Distance to the site carrying the largest |v_n|.
    pub distance: f64,
    /// |φ|² at the plaquette centre n + (1+i)/2.
    pub phi_abs2: f64,
    /// ∫_{|z′|≤b} |φ(n + z′)|² dz′.
    pub local_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenfunctionProfile {
    pub lambda: f64,
    pub kappa: f64,
    pub disk_radius: f64,
    pub rows: Vec<ProfileRow>,
    /// Length ℓ from fitting local_l2 ∝ e^{−2d/ℓ} over rows with d ≥ 1 above 1e-22 of the peak.
    pub fitted_length: Option<f64>,
    /// ℓ/(2/κ).
    pub length_ratio: Option<f64>,
}

impl EigenfunctionProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,distance,phi_abs2,local_l2\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?}",
                r.site.n1, r.site.n2, r.distance, r.phi_abs2, r.local_l2
            );
        }
        out
    }
}

const RADIAL_NODES: usize = 12;
const ANGULAR_NODES: usize = 16;

/// Local L² masses of φ on disks of radius `b` (< 1/2 keeps one singularity per disk) at every site.
pub fn local_l2_profile(
    lambda: f64,
    v: &[Complex64],
    sites: &[LatticeSite],
    kappa: f64,
    b: f64,
) -> Result<EigenfunctionProfile> {
    if !(b > 0.0 && b < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "disk radius must lie in (0, 1/2), got {b}"
        )));
    }
    if v.len() != sites.len() {
        return Err(Error::InvalidParameter(
            "vector length does not match the window".into(),
        ));
    }
    let sp = SpectralPoint::real(lambda, kappa)?;
    sp.check_off_level()?;
    let peak = (0..v.len()).fold(0, |best, i| {
        if v[i].norm() > v[best].norm() {
            i
        } else {
            best
        }
    });
    let centre = sites[peak].point();
    let (un, uw) = gauss_legendre(RADIAL_NODES);
    let rows: Vec<ProfileRow> = sites
        .par_iter()
        .map(|s| -> Result<ProfileRow> {
            let z0 = s.point();
            let mut mass = 0.0;
            // r = b u², u ∈ (0, 1): dr = 2bu du softens the logarithm at the centre.
            for (x, w) in un.iter().zip(&uw) {
                let u = 0.5 * (x + 1.0);
                let r = b * u * u;
                let jac = 0.5 * w * 2.0 * b * u * r;
                let mut ring = 0.0;
                for j in 0..ANGULAR_NODES {
                    let th = 2.0 * PI * (j as f64 + 0.5) / ANGULAR_NODES as f64;
                    ring += phi_at(&sp, v, sites, z0 + Complex64::from_polar(r, th))?.norm_sqr();
                }
                mass += jac * ring * 2.0 * PI / ANGULAR_NODES as f64;
            }
            let phi_abs2 = phi_at(&sp, v, sites, z0 + Complex64::new(0.5, 0.5))?.norm_sqr();
            Ok(ProfileRow {
                site: *s,
                distance: (z0 - centre).norm(),
                phi_abs2,
                local_l2: mass,
            })
        })
        .collect::<Result<_>>()?;

    let top = rows.iter().fold(0.0f64, |a, r| a.max(r.local_l2));
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.distance >= 1.0 && r.local_l2 > 1e-22 * top)
        .map(|r| (r.distance, r.local_l2.ln()))
        .collect();
    let fitted_length = if pts.len() >= 3 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        (slope < 0.0).then(|| 2.0 / -slope)
    } else {
        None
    };
    Ok(EigenfunctionProfile {
        lambda,
        kappa,
        disk_radius: b,
        rows,
        fitted_length,
        length_ratio: fitted_length.map(|l| l / (2.0 / kappa)),
    })
}
