//! Sensitivity of the finite-volume eigenvalues to a single inverse strength u_n = 1/ω_n.

use super::{eigenfunction_norm_sqr, spectrum::band_eigenvalues, EigenpairSet};
use crate::disorder::{DisorderField, LatticeSite};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchDerivative {
    pub k: usize,
    pub lambda: f64,
    /// Central difference dλ_k/du_n.
    pub derivative: f64,
    /// |⟨v_k|n⟩|²
    pub loading: f64,
    /// |⟨v_k|n⟩|² / ‖φ_k‖²
    pub weight: f64,
    /// Part of a near-degenerate group (excluded from the fit).
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub band: u32,
    pub site: LatticeSite,
    pub step: f64,
    pub branches: Vec<BranchDerivative>,
    /// C in dλ_k/du_n ≈ −C·weight_k, least squares over non-degenerate branches.
    pub fitted_constant: f64,
    pub fit_relative_residual: f64,
    pub all_nonincreasing: bool,
    pub strictly_negative_where_loaded: bool,
    pub degenerate_groups: usize,
}

fn perturbed(field: &DisorderField, site: LatticeSite, u: f64) -> Result<DisorderField> {
    if u == 0.0 {
        return Err(Error::InvalidParameter(
            "inverse strength crossed zero".into(),
        ));
    }
    field.with_value(site, 1.0 / u)
}

/// Central-difference derivatives of every branch in band N with respect to u_n.
pub fn hellmann_feynman_probe(
    field: &DisorderField,
    sites: &[LatticeSite],
    kappa: f64,
    band: u32,
    site: LatticeSite,
    step: f64,
) -> Result<ProbeReport> {
    let idx = sites
        .iter()
        .position(|s| *s == site)
        .ok_or(Error::MissingSite(site))?;
    let u0 = 1.0 / field.omega(&site)?;
    let base = band_eigenvalues(field, sites, kappa, band)?;
    let plus = band_eigenvalues(&perturbed(field, site, u0 + step)?, sites, kappa, band)?;
    let minus = band_eigenvalues(&perturbed(field, site, u0 - step)?, sites, kappa, band)?;

    let l = base.pairs.len();
    let mut degenerate = vec![false; l];
    let mut groups = 0;
    let mut k = 0;
    while k < l {
        let mut j = k + 1;
        while j < l
            && (base.pairs[j].lambda - base.pairs[j - 1].lambda).abs()
                < 1e-9 * (1.0 + base.pairs[j].lambda.abs())
        {
            j += 1;
        }
        if j - k > 1 {
            groups += 1;
            degenerate[k..j].iter_mut().for_each(|d| *d = true);
            log::warn!("band {band}: branches {k}..{j} are degenerate; kernel basis rotated onto site {site}");
        }
        k = j;
    }

    let mut branches = Vec::with_capacity(l);
    for (k, p) in base.pairs.iter().enumerate() {
        let mut loading = p.vector[idx].norm_sqr();
        let mut vector = p.vector.clone();
        if degenerate[k] {
            // Rotate the group so a single vector carries the whole n-component.
            let group: Vec<&Vec<Complex64>> = (0..l)
                .filter(|&j| {
                    degenerate[j]
                        && (base.pairs[j].lambda - p.lambda).abs() < 1e-9 * (1.0 + p.lambda.abs())
                })
                .map(|j| &base.pairs[j].vector)
                .collect();
            let a: Vec<Complex64> = group.iter().map(|v| v[idx]).collect();
            let na = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let first = (0..l).find(|&j| {
                degenerate[j]
                    && (base.pairs[j].lambda - p.lambda).abs() < 1e-9 * (1.0 + p.lambda.abs())
            });
            if first == Some(k) && na > 0.0 {
                vector = (0..sites.len())
                    .map(|i| {
                        group
                            .iter()
                            .zip(&a)
                            .map(|(v, c)| v[i] * c.conj())
                            .sum::<Complex64>()
                            / na
                    })
                    .collect();
                loading = na * na;
            } else {
                loading = 0.0;
            }
        }
        let weight = if loading > 0.0 && p.lambda.is_finite() {
            loading / eigenfunction_norm_sqr(p.lambda, &vector, sites, kappa)?
        } else {
            0.0
        };
        let derivative = (plus.pairs[k].lambda - minus.pairs[k].lambda) / (2.0 * step);
        branches.push(BranchDerivative {
            k,
            lambda: p.lambda,
            derivative,
            loading,
            weight,
            degenerate: degenerate[k],
        });
    }

    let fit: Vec<&BranchDerivative> = branches
        .iter()
        .filter(|b| !b.degenerate && b.derivative.is_finite())
        .collect();
    let sqq: f64 = fit.iter().map(|b| b.weight * b.weight).sum();
    let sdq: f64 = fit.iter().map(|b| -b.derivative * b.weight).sum();
    let c = if sqq > 0.0 { sdq / sqq } else { 0.0 };
    let res: f64 = fit
        .iter()
        .map(|b| (b.derivative + c * b.weight).powi(2))
        .sum::<f64>()
        .sqrt();
    let dn: f64 = fit.iter().map(|b| b.derivative.powi(2)).sum::<f64>().sqrt();

    let noise = |b: &BranchDerivative| 1e-8 * (1.0 + b.lambda.abs());
    let all_nonincreasing = branches
        .iter()
        .filter(|b| b.derivative.is_finite())
        .all(|b| b.derivative <= noise(b));
    let strictly_negative_where_loaded = branches
        .iter()
        .filter(|b| b.loading > 1e-6 && b.derivative.is_finite())
        .all(|b| b.derivative < 0.0);

    Ok(ProbeReport {
        band,
        site,
        step,
        branches,
        fitted_constant: c,
        fit_relative_residual: if dn > 0.0 { res / dn } else { 0.0 },
        all_nonincreasing,
        strictly_negative_where_loaded,
        degenerate_groups: groups,
    })
}

/// Band spectra as u_n runs over `u_values`.
pub fn u_sweep(
    field: &DisorderField,
    sites: &[LatticeSite],
    kappa: f64,
    band: u32,
    site: LatticeSite,
    u_values: &[f64],
) -> Result<Vec<EigenpairSet>> {
    u_values
        .iter()
        .map(|&u| band_eigenvalues(&perturbed(field, site, u)?, sites, kappa, band))
        .collect()
}
