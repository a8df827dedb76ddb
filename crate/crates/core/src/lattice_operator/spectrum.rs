//! Finite-volume spectrum in one band by tracking the eigenvalue branches of `M^λ`.
//!
//! Each sorted eigenvalue μ_k(λ) of the Hermitian matrix `M^λ_Λ` is strictly
//! decreasing in λ inside a band, so it vanishes at most once there. The band
//! is parametrised by t ∈ ℝ (a logistic map for I_N with N ≥ 1, λ = −e^t for
//! I₀), sign changes are located on a t-grid and each root is polished by Brent.
//!
//! In I₀ the far end of the scan is the point beyond which every off-diagonal
//! entry underflows to zero; roots further out are single-site and are solved
//! in the variable ln(−λ).

use super::{inverse_strengths, OperatorTemplate};
use crate::disorder::{DisorderField, LatticeSite};
use crate::error::{Error, Result};
use crate::lattice_operator::levels::deep_root_log;
use crate::numerics::roots::brent;
use crate::specfun::{gamma, SpectralPoint};
use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub initial_points: usize,
    pub max_points: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            initial_points: 64,
            max_points: 4096,
        }
    }
}

/// One eigenvalue λ_k of H_Λ in the band with its kernel vector of `M^{λ_k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub k: usize,
    pub lambda: f64,
    /// ln(−λ) for roots in I₀; kept because deep roots overflow f64.
    pub log_neg_lambda: Option<f64>,
    pub vector: Vec<Complex64>,
    /// ‖M^{λ_k} v_k‖
    pub residual: f64,
    /// Size of the terms that cancel at the root: the largest of ‖M^{λ_k}‖₂,
    /// (2κ/π)|ψ(−λ_k)| and 4κ max|u_n|.
    pub scale: f64,
    pub participation_ratio: f64,
}

impl EigenPair {
    pub fn relative_residual(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual / self.scale
        } else {
            self.residual
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenpairSet {
    pub band: u32,
    pub kappa: f64,
    pub sites: Vec<LatticeSite>,
    pub pairs: Vec<EigenPair>,
    /// Number of t-grid points after refinement.
    pub grid_points: usize,
    /// Grid cells in which two or more branches still cross zero after refinement.
    pub ambiguous_cells: usize,
}

impl EigenpairSet {
    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn max_relative_residual(&self) -> f64 {
        self.pairs
            .iter()
            .map(EigenPair::relative_residual)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("band,k,lambda,residual,participation_ratio\n");
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?}",
                self.band, p.k, p.lambda, p.residual, p.participation_ratio
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn participation_ratio(v: &[Complex64]) -> f64 {
    let n2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    let n4: f64 = v.iter().map(|x| x.norm_sqr().powi(2)).sum();
    if n4 > 0.0 {
        n2 * n2 / n4
    } else {
        0.0
    }
}

/// Fixes the global phase so the largest component is real and positive.
fn canonical_phase(v: &mut [Complex64]) {
    let big = v.iter().copied().fold(Complex64::new(0.0, 0.0), |a, x| {
        if x.norm() > a.norm() {
            x
        } else {
            a
        }
    });
    if big.norm() > 0.0 {
        let ph = big.conj() / big.norm();
        for x in v.iter_mut() {
            *x *= ph;
        }
    }
}

struct BandScan<'a> {
    band: u32,
    kappa: f64,
    sites: &'a [LatticeSite],
    u: Vec<f64>,
}

impl BandScan<'_> {
    /// 4κ max|u_n|
    fn strength_scale(&self) -> f64 {
        4.0 * self.kappa * self.u.iter().fold(0.0f64, |a, u| a.max(u.abs()))
    }

    fn lambda(&self, t: f64) -> f64 {
        if self.band == 0 {
            return -t.exp();
        }
        let n = self.band as f64;
        if t < 0.0 {
            let e = t.exp();
            (n - 1.0) + e / (1.0 + e)
        } else {
            let e = (-t).exp();
            n - e / (1.0 + e)
        }
    }

    fn inside(&self, t: f64) -> bool {
        let l = self.lambda(t);
        if self.band == 0 {
            l < 0.0 && l.is_finite()
        } else {
            l > (self.band - 1) as f64 && l < self.band as f64
        }
    }

    fn template(&self, t: f64) -> Result<OperatorTemplate> {
        OperatorTemplate::new(SpectralPoint::real(self.lambda(t), self.kappa)?, self.sites)
    }

    /// Branch values s_k(t), each decreasing in t; s = μ for N ≥ 1 and −μ in I₀.
    fn values(&self, t: f64) -> Result<Vec<f64>> {
        let m = self.template(t)?.assemble(&self.u);
        let mut ev = super::sorted_eigenvalues(&m);
        if self.band == 0 {
            for x in ev.iter_mut() {
                *x = -*x;
            }
        }
        Ok(ev)
    }

    fn positive(&self, t: f64) -> Result<usize> {
        Ok(self.values(t)?.iter().filter(|&&x| x > 0.0).count())
    }
}

/// Eigenvalues of H_Λ in band N with default scan options.
pub fn band_eigenvalues(
    field: &DisorderField,
    sites: &[LatticeSite],
    kappa: f64,
    band: u32,
) -> Result<EigenpairSet> {
    band_eigenvalues_with(field, sites, kappa, band, ScanOptions::default())
}

pub fn band_eigenvalues_with(
    field: &DisorderField,
    sites: &[LatticeSite],
    kappa: f64,
    band: u32,
    opts: ScanOptions,
) -> Result<EigenpairSet> {
    if sites.is_empty() {
        return Err(Error::InvalidParameter("empty window".into()));
    }
    SpectralPoint::real(-1.0, kappa)?;
    let scan = BandScan {
        band,
        kappa,
        sites,
        u: inverse_strengths(field, sites)?,
    };
    let l = sites.len();

    // Lower end: every branch positive.
    let mut t_lo = -4.0;
    while scan.positive(t_lo)? < l {
        let next = t_lo - 4.0;
        if !scan.inside(next) || next < -700.0 {
            break;
        }
        t_lo = next;
    }

    // Upper end: every branch negative, or (I₀) the decoupling point.
    let mut deep_sites = Vec::new();
    let t_hi = if band == 0 {
        let mut t = (80_000.0 / kappa).ln().max(t_lo + 1.0);
        let mut tries = 0;
        loop {
            let tpl = scan.template(t)?;
            if tpl.off.iter().all(|x| *x == Complex64::new(0.0, 0.0)) || tries >= 10 {
                if tries >= 10 {
                    log::warn!("band 0: couplings did not underflow by t = {t}; treating deep roots as single-site");
                }
                for (i, &u) in scan.u.iter().enumerate() {
                    if (tpl.diag_shift.re - 4.0 * kappa * u) < 0.0 {
                        deep_sites.push(i);
                    }
                }
                break t;
            }
            t += 1.0;
            tries += 1;
        }
    } else {
        let mut t = 4.0;
        while scan.positive(t)? > 0 {
            let next = t + 4.0;
            if !scan.inside(next) || next > 700.0 {
                break;
            }
            t = next;
        }
        t
    };

    // Grid of branch values, refined where several branches cross in one cell.
    let n0 = opts.initial_points.max(2);
    let ts: Vec<f64> = (0..n0)
        .map(|i| t_lo + (t_hi - t_lo) * i as f64 / (n0 - 1) as f64)
        .collect();
    let vals: Vec<Vec<f64>> = ts
        .par_iter()
        .map(|&t| scan.values(t))
        .collect::<Result<_>>()?;
    let mut grid: Vec<(f64, Vec<f64>)> = ts.into_iter().zip(vals).collect();
    let crossings = |a: &[f64], b: &[f64]| -> usize {
        let pa = a.iter().filter(|&&x| x > 0.0).count();
        let pb = b.iter().filter(|&&x| x > 0.0).count();
        pa.saturating_sub(pb)
    };
    loop {
        let mids: Vec<f64> = grid
            .windows(2)
            .filter(|w| {
                crossings(&w[0].1, &w[1].1) > 1 && (w[1].0 - w[0].0) > 1e-10 * (1.0 + w[0].0.abs())
            })
            .map(|w| 0.5 * (w[0].0 + w[1].0))
            .collect();
        if mids.is_empty() || grid.len() >= opts.max_points {
            break;
        }
        let room = opts.max_points - grid.len();
        let mids = &mids[..mids.len().min(room)];
        let vals: Vec<Vec<f64>> = mids
            .par_iter()
            .map(|&t| scan.values(t))
            .collect::<Result<_>>()?;
        grid.extend(mids.iter().copied().zip(vals));
        grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let ambiguous_cells = grid
        .windows(2)
        .filter(|w| crossings(&w[0].1, &w[1].1) > 1)
        .count();
    if ambiguous_cells > 0 {
        log::warn!("band {band}: {ambiguous_cells} grid cells contain several zero crossings (near-degenerate roots)");
    }

    // Each branch k that starts positive and ends non-positive has one root.
    let first = &grid[0].1;
    let last = &grid[grid.len() - 1].1;
    let shallow: Vec<usize> = (0..l)
        .filter(|&k| first[k] > 0.0 && last[k] <= 0.0)
        .collect();
    let found = shallow.len() + deep_sites.len();
    if found != l || (band == 0 && last.iter().filter(|&&x| x > 0.0).count() != deep_sites.len()) {
        return Err(Error::CountMismatch {
            band,
            expected: l,
            found,
        });
    }
    let cells: Vec<(usize, f64, f64)> = shallow
        .iter()
        .map(|&k| {
            let i = grid
                .windows(2)
                .position(|w| w[0].1[k] > 0.0 && w[1].1[k] <= 0.0)
                .unwrap_or(0);
            (k, grid[i].0, grid[i + 1].0)
        })
        .collect();

    let mut pairs: Vec<EigenPair> = cells
        .par_iter()
        .map(|&(k, a, b)| -> Result<EigenPair> {
            let tol = 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs()));
            let t = brent(
                |t| scan.values(t).map(|v| v[k]).unwrap_or(f64::NAN),
                a,
                b,
                tol,
                200,
            )
            .ok_or_else(|| {
                Error::Domain(format!("band {band}: root polishing failed on branch {k}"))
            })?;
            shallow_pair(&scan, k, t)
        })
        .collect::<Result<_>>()?;

    for &i in &deep_sites {
        let omega = 1.0 / scan.u[i];
        let s = deep_root_log(2.0 * PI / omega);
        let mut vector = vec![Complex64::new(0.0, 0.0); l];
        vector[i] = Complex64::new(1.0, 0.0);
        let c = (2.0 * kappa / PI) * (gamma::psi_of_exp(s) - 2.0 * PI / omega);
        let scale = ((2.0 * kappa / PI) * gamma::psi_of_exp(s).abs()).max(scan.strength_scale());
        pairs.push(EigenPair {
            k: 0,
            lambda: -s.exp(),
            log_neg_lambda: Some(s),
            vector,
            residual: c.abs(),
            scale,
            participation_ratio: 1.0,
        });
    }

    pairs.sort_by(|a, b| {
        let key = |p: &EigenPair| {
            if band == 0 {
                -p.log_neg_lambda.unwrap_or(f64::NEG_INFINITY)
            } else {
                p.lambda
            }
        };
        key(a).total_cmp(&key(b))
    });
    for (k, p) in pairs.iter_mut().enumerate() {
        p.k = k;
    }
    Ok(EigenpairSet {
        band,
        kappa,
        sites: sites.to_vec(),
        pairs,
        grid_points: grid.len(),
        ambiguous_cells,
    })
}

fn shallow_pair(scan: &BandScan<'_>, k: usize, t: f64) -> Result<EigenPair> {
    let lambda = scan.lambda(t);
    let tpl = scan.template(t)?;
    let m = tpl.assemble(&scan.u);
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    // Branch index k refers to ascending μ; in I₀ the branch values were negated.
    let col = order[k];
    let mut v: Vec<Complex64> = eig.eigenvectors.column(col).iter().copied().collect();
    canonical_phase(&mut v);
    let dv = DVector::from_vec(v.clone());
    let residual = (&m * &dv).norm();
    let scale = eig
        .eigenvalues
        .iter()
        .fold(tpl.diag_shift.norm().max(scan.strength_scale()), |a, x| {
            a.max(x.abs())
        });
    Ok(EigenPair {
        k,
        lambda,
        log_neg_lambda: (scan.band == 0).then(|| (-lambda).ln()),
        participation_ratio: participation_ratio(&v),
        vector: v,
        residual,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_field, DisorderLaw};
    use crate::lattice_operator::{build_m, single_impurity_levels, Window};

    #[test]
    fn single_site_agrees_with_impurity_levels() {
        for &omega in &[0.5, -0.3, 2.0] {
            let f =
                DisorderField::constant(0.0, DisorderLaw::uniform(2.5).unwrap(), omega).unwrap();
            let levels = single_impurity_levels(omega, 0..=3);
            for band in 0..=3 {
                let set = band_eigenvalues(&f, &[LatticeSite::ORIGIN], 1.0, band).unwrap();
                assert_eq!(set.pairs.len(), 1);
                let lv = levels.iter().find(|l| l.band == band).unwrap();
                let p = &set.pairs[0];
                if band == 0 {
                    let a = p.log_neg_lambda.unwrap();
                    assert!(
                        (a - lv.log_neg_lambda.unwrap()).abs() < 1e-9 * a.abs().max(1.0),
                        "ω={omega}"
                    );
                } else {
                    assert!((p.lambda - lv.lambda).abs() < 1e-9, "ω={omega} N={band}");
                }
            }
        }
    }

    #[test]
    fn window_counts_and_residuals() {
        let f = sample_field(5, 2.0, DisorderLaw::default()).unwrap();
        let sites = Window::square(3).unwrap().sites();
        for band in 0..=3 {
            let set = band_eigenvalues(&f, &sites, 1.0, band).unwrap();
            assert_eq!(set.pairs.len(), 9);
            for p in &set.pairs {
                assert!(
                    p.relative_residual() <= 1e-8,
                    "band {band}: {}",
                    p.relative_residual()
                );
                if band > 0 {
                    assert!(p.lambda > (band - 1) as f64 && p.lambda < band as f64);
                } else {
                    assert!(p.lambda < 0.0);
                }
                if band > 0 || p.lambda.is_finite() && p.lambda > -1e4 {
                    let op =
                        build_m(SpectralPoint::real(p.lambda, 1.0).unwrap(), &f, &sites).unwrap();
                    let dv = DVector::from_vec(p.vector.clone());
                    assert!((&op.entries * dv).norm() <= 1e-8 * p.scale);
                }
            }
        }
    }
}
