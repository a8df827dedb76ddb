//! Fractional-moment analysis of finite-volume resolvents `(M^λ_Λ − z)⁻¹`.
//!
//! [`moment_profile`] estimates E|⟨n|(M^λ − z)⁻¹|0⟩|^s over independent
//! disorder fields as a function of |n|, and [`decay_fit`] extracts an
//! exponential rate. [`bounds`] holds the deterministic ingredients: the
//! decoupling ratio, the contraction quantity F(s, λ) and lattice Gaussian sums.

pub mod bounds;

pub use bounds::{
    contraction_f, decoupling_probe, decoupling_ratio, gaussian_sum_bound, lattice_gaussian_sum,
    DecouplingReport, GaussianSum,
};

use crate::disorder::{derive_seed, sample_field, DisorderLaw, LatticeSite};
use crate::error::{Error, Result};
use crate::lattice_operator::{inverse_strengths, solve_resolvent_column, OperatorTemplate};
use crate::specfun::SpectralPoint;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentParams {
    pub s: f64,
    pub gamma: f64,
    pub energy: f64,
    /// Decreasing imaginary parts ε of z = E + iε.
    pub epsilons: Vec<f64>,
    pub trials: usize,
}

impl MomentParams {
    /// Parameters with γ = s/2.
    pub fn new(s: f64, energy: f64, epsilons: Vec<f64>, trials: usize) -> Result<Self> {
        let p = MomentParams {
            s,
            gamma: s / 2.0,
            energy,
            epsilons,
            trials,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.5 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "s must lie in (1/2, 1), got {}",
                self.s
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < self.s) {
            return Err(Error::InvalidParameter(format!(
                "γ must lie in (0, s), got {}",
                self.gamma
            )));
        }
        if !(self.energy > -1.0 && self.energy < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "E must lie in (−1, 1), got {}",
                self.energy
            )));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidParameter("ε values must be positive".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(
                "ε sequence must be strictly decreasing".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be positive".into()));
        }
        Ok(())
    }
}

impl Default for MomentParams {
    fn default() -> Self {
        MomentParams {
            s: 0.7,
            gamma: 0.35,
            energy: 0.0,
            epsilons: vec![1e-3, 5e-4],
            trials: 200,
        }
    }
}

/// The random-field ensemble: a parent seed and the single-site law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub seed: u64,
    pub law: DisorderLaw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub ci: (f64, f64),
    pub points_used: usize,
    pub reduced_chi2: f64,
    pub non_decaying: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    pub kappa: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub params: MomentParams,
    pub distances: Vec<f64>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub n_samples: Vec<usize>,
    /// Trials dropped because the linear solve was ill-conditioned.
    pub excluded: usize,
    pub fit: Option<DecayFit>,
    /// The fitted range reaches the largest distance in the window.
    pub fit_touches_boundary: bool,
}

impl MomentProfile {
    pub fn fitted_rate(&self) -> Option<f64> {
        self.fit.map(|f| f.rate)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance,mean,stderr,n_samples\n");
        for i in 0..self.distances.len() {
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?}",
                self.distances[i], self.means[i], self.stderrs[i], self.n_samples[i]
            );
        }
        out
    }

    /// Rate, interval, parameters and seed.
    pub fn summary_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "kappa": self.kappa,
            "lambda": self.lambda,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "params": self.params,
            "excluded": self.excluded,
            "fit": self.fit,
            "fit_touches_boundary": self.fit_touches_boundary,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Whether two profiles agree at every distance within `factor` combined standard errors.
pub fn epsilon_stable(a: &MomentProfile, b: &MomentProfile, factor: f64) -> bool {
    a.distances.len() == b.distances.len()
        && (0..a.means.len()).all(|i| {
            let tol = factor * (a.stderrs[i].powi(2) + b.stderrs[i].powi(2)).sqrt();
            (a.means[i] - b.means[i]).abs() <= tol
        })
}

/// Weighted least squares of ln(mean) against distance over points with stderr/mean < 0.5.
///
/// Weights are (mean/stderr)²; the slope error is scaled by the reduced χ² and the
/// interval uses the Student t quantile. Without standard errors all weights are 1.
pub fn decay_fit(distances: &[f64], means: &[f64], stderrs: &[f64]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64, f64)> = (0..distances.len())
        .filter(|&i| means[i] > 0.0 && stderrs[i] / means[i] < 0.5)
        .map(|i| {
            let rel = stderrs[i] / means[i];
            (distances[i], means[i].ln(), rel)
        })
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs ≥ 4 usable distances, got {}",
            pts.len()
        )));
    }
    let weighted = pts.iter().all(|p| p.2 > 0.0);
    let w: Vec<f64> = pts
        .iter()
        .map(|p| if weighted { 1.0 / (p.2 * p.2) } else { 1.0 })
        .collect();
    let sw: f64 = w.iter().sum();
    let mx = pts.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let my = pts.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.0 - mx).powi(2))
        .sum();
    let sxy: f64 = pts
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.0 - mx) * (p.1 - my))
        .sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData(
            "all usable points share one distance".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (pts.len() - 2) as f64;
    let chi2: f64 = pts
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let reduced_chi2 = chi2 / dof;
    let se = if weighted {
        (reduced_chi2.max(1.0) / sxx).sqrt()
    } else {
        (reduced_chi2 / sxx).sqrt()
    };
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .inverse_cdf(0.975);
    let rate = -slope;
    let ci = (rate - t * se, rate + t * se);
    Ok(DecayFit {
        rate,
        ci,
        points_used: pts.len(),
        reduced_chi2,
        non_decaying: !(ci.0 > 0.0),
    })
}

/// Condition estimates above this exclude a trial.
pub const MAX_CONDITION: f64 = 1e12;

#[allow(clippy::too_many_arguments)]
fn trial_moments(
    template: &OperatorTemplate,
    sites: &[LatticeSite],
    origin: usize,
    ensemble: &Ensemble,
    radius: f64,
    index: u64,
    zs: &[Complex64],
    s: f64,
) -> Result<Vec<Option<Vec<f64>>>> {
    let field = sample_field(derive_seed(ensemble.seed, index), radius, ensemble.law)?;
    let m = template.assemble(&inverse_strengths(&field, sites)?);
    Ok(zs
        .iter()
        .map(|&z| match solve_resolvent_column(&m, z, origin) {
            Ok((col, cond)) if cond <= MAX_CONDITION => {
                Some(col.iter().map(|x| x.norm().powf(s)).collect())
            }
            _ => None,
        })
        .collect())
}

/// One profile per ε of E|⟨n|(M^λ_Λ − E − iε)⁻¹|0⟩|^s, grouped by |n|.
pub fn moment_profile(
    ensemble: &Ensemble,
    sites: &[LatticeSite],
    kappa: f64,
    lambda: f64,
    params: &MomentParams,
) -> Result<Vec<MomentProfile>> {
    params.validate()?;
    ensemble.law.validate()?;
    let origin = sites
        .iter()
        .position(|s| *s == LatticeSite::ORIGIN)
        .ok_or(Error::MissingSite(LatticeSite::ORIGIN))?;
    let point = SpectralPoint::real(lambda, kappa)?;
    let template = OperatorTemplate::new(point, sites)?;
    let radius = sites.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let zs: Vec<Complex64> = params
        .epsilons
        .iter()
        .map(|&e| Complex64::new(params.energy, e))
        .collect();

    let per_trial: Vec<Vec<Option<Vec<f64>>>> = (0..params.trials as u64)
        .into_par_iter()
        .map(|t| trial_moments(&template, sites, origin, ensemble, radius, t, &zs, params.s))
        .collect::<Result<_>>()?;

    // Distance classes by exact |n|².
    let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, s) in sites.iter().enumerate() {
        classes.entry(s.norm_sqr()).or_default().push(i);
    }
    let max_d2 = *classes.keys().last().unwrap_or(&0);

    let mut out = Vec::with_capacity(zs.len());
    for (ei, &eps) in params.epsilons.iter().enumerate() {
        let usable: Vec<&Vec<f64>> = per_trial.iter().filter_map(|t| t[ei].as_ref()).collect();
        let excluded = params.trials - usable.len();
        if excluded > 0 {
            log::warn!("ε = {eps}: {excluded} ill-conditioned trials excluded");
        }
        let n = usable.len();
        let mut distances = Vec::new();
        let mut means = Vec::new();
        let mut stderrs = Vec::new();
        let mut n_samples = Vec::new();
        for (&d2, idx) in &classes {
            // Per-trial average over the class, then mean and standard error across trials.
            let vals: Vec<f64> = usable
                .iter()
                .map(|v| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64)
                .collect();
            let mean = vals.iter().sum::<f64>() / n.max(1) as f64;
            let var = if n > 1 {
                vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            distances.push((d2 as f64).sqrt());
            means.push(mean);
            stderrs.push((var / n.max(1) as f64).sqrt());
            n_samples.push(n);
        }
        let far: Vec<usize> = (0..distances.len())
            .filter(|&i| distances[i] >= 1.0)
            .collect();
        let pick = |v: &Vec<f64>| far.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let fit = decay_fit(&pick(&distances), &pick(&means), &pick(&stderrs)).ok();
        let fit_touches_boundary = fit.is_some() && {
            let last = distances.len() - 1;
            stderrs[last] / means[last] < 0.5
                && (distances[last] * distances[last]).round() as i64 == max_d2
        };
        out.push(MomentProfile {
            kappa,
            lambda,
            epsilon: eps,
            seed: ensemble.seed,
            params: params.clone(),
            distances,
            means,
            stderrs,
            n_samples,
            excluded,
            fit,
            fit_touches_boundary,
        });
    }
    Ok(out)
}

/// Smallest κ in an ascending scan whose fitted rate reaches γκ.
pub fn first_kappa_meeting_target(scan: &[(f64, f64)], gamma: f64) -> Option<f64> {
    scan.iter().find(|(k, r)| *r >= gamma * k).map(|(k, _)| *k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_exponential_fit() {
        let d: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let m: Vec<f64> = d.iter().map(|x| (-0.7 * x).exp()).collect();
        let fit = decay_fit(&d, &m, &[0.0; 8]).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-12);
        assert!((fit.ci.0 - 0.7).abs() < 1e-12 && (fit.ci.1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn constant_profile_is_flagged() {
        let d: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let m = vec![0.3; 6];
        let se: Vec<f64> = (0..6).map(|i| 0.01 * (1.0 + 0.1 * i as f64)).collect();
        let fit = decay_fit(&d, &m, &se).unwrap();
        assert!(fit.rate.abs() < 1e-12);
        assert!(fit.non_decaying);
    }

    #[test]
    fn noisy_fit_interval_is_calibrated() {
        use rand_chacha::rand_core::RngCore;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut gauss = || {
            // Box–Muller from two uniforms.
            let u1 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let d: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let mut hits = 0;
        for _ in 0..100 {
            let rel = 0.1;
            let m: Vec<f64> = d
                .iter()
                .map(|x| (-0.7 * x).exp() * (1.0 + rel * gauss()))
                .collect();
            let se: Vec<f64> = d.iter().map(|x| rel * (-0.7 * x).exp()).collect();
            let fit = decay_fit(&d, &m, &se).unwrap();
            if fit.ci.0 <= 0.7 && 0.7 <= fit.ci.1 {
                hits += 1;
            }
        }
        assert!(hits >= 90, "coverage {hits}/100");
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            decay_fit(&[1.0, 2.0, 3.0], &[1.0, 0.5, 0.2], &[0.0; 3]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn single_site_moment_is_finite() {
        let ens = Ensemble {
            seed: 9,
            law: DisorderLaw::default(),
        };
        let params = MomentParams::new(0.7, 0.0, vec![1e-3], 400).unwrap();
        let p = &moment_profile(&ens, &[LatticeSite::ORIGIN], 4.0, 0.5, &params).unwrap()[0];
        assert_eq!(p.distances, vec![0.0]);
        assert!(p.means[0].is_finite() && p.means[0] > 0.0);
        assert!(p.stderrs[0] < p.means[0]);
    }

    #[test]
    fn params_validation() {
        assert!(MomentParams::new(0.4, 0.0, vec![1e-3], 10).is_err());
        assert!(MomentParams::new(0.7, 0.0, vec![1e-3, 2e-3], 10).is_err());
        assert_eq!(
            MomentParams::new(0.8, 0.0, vec![1e-3], 10).unwrap().gamma,
            0.4
        );
    }
}
