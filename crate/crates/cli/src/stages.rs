//! One function per subcommand; each writes `<stage>.csv` and `<stage>.json` plus extras.

use crate::config::{RunConfig, Stage};
use crate::manifest::OutputDir;
use anyhow::{Context, Result};
use landau_delta::degeneracy::{self, CanonicalProduct};
use landau_delta::disorder::{self, derive_seed, sample_field};
use landau_delta::lattice_operator::{self, EigenpairSet};
use landau_delta::localization::{self, bounds, Ensemble};
use landau_delta::specfun::{self, SpectralPoint};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;

pub fn run_stage(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    match cfg.command {
        Stage::Specfun => specfun_tables(cfg, out),
        Stage::Spectrum => spectrum(cfg, out),
        Stage::Bands => bands(cfg, out),
        Stage::Localization => localization(cfg, out),
        Stage::Degeneracy => degeneracy(cfg, out),
        Stage::Regularity => regularity(cfg, out),
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn specfun_tables(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let mut psi = String::from("lambda,psi_neg_lambda\n");
    let lambdas: Vec<f64> = (0..80).map(|i| -3.95 + 0.1 * i as f64).collect();
    for &l in &lambdas {
        let v = specfun::digamma(Complex64::new(l, 0.0))?;
        writeln!(psi, "{:?},{:?}", l, v.re)?;
    }
    out.write("digamma.csv", &psi)?;

    let mut kernel = String::from("lambda,distance,green0,truncation_error,envelope\n");
    let mut rows = 0usize;
    for &l in &[-2.5, -0.5, 0.5, 1.5, 2.5] {
        let sp = SpectralPoint::real(l, cfg.kappa)?;
        for i in 1..=12 {
            let d = 0.25 * i as f64;
            let g = specfun::green0_radial(&sp, d * d)?;
            writeln!(
                kernel,
                "{:?},{:?},{:?},{:?},{:?}",
                l,
                d,
                g.value.re,
                g.truncation_error,
                specfun::green0_envelope(&sp, d)
            )?;
            rows += 1;
        }
    }
    out.write("specfun.csv", &kernel)?;
    out.write(
        "specfun.json",
        &pretty(
            &json!({ "kappa": cfg.kappa, "digamma_points": lambdas.len(), "kernel_points": rows }),
        )?,
    )
}

#[derive(Serialize)]
struct FieldSpectrum {
    field: usize,
    seed: u64,
    sets: Vec<EigenpairSet>,
}

fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let window = cfg.window_spec();
    let sites = window.sites();
    let mut csv = String::from(
        "field,band,k,lambda,log_neg_lambda,residual,relative_residual,participation_ratio\n",
    );
    let mut all = Vec::new();
    let mut worst = 0.0f64;
    for f in 0..cfg.fields {
        let seed = derive_seed(cfg.seed, f as u64);
        let field = sample_field(seed, window.covering_radius(), cfg.law)?;
        let mut sets = Vec::new();
        for band in cfg.first_band..=cfg.last_band {
            let set = lattice_operator::band_eigenvalues(&field, &sites, cfg.kappa, band)
                .with_context(|| format!("field {f}, band {band}"))?;
            if set.pairs.len() != sites.len() {
                log::warn!(
                    "field {f}, band {band}: {} eigenvalues for {} sites",
                    set.pairs.len(),
                    sites.len()
                );
            }
            for p in &set.pairs {
                let log = p
                    .log_neg_lambda
                    .map(|s| format!("{s:?}"))
                    .unwrap_or_default();
                writeln!(
                    csv,
                    "{:?},{:?},{:?},{:?},{},{:?},{:?},{:?}",
                    f,
                    band,
                    p.k,
                    p.lambda,
                    log,
                    p.residual,
                    p.relative_residual(),
                    p.participation_ratio
                )?;
            }
            worst = worst.max(set.max_relative_residual());
            sets.push(set);
        }
        all.push(FieldSpectrum {
            field: f,
            seed,
            sets,
        });
    }
    if worst > cfg.tolerances.residual {
        log::warn!(
            "largest relative residual {worst:e} exceeds tolerance {:e}",
            cfg.tolerances.residual
        );
    }
    out.write("spectrum.csv", &csv)?;
    out.write("spectrum.json", &pretty(&all)?)
}

fn bands(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let range = cfg.first_band..=cfg.last_band;
    let raw = lattice_operator::band_edges(&cfg.law, range.clone())?;
    let wide = lattice_operator::gershgorin_band_edges(&cfg.law, cfg.kappa, range)?;
    let mut csv =
        String::from("band,lower,upper,lower_open,upper_open,inflated_lower,inflated_upper\n");
    for (r, w) in raw.iter().zip(&wide) {
        writeln!(
            csv,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.band, r.lower, r.upper, r.lower_open, r.upper_open, w.lower, w.upper
        )?;
    }
    out.write("bands.csv", &csv)?;
    out.write(
        "bands.json",
        &pretty(
            &json!({ "kappa": cfg.kappa, "law": cfg.law, "single_site": raw, "inflated": wide }),
        )?,
    )
}

fn localization(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let params = cfg.moments.params();
    let window = cfg.window_spec();
    let sites = window.sites();
    let ensemble = Ensemble {
        seed: cfg.seed,
        law: cfg.law,
    };
    let profiles = localization::moment_profile(&ensemble, &sites, cfg.kappa, cfg.lambda, &params)?;
    let mut csv = String::from("epsilon,distance,mean,stderr,n_samples\n");
    for p in &profiles {
        for i in 0..p.distances.len() {
            writeln!(
                csv,
                "{:?},{:?},{:?},{:?},{:?}",
                p.epsilon, p.distances[i], p.means[i], p.stderrs[i], p.n_samples[i]
            )?;
        }
    }
    let stable = profiles
        .windows(2)
        .all(|w| localization::epsilon_stable(&w[0], &w[1], 3.0));
    for p in &profiles {
        match p.fit {
            Some(f) => log::info!(
                "ε = {:e}: rate {:.4} (95% CI {:.4}..{:.4})",
                p.epsilon,
                f.rate,
                f.ci.0,
                f.ci.1
            ),
            None => log::warn!("ε = {:e}: no decay fit", p.epsilon),
        }
    }
    out.write("localization.csv", &csv)?;
    out.write(
        "localization.json",
        &pretty(&json!({ "window": window, "profiles": profiles, "epsilon_stable": stable }))?,
    )
}

fn degeneracy(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let d = &cfg.degeneracy;
    let product = CanonicalProduct::new(d.product_cutoff);
    let growth = degeneracy::growth_estimate(&product, &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    let mut csv = String::from(
        "level,power,lattice_points,max_lattice_value,peak,relative_lattice_max,disk_norm,converging,threshold\n",
    );
    let mut reports = Vec::new();
    let mut grams = Vec::new();
    for m in 0..=d.max_level {
        let family: Vec<_> = (0..=d.max_power)
            .map(|k| degeneracy::build_state(m, k, cfg.kappa, &product))
            .collect::<Result<_, _>>()?;
        for st in family.iter().take(d.verify_power as usize + 1) {
            let r =
                degeneracy::verify_state(st, &product, d.verify_radius, cfg.tolerances.quadrature)?;
            writeln!(
                csv,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                m,
                st.power,
                r.lattice_points,
                r.max_lattice_value,
                r.peak,
                r.relative_lattice_max(),
                r.disk_norms.last().copied().unwrap_or(0.0),
                r.converging,
                r.threshold
            )?;
            reports.push(r);
        }
        let gram = degeneracy::gram_report(&family, &product, d.verify_radius)?;
        if !gram.full_rank {
            log::warn!("level {m}: Gram rank {} of {}", gram.rank, family.len());
        }
        grams.push(json!({ "level": m, "report": gram }));
        let grid =
            degeneracy::state_grid_csv(&family[0], &product, d.grid_half_width, d.grid_step)?;
        out.write(&format!("degeneracy_m{m}_k0.csv"), &grid)?;
    }
    out.write("degeneracy.csv", &csv)?;
    out.write(
        "degeneracy.json",
        &pretty(
            &json!({ "kappa": cfg.kappa, "growth": growth, "states": reports, "gram": grams }),
        )?,
    )
}

fn regularity(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let r = &cfg.regularity;
    let probe = disorder::tau_regularity_probe(&cfg.law, r.nu, &r.deltas)?;
    let moment = disorder::inverse_moment(&cfg.law, r.moment_exponent)?;
    let sums: Vec<_> = r
        .gaussian_t
        .iter()
        .map(|&t| bounds::lattice_gaussian_sum(t))
        .collect::<Result<_, _>>()?;
    let decoupling =
        bounds::decoupling_probe(&cfg.law, cfg.moments.s, r.decoupling_samples, cfg.seed)?;
    let mut csv = String::from("delta,constant,argmax\n");
    for row in &probe.rows {
        writeln!(csv, "{:?},{:?},{:?}", row.delta, row.constant, row.argmax)?;
    }
    out.write("regularity.csv", &csv)?;
    let mut gcsv = String::from("t,value,tail_bound,k_bound\n");
    for g in &sums {
        writeln!(
            gcsv,
            "{:?},{:?},{:?},{:?}",
            g.t, g.value, g.tail_bound, g.k_bound
        )?;
    }
    out.write("gaussian_sums.csv", &gcsv)?;
    out.write(
        "regularity.json",
        &pretty(&json!({
            "probe": probe,
            "stable_within_2": probe.stable_within(2.0),
            "inverse_moment": moment,
            "gaussian_sums": sums,
            "decoupling": decoupling,
        }))?,
    )
}
