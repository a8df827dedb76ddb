//! Run configuration: a JSON document with command-line overrides.

use anyhow::{bail, Context, Result};
use landau_delta::disorder::DisorderLaw;
use landau_delta::lattice_operator::Window;
use landau_delta::localization::MomentParams;
use landau_delta::specfun::SpectralPoint;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Specfun,
    #[default]
    Spectrum,
    Bands,
    Localization,
    Degeneracy,
    Regularity,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Specfun => "specfun",
            Stage::Spectrum => "spectrum",
            Stage::Bands => "bands",
            Stage::Localization => "localization",
            Stage::Degeneracy => "degeneracy",
            Stage::Regularity => "regularity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowShape {
    #[default]
    Disk,
    Square,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentConfig {
    pub s: f64,
    /// Defaults to s/2.
    pub gamma: Option<f64>,
    pub energy: f64,
    pub epsilons: Vec<f64>,
    pub trials: usize,
}

impl Default for MomentConfig {
    fn default() -> Self {
        let p = MomentParams::default();
        MomentConfig {
            s: p.s,
            gamma: None,
            energy: p.energy,
            epsilons: p.epsilons,
            trials: p.trials,
        }
    }
}

impl MomentConfig {
    pub fn params(&self) -> MomentParams {
        MomentParams {
            s: self.s,
            gamma: self.gamma.unwrap_or(self.s / 2.0),
            energy: self.energy,
            epsilons: self.epsilons.clone(),
            trials: self.trials,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted relative residual ‖M v‖/‖M‖ of an eigenpair.
    pub residual: f64,
    /// Relative tolerance of the disk-norm quadrature.
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-8,
            quadrature: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegeneracyConfig {
    pub max_level: u32,
    /// Gram families use k = 0..=max_power.
    pub max_power: u32,
    /// States with k ≤ verify_power get the lattice and disk-norm checks.
    pub verify_power: u32,
    pub verify_radius: f64,
    pub product_cutoff: f64,
    pub grid_half_width: f64,
    pub grid_step: f64,
}

impl Default for DegeneracyConfig {
    fn default() -> Self {
        DegeneracyConfig {
            max_level: 2,
            max_power: 5,
            verify_power: 3,
            verify_radius: 4.0,
            product_cutoff: 32.0,
            grid_half_width: 3.0,
            grid_step: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityConfig {
    pub nu: f64,
    pub deltas: Vec<f64>,
    pub moment_exponent: f64,
    pub gaussian_t: Vec<f64>,
    pub decoupling_samples: usize,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        RegularityConfig {
            nu: 1.0,
            deltas: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            moment_exponent: 0.9,
            gaussian_t: vec![0.05, 0.1, 0.5, 1.0, 2.0, 5.0],
            decoupling_samples: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Stage,
    pub kappa: f64,
    pub first_band: u32,
    pub last_band: u32,
    pub law: DisorderLaw,
    /// Window radius; a square window has half width ⌊radius⌋.
    pub radius: f64,
    pub window: WindowShape,
    pub seed: u64,
    /// Number of independent fields for `spectrum`.
    pub fields: usize,
    /// Regularization point of the lattice matrix for `localization`.
    pub lambda: f64,
    pub moments: MomentConfig,
    pub out: PathBuf,
    pub tolerances: Tolerances,
    pub degeneracy: DegeneracyConfig,
    pub regularity: RegularityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Stage::default(),
            kappa: 4.0,
            first_band: 0,
            last_band: 3,
            law: DisorderLaw::default(),
            radius: 2.0,
            window: WindowShape::default(),
            seed: 1,
            fields: 1,
            lambda: 0.5,
            moments: MomentConfig::default(),
            out: PathBuf::from("out"),
            tolerances: Tolerances::default(),
            degeneracy: DegeneracyConfig::default(),
            regularity: RegularityConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn window_spec(&self) -> Window {
        match self.window {
            WindowShape::Disk => Window::Disk {
                radius: self.radius,
            },
            WindowShape::Square => Window::Square {
                half_width: self.radius.floor() as u32,
            },
        }
    }

    /// Checks every precondition the selected stage relies on.
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            bail!("--kappa must be a positive number (got {})", self.kappa);
        }
        if self.first_band > self.last_band {
            bail!(
                "first_band ({}) must not exceed last_band ({})",
                self.first_band,
                self.last_band
            );
        }
        self.law
            .validate()
            .context("invalid disorder law; set law.half_width > 0")?;
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            bail!(
                "--radius must be a finite non-negative number (got {})",
                self.radius
            );
        }
        match self.command {
            Stage::Spectrum if self.fields == 0 => bail!("fields must be at least 1"),
            Stage::Localization => {
                self.moments
                    .params()
                    .validate()
                    .context("invalid moment parameters (--s, --epsilon, --trials)")?;
                SpectralPoint::real(self.lambda, self.kappa)?
                    .check_off_level()
                    .context("lambda must not be a Landau level")?;
                if self.radius < 1.0 {
                    bail!("localization needs --radius ≥ 1 to have any distance to fit");
                }
            }
            Stage::Degeneracy => {
                let d = &self.degeneracy;
                if d.verify_power > d.max_power {
                    bail!("degeneracy.verify_power must not exceed degeneracy.max_power");
                }
                if !(d.verify_radius >= 1.0 && d.verify_radius <= d.product_cutoff / 2.0) {
                    bail!("degeneracy.verify_radius must lie in [1, product_cutoff/2]");
                }
                if !(d.grid_step > 0.0 && d.grid_half_width > 0.0) {
                    bail!("degeneracy grid step and half width must be positive");
                }
            }
            Stage::Regularity => {
                let r = &self.regularity;
                if r.deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
                    bail!("regularity.deltas must lie in (0, 1)");
                }
                if !(0.0..1.0).contains(&r.moment_exponent) {
                    bail!("regularity.moment_exponent must lie in [0, 1)");
                }
                if !(self.moments.s > 0.0 && self.moments.s < 1.0) {
                    bail!("--s must lie in (0, 1)");
                }
                if r.decoupling_samples == 0 {
                    bail!("regularity.decoupling_samples must be positive");
                }
            }
            _ => {}
        }
        Ok(())
    }
}
