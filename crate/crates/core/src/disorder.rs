//! Impurity strengths ω_n on the Gaussian integers.
//!
//! Fields are generated site by site from a counter-based stream keyed by the
//! seed, so a value depends only on (seed, site, law). Enlarging the radius
//! extends a field without touching existing sites.

use crate::error::{Error, Result};
use crate::numerics::quad::{integrate_real, QuadOptions};
use libm::erf;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

/// A Gaussian integer n₁ + i n₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeSite {
    pub n1: i32,
    pub n2: i32,
}

impl LatticeSite {
    pub const ORIGIN: LatticeSite = LatticeSite { n1: 0, n2: 0 };

    pub const fn new(n1: i32, n2: i32) -> Self {
        LatticeSite { n1, n2 }
    }

    pub fn norm_sqr(&self) -> i64 {
        let (a, b) = (self.n1 as i64, self.n2 as i64);
        a * a + b * b
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sqr() as f64).sqrt()
    }

    pub fn point(&self) -> Complex64 {
        Complex64::new(self.n1 as f64, self.n2 as f64)
    }

    pub fn sub(&self, other: &LatticeSite) -> LatticeSite {
        LatticeSite::new(self.n1 - other.n1, self.n2 - other.n2)
    }

    /// n ∧ n′ as an exact integer.
    pub fn wedge(&self, other: &LatticeSite) -> i64 {
        self.n1 as i64 * other.n2 as i64 - self.n2 as i64 * other.n1 as i64
    }
}

impl std::fmt::Display for LatticeSite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.n1, self.n2)
    }
}

/// All sites with |n| ≤ R, ordered by row (n₂) then column (n₁).
pub fn sites_in_disk(radius: f64) -> Vec<LatticeSite> {
    let r = radius.max(0.0);
    let r2 = r * r;
    let m = r.floor() as i32;
    let mut out = Vec::new();
    for n2 in -m..=m {
        for n1 in -m..=m {
            let s = LatticeSite::new(n1, n2);
            if s.norm_sqr() as f64 <= r2 + 1e-9 {
                out.push(s);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawFamily {
    #[default]
    Uniform,
    /// Gaussian of width `sigma` restricted to [−a, a].
    TruncatedGaussian { sigma: f64 },
}

/// Single-site law ρ₀ of the impurity strengths, supported on [−a, a].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderLaw {
    #[serde(default)]
    pub family: LawFamily,
    pub half_width: f64,
}

impl Default for DisorderLaw {
    fn default() -> Self {
        DisorderLaw {
            family: LawFamily::Uniform,
            half_width: 1.0,
        }
    }
}

impl DisorderLaw {
    pub fn uniform(half_width: f64) -> Result<Self> {
        let law = DisorderLaw {
            family: LawFamily::Uniform,
            half_width,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "half width must be positive, got {}",
                self.half_width
            )));
        }
        if let LawFamily::TruncatedGaussian { sigma } = self.family {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "sigma must be positive, got {sigma}"
                )));
            }
        }
        Ok(())
    }

    fn gauss_norm(&self, sigma: f64) -> f64 {
        erf(self.half_width / (sigma * SQRT_2))
    }

    pub fn density(&self, w: f64) -> f64 {
        let a = self.half_width;
        if w.abs() > a {
            return 0.0;
        }
        match self.family {
            LawFamily::Uniform => 0.5 / a,
            LawFamily::TruncatedGaussian { sigma } => {
                (-w * w / (2.0 * sigma * sigma)).exp()
                    / (sigma * (2.0 * std::f64::consts::PI).sqrt() * self.gauss_norm(sigma))
            }
        }
    }

    pub fn cdf(&self, w: f64) -> f64 {
        let a = self.half_width;
        if w <= -a {
            return 0.0;
        }
        if w >= a {
            return 1.0;
        }
        match self.family {
            LawFamily::Uniform => (w + a) / (2.0 * a),
            LawFamily::TruncatedGaussian { sigma } => {
                let z = self.gauss_norm(sigma);
                0.5 * (erf(w / (sigma * SQRT_2)) + z) / z
            }
        }
    }

    /// sup |ρ₀′/ρ₀| on the open support.
    pub fn log_derivative_bound(&self) -> f64 {
        match self.family {
            LawFamily::Uniform => 0.0,
            LawFamily::TruncatedGaussian { sigma } => self.half_width / (sigma * sigma),
        }
    }

    /// One draw using the supplied stream; never returns exactly 0.
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let a = self.half_width;
        loop {
            let u = unit_f64(rng.next_u64());
            let w = a * (2.0 * u - 1.0);
            if w == 0.0 {
                continue;
            }
            match self.family {
                LawFamily::Uniform => return w,
                LawFamily::TruncatedGaussian { sigma } => {
                    let accept = unit_f64(rng.next_u64());
                    if accept < (-w * w / (2.0 * sigma * sigma)).exp() {
                        return w;
                    }
                }
            }
        }
    }

    /// μ([lo, hi]) where μ is the law of u = 1/ω.
    pub fn inverse_law_mass(&self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return 0.0;
        }
        (self.inverse_law_cdf(hi) - self.inverse_law_cdf(lo)).max(0.0)
    }

    /// P(1/ω ≤ x).
    pub fn inverse_law_cdf(&self, x: f64) -> f64 {
        let f0 = self.cdf(0.0);
        if x > 0.0 {
            f0 + 1.0 - self.cdf(1.0 / x)
        } else if x < 0.0 {
            f0 - self.cdf(1.0 / x)
        } else {
            f0
        }
    }

    /// Density of μ, ρ₀(1/x)/x².
    pub fn inverse_law_density(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        self.density(1.0 / x) / (x * x)
    }
}

#[inline]
fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit seed from a parent seed and an index.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn site_rng(seed: u64, site: LatticeSite) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    let stream = ((site.n1 as u32 as u64) << 32) | site.n2 as u32 as u64;
    rng.set_stream(stream);
    rng
}

/// The value a field with this seed and law carries at `site`.
pub fn site_value(seed: u64, law: &DisorderLaw, site: LatticeSite) -> f64 {
    law.draw(&mut site_rng(seed, site))
}

/// A realization of the impurity strengths on the disk |n| ≤ R.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderField {
    pub seed: u64,
    pub radius: f64,
    pub law: DisorderLaw,
    values: BTreeMap<LatticeSite, f64>,
}

impl DisorderField {
    /// Builds a field from explicit values (e.g. for replay or hand-made tests).
    pub fn from_values(
        seed: u64,
        radius: f64,
        law: DisorderLaw,
        values: BTreeMap<LatticeSite, f64>,
    ) -> Result<Self> {
        law.validate()?;
        for s in sites_in_disk(radius) {
            match values.get(&s) {
                None => return Err(Error::MissingSite(s)),
                Some(&w) if w == 0.0 || !w.is_finite() => {
                    return Err(Error::InvalidParameter(format!(
                        "strength at {s} must be finite and nonzero"
                    )))
                }
                _ => {}
            }
        }
        Ok(DisorderField {
            seed,
            radius,
            law,
            values,
        })
    }

    /// A field with the same strength ω at every site of the disk.
    pub fn constant(radius: f64, law: DisorderLaw, omega: f64) -> Result<Self> {
        let values = sites_in_disk(radius)
            .into_iter()
            .map(|s| (s, omega))
            .collect();
        Self::from_values(0, radius, law, values)
    }

    pub fn get(&self, site: &LatticeSite) -> Option<f64> {
        self.values.get(site).copied()
    }

    pub fn omega(&self, site: &LatticeSite) -> Result<f64> {
        self.get(site).ok_or(Error::MissingSite(*site))
    }

    pub fn values(&self) -> &BTreeMap<LatticeSite, f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy with the strength at one site replaced.
    pub fn with_value(&self, site: LatticeSite, omega: f64) -> Result<Self> {
        if !self.values.contains_key(&site) {
            return Err(Error::MissingSite(site));
        }
        let mut out = self.clone();
        out.values.insert(site, omega);
        Ok(out)
    }

    pub fn to_document(&self, explicit: bool) -> FieldDocument {
        FieldDocument {
            seed: self.seed,
            radius: self.radius,
            law: self.law,
            values: explicit.then(|| {
                self.values
                    .iter()
                    .map(|(s, &omega)| SiteValue {
                        n1: s.n1,
                        n2: s.n2,
                        omega,
                    })
                    .collect()
            }),
        }
    }

    pub fn from_document(doc: &FieldDocument) -> Result<Self> {
        match &doc.values {
            Some(list) => {
                let values = list
                    .iter()
                    .map(|v| (LatticeSite::new(v.n1, v.n2), v.omega))
                    .collect();
                Self::from_values(doc.seed, doc.radius, doc.law, values)
            }
            None => sample_field(doc.seed, doc.radius, doc.law),
        }
    }

    pub fn to_json(&self, explicit: bool) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document(explicit))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

/// Serialized form of a field: the generator inputs, optionally with values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDocument {
    pub seed: u64,
    pub radius: f64,
    pub law: DisorderLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<SiteValue>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteValue {
    pub n1: i32,
    pub n2: i32,
    pub omega: f64,
}

/// Samples the field on |n| ≤ R.
pub fn sample_field(seed: u64, radius: f64, law: DisorderLaw) -> Result<DisorderField> {
    law.validate()?;
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius must be non-negative, got {radius}"
        )));
    }
    let values = sites_in_disk(radius)
        .into_iter()
        .map(|s| (s, site_value(seed, &law, s)))
        .collect();
    Ok(DisorderField {
        seed,
        radius,
        law,
        values,
    })
}

/// u_n = 1/ω_n.
pub fn inverse_strength(field: &DisorderField, site: LatticeSite) -> Result<f64> {
    Ok(1.0 / field.omega(&site)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityRow {
    pub delta: f64,
    pub constant: f64,
    pub argmax: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityReport {
    pub nu: f64,
    pub rows: Vec<RegularityRow>,
    /// Largest ratio between constants at consecutive grid deltas.
    pub max_consecutive_ratio: f64,
}

impl RegularityReport {
    pub fn stable_within(&self, factor: f64) -> bool {
        self.rows.iter().all(|r| r.constant.is_finite()) && self.max_consecutive_ratio <= factor
    }
}

/// μ([x−δ, x+δ]) / (δ μ([x−ν, x+ν])), with 0/0 read as 0.
pub fn regularity_ratio(law: &DisorderLaw, x: f64, delta: f64, nu: f64) -> f64 {
    let num = law.inverse_law_mass(x - delta, x + delta);
    let den = law.inverse_law_mass(x - nu, x + nu);
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / (delta * den)
    }
}

/// Estimates the τ = 1 regularity constant of μ = law of 1/ω on an x-grid.
pub fn tau_regularity_probe(
    law: &DisorderLaw,
    nu: f64,
    delta_grid: &[f64],
) -> Result<RegularityReport> {
    law.validate()?;
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "nu must be positive, got {nu}"
        )));
    }
    let edge = 1.0 / law.half_width;
    let span = 10.0 * edge + 4.0 * nu;
    let mut grid: Vec<f64> = (0..=4000)
        .map(|i| -span + 2.0 * span * i as f64 / 4000.0)
        .collect();
    let mut rows = Vec::new();
    for &delta in delta_grid {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        let mut local = grid.clone();
        for k in -4..=4 {
            let off = k as f64 * 0.5 * delta;
            local.push(edge + off);
            local.push(-edge - off);
        }
        let (mut best, mut arg) = (0.0f64, 0.0);
        for &x in &local {
            let r = regularity_ratio(law, x, delta, nu);
            if r > best {
                best = r;
                arg = x;
            }
        }
        rows.push(RegularityRow {
            delta,
            constant: best,
            argmax: arg,
        });
    }
    grid.clear();
    let max_consecutive_ratio = rows
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].constant, w[1].constant);
            a.max(b) / a.min(b)
        })
        .fold(1.0, f64::max);
    Ok(RegularityReport {
        nu,
        rows,
        max_consecutive_ratio,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MomentCheck {
    pub epsilon: f64,
    pub value: f64,
    pub quadrature_error: f64,
    /// Closed form when available (uniform law).
    pub exact: Option<f64>,
}

/// ∫|u|^ε μ(du) = ∫|ω|^{−ε} ρ₀(ω) dω, finite for ε < 1.
pub fn inverse_moment(law: &DisorderLaw, epsilon: f64) -> Result<MomentCheck> {
    law.validate()?;
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "moment exponent must lie in [0, 1), got {epsilon}"
        )));
    }
    let a = law.half_width;
    // ω = a·t^{1/(1−ε)} removes the endpoint singularity at 0.
    let p = 1.0 / (1.0 - epsilon);
    let f = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let w = a * t.powf(p);
        let jac = a * p * t.powf(p - 1.0);
        (law.density(w) + law.density(-w)) * w.powf(-epsilon) * jac
    };
    let (value, err) = integrate_real(f, &[0.0, 1.0], QuadOptions::rel(1e-12));
    let exact = match law.family {
        LawFamily::Uniform => Some(a.powf(-epsilon) / (1.0 - epsilon)),
        _ => None,
    };
    Ok(MomentCheck {
        epsilon,
        value,
        quadrature_error: err,
        exact,
    })
}
