//! Special functions and the free magnetic kernels.
//!
//! Energies use Landau units: the free levels sit at the non-negative
//! integers and κ = B/4. Points of the plane are `Complex64`.

pub mod gamma;
pub mod kummer;

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use kummer::{gamma_u, kummer_m, kummer_u_integral, kummer_u_log};

/// An energy together with the field strength κ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: Complex64,
    pub kappa: f64,
}

impl SpectralPoint {
    pub fn new(lambda: Complex64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        if !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite, got {lambda}"
            )));
        }
        Ok(SpectralPoint { lambda, kappa })
    }

    pub fn real(lambda: f64, kappa: f64) -> Result<Self> {
        Self::new(Complex64::new(lambda, 0.0), kappa)
    }

    pub fn is_real(&self) -> bool {
        self.lambda.im == 0.0
    }

    /// Errors when λ is a Landau level.
    pub fn check_off_level(&self) -> Result<()> {
        if gamma::is_pole(-self.lambda) {
            return Err(Error::Pole(format!(
                "λ = {} is a Landau level",
                self.lambda.re
            )));
        }
        Ok(())
    }
}

/// A kernel value with an estimate of the discarded series or quadrature tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: Complex64,
    pub truncation_error: f64,
}

/// ψ(−λ).
pub fn digamma(lambda: Complex64) -> Result<Complex64> {
    if gamma::is_pole(-lambda) {
        return Err(Error::Pole(format!(
            "ψ(−λ) has a pole at λ = {}",
            lambda.re
        )));
    }
    Ok(gamma::psi(-lambda))
}

/// Γ(−λ).
pub fn gamma_fn(lambda: Complex64) -> Result<Complex64> {
    if gamma::is_pole(-lambda) {
        return Err(Error::Pole(format!(
            "Γ(−λ) has a pole at λ = {}",
            lambda.re
        )));
    }
    Ok(gamma::gamma(-lambda))
}

/// L_m(x) by the three-term recurrence.
pub fn laguerre(m: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if m == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..m {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// z ∧ z′ = Re z · Im z′ − Im z · Re z′.
#[inline]
pub fn wedge(z: Complex64, zp: Complex64) -> f64 {
    z.re * zp.im - z.im * zp.re
}

/// The magnetic phase factor exp(−2iκ z∧z′).
#[inline]
pub fn magnetic_phase(z: Complex64, zp: Complex64, kappa: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * kappa * wedge(z, zp))
}

/// Kernel of the projection onto the m-th Landau level.
pub fn projector_kernel(m: u32, z: Complex64, zp: Complex64, kappa: f64) -> Complex64 {
    let d2 = (z - zp).norm_sqr();
    let radial = laguerre(m, 2.0 * kappa * d2) * (2.0 * kappa / PI) * (-kappa * d2).exp();
    magnetic_phase(z, zp, kappa) * radial
}

/// Phase-free part of the free Green kernel at squared distance `d2`:
/// (2κ/π) e^{−κ d²} Γ(−λ) U(−λ, 1, 2κ d²).
pub fn green0_radial(sp: &SpectralPoint, d2: f64) -> Result<KernelValue> {
    if d2 <= 0.0 {
        return Err(Error::Coincidence);
    }
    sp.check_off_level()?;
    let kappa = sp.kappa;
    let pref = (2.0 * kappa / PI) * (-kappa * d2).exp();
    let e = gamma_u(-sp.lambda, 2.0 * kappa * d2)?;
    // Real energies give a real radial factor; drop roundoff in the imaginary part.
    let value = if sp.is_real() {
        Complex64::new(e.value.re, 0.0)
    } else {
        e.value
    };
    Ok(KernelValue {
        value: value * pref,
        truncation_error: e.error() * pref,
    })
}

/// The free Green kernel G₀^λ(z, z′).
pub fn green0(sp: &SpectralPoint, z: Complex64, zp: Complex64) -> Result<KernelValue> {
    let r = green0_radial(sp, (z - zp).norm_sqr())?;
    Ok(KernelValue {
        value: r.value * magnetic_phase(z, zp, sp.kappa),
        truncation_error: r.truncation_error,
    })
}

/// λ-derivative of the phase-free kernel, ∂_λ[(2κ/π)e^{−κd²}Γ(−λ)U(−λ,1,2κd²)],
/// by a fourth-order central difference in λ.
pub fn green0_radial_dlambda(sp: &SpectralPoint, d2: f64) -> Result<Complex64> {
    let h = 1e-3 * (1.0 + sp.lambda.norm()).min(10.0);
    let h = h.min(0.25 * distance_to_level(sp.lambda));
    let at = |dl: f64| -> Result<Complex64> {
        let p = SpectralPoint {
            lambda: sp.lambda + dl,
            ..*sp
        };
        Ok(green0_radial(&p, d2)?.value)
    };
    Ok((at(-2.0 * h)? - 8.0 * at(-h)? + 8.0 * at(h)? - at(2.0 * h)?) / (12.0 * h))
}

/// Distance from Re λ to the nearest Landau level (|Im λ| included).
pub fn distance_to_level(lambda: Complex64) -> f64 {
    let x = lambda.re;
    let nearest = if x < 0.0 { 0.0 } else { x.round() };
    Complex64::new(x - nearest, lambda.im).norm()
}

/// Band index N with Re λ ∈ I_N (I₀ = (−∞, 0), I_N = (N−1, N)).
pub fn band_of(x: f64) -> u32 {
    if x < 0.0 {
        0
    } else {
        x.floor() as u32 + 1
    }
}

/// Bound envelope for |G₀^λ| at distance `d`, without its unspecified constant.
pub fn green0_envelope(sp: &SpectralPoint, d: f64) -> f64 {
    let kappa = sp.kappa;
    let x = sp.lambda.re;
    let rho = 2.0 * kappa * d * d;
    let gauss = (-kappa * d * d).exp();
    let log_factor = 1.0 + rho.ln().abs();
    let n = band_of(x);
    if n == 0 {
        if rho <= 1.0 {
            kappa
                * gauss
                * (1.0 / x.abs() + (-(2.0 * kappa * x.abs()).sqrt() * d).exp() * log_factor)
        } else {
            kappa / x.abs() * gauss
        }
    } else {
        let nf = n as f64;
        let g = gamma::gamma(Complex64::new(-x, 0.0)).norm();
        if rho <= 1.0 {
            kappa * nf.powf(nf) * g * log_factor * gauss
        } else {
            kappa.powi(n as i32 + 1) * nf.powf(nf) * g * d.powi(2 * n as i32) * gauss
        }
    }
}
