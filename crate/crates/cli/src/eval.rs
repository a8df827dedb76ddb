//! Point evaluation of the special functions for `specfun eval`.

use anyhow::Result;
use landau_delta::specfun::{self, SpectralPoint};
use num_complex::Complex64;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Function {
    /// ψ(−λ)
    Digamma,
    /// Γ(−λ)
    Gamma,
    /// M(−λ, 1, ρ)
    KummerM,
    /// U(−λ, 1, ρ) from the logarithmic series
    KummerU,
    /// Γ(−λ)U(−λ, 1, ρ)
    GammaU,
    /// L_m(ρ)
    Laguerre,
    /// Phase-free G₀^λ at distance d
    Green0,
    /// Bound envelope of |G₀^λ| at distance d
    Envelope,
    /// Landau projector kernel P_m(d, 0)
    Projector,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRequest {
    pub function: Function,
    pub lambda: Complex64,
    pub kappa: f64,
    pub rho: f64,
    pub distance: f64,
    pub m: u32,
}

fn complex(v: Complex64) -> Value {
    json!({ "re": v.re, "im": v.im })
}

/// The requested value as a JSON object echoing its arguments.
pub fn evaluate(req: &EvalRequest) -> Result<Value> {
    let a = -req.lambda;
    let sp = || SpectralPoint::new(req.lambda, req.kappa);
    let (value, error) = match req.function {
        Function::Digamma => (complex(specfun::digamma(req.lambda)?), 0.0),
        Function::Gamma => (complex(specfun::gamma_fn(req.lambda)?), 0.0),
        Function::KummerM => {
            let v = specfun::kummer_m(a, req.rho)?;
            (complex(v.value), v.truncation_error)
        }
        Function::KummerU => {
            let v = specfun::kummer_u_log(a, req.rho)?;
            (complex(v.value), v.truncation_error)
        }
        Function::GammaU => {
            let v = specfun::gamma_u(a, req.rho)?;
            (complex(v.value), v.error())
        }
        Function::Laguerre => (json!(specfun::laguerre(req.m, req.rho)), 0.0),
        Function::Green0 => {
            let v = specfun::green0_radial(&sp()?, req.distance * req.distance)?;
            (complex(v.value), v.truncation_error)
        }
        Function::Envelope => (json!(specfun::green0_envelope(&sp()?, req.distance)), 0.0),
        Function::Projector => {
            let z = Complex64::new(req.distance, 0.0);
            (
                complex(specfun::projector_kernel(
                    req.m,
                    z,
                    Complex64::new(0.0, 0.0),
                    req.kappa,
                )),
                0.0,
            )
        }
    };
    Ok(json!({
        "function": format!("{:?}", req.function),
        "lambda": complex(req.lambda),
        "kappa": req.kappa,
        "rho": req.rho,
        "distance": req.distance,
        "m": req.m,
        "value": value,
        "error_estimate": error,
    }))
}
