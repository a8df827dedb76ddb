//! Kummer functions M(a,1,ρ) and U(a,b,ρ).
//!
//! The workhorse is [`gamma_u`], the product Γ(a)·U(a,1,ρ), which is what the
//! free Green kernel needs. It is evaluated by whichever of three methods is
//! accurate at the given point:
//!
//! * the logarithmic power series, in double-double for real `a` (the series
//!   cancels badly once ρ grows, roughly like e^ρ),
//! * the large-ρ asymptotic expansion with optimal truncation,
//! * the Laplace-type integral for Re a > 0.

use super::gamma::{gamma, is_pole, ln_gamma, psi};
use super::KernelValue;
use crate::error::{Error, Result};
use crate::numerics::dd::{digamma_dd, Dd};
use crate::numerics::quad::{integrate_pieces, QuadOptions};
use crate::numerics::roots::brent;
use num_complex::Complex64;

const EULER: f64 = 0.577_215_664_901_532_9;
/// Unit roundoff of the double-double type (conservative).
const DD_EPS: f64 = 1e-31;

/// A series or quadrature result with separate tail and rounding estimates.
#[derive(Clone, Copy, Debug)]
pub struct Evaluation {
    pub value: Complex64,
    pub tail: f64,
    pub rounding: f64,
}

impl Evaluation {
    pub fn error(&self) -> f64 {
        self.tail + self.rounding
    }

    fn relative_error(&self) -> f64 {
        let m = self.value.norm();
        if m > 0.0 {
            self.error() / m
        } else {
            f64::INFINITY
        }
    }
}

/// Rough log-magnitude of the largest power-series term; used to skip series
/// evaluation where terms would overflow.
fn series_log_peak(a: Complex64, rho: f64) -> f64 {
    2.0 * ((a.norm() + 1.0) * rho).sqrt()
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// M(a,1,ρ) = Σ_r (a)_r ρ^r / (r!)².
pub fn kummer_m(a: Complex64, rho: f64) -> Result<KernelValue> {
    if !rho.is_finite() {
        return Err(Error::Domain("rho must be finite".into()));
    }
    if series_log_peak(a, rho.abs()) > 700.0 {
        return Err(Error::Overflow(format!(
            "M({a}, 1, {rho}) exceeds double range"
        )));
    }
    let mut term = c(1.0);
    let mut sum = c(1.0);
    let mut r = 0u32;
    loop {
        let rf = r as f64;
        let ratio_num = (a + rf) * rho;
        let denom = (rf + 1.0) * (rf + 1.0);
        term = term * ratio_num / denom;
        sum += term;
        r += 1;
        let q = ratio_num.norm() / denom;
        if term.norm() == 0.0 {
            return Ok(KernelValue {
                value: sum,
                truncation_error: 0.0,
            });
        }
        if q < 0.5 && term.norm() < 1e-17 * sum.norm() {
            let next_q = (a + r as f64).norm() * rho.abs() / ((r as f64 + 1.0).powi(2));
            let tail = term.norm() * next_q / (1.0 - next_q.min(0.5));
            if !sum.re.is_finite() || !sum.im.is_finite() {
                return Err(Error::Overflow(format!("M({a}, 1, {rho}) overflowed")));
            }
            return Ok(KernelValue {
                value: sum,
                truncation_error: tail,
            });
        }
        if r > 100_000 {
            return Err(Error::Overflow(format!(
                "M({a}, 1, {rho}) did not converge"
            )));
        }
    }
}

/// Tail bound for the ψ-weighted log series after the last included index `r`.
fn log_series_tail(next_term: f64, next_weight: f64, a_plus_r: f64, r: f64, rho: f64) -> f64 {
    let q = (a_plus_r.abs() * rho / ((r + 1.0) * (r + 1.0))).min(0.5);
    let step = 1.0 / a_plus_r.abs().max(1.0) + 2.0 / (r + 1.0);
    next_term * (next_weight.abs() / (1.0 - q) + step * q / ((1.0 - q) * (1.0 - q)))
}

/// The bracket B(a,ρ) = Σ_r (a)_r ρ^r/(r!)² [ln ρ + ψ(a+r) − 2ψ(1+r)], so that
/// Γ(a)U(a,1,ρ) = −B. Double-double evaluation for real non-pole `a`.
pub fn log_series_dd(a: f64, rho: f64) -> Option<Evaluation> {
    let rho_d = Dd::from_f64(rho);
    let ln_rho = rho_d.ln();
    let mut psi_a = digamma_dd(a)?;
    let mut psi_1 = -Dd::EULER_GAMMA;
    let mut term = Dd::ONE;
    let mut weight = ln_rho + psi_a - psi_1.mul_f64(2.0);
    let mut sum_w = term * weight;
    let mut abs_m = 1.0f64;
    let mut abs_w = weight.to_f64().abs();
    let mut rounding = 0.0f64;
    let mut small_run = 0;
    let mut r = 0u32;
    loop {
        let rf = r as f64;
        let a_plus_r = Dd::from_f64(a) + Dd::from_f64(rf);
        // advance to index r+1
        psi_a = psi_a + a_plus_r.recip();
        psi_1 = psi_1 + Dd::from_f64(rf + 1.0).recip();
        let denom = (rf + 1.0) * (rf + 1.0);
        term = (term * a_plus_r).mul_f64(rho) / Dd::from_f64(denom);
        weight = ln_rho + psi_a - psi_1.mul_f64(2.0);
        r += 1;
        let tm = term.to_f64().abs();
        let tw = (term * weight).to_f64().abs();
        sum_w = sum_w + term * weight;
        abs_m += tm;
        abs_w += tw;
        rounding += (r as f64).sqrt() * tw;
        if !term.is_finite() {
            return None;
        }
        let q = (a + rf + 1.0).abs() * rho / ((rf + 2.0) * (rf + 2.0));
        if q < 0.5 && tm <= 1e-33 * abs_m && tw <= 1e-33 * abs_w.max(f64::MIN_POSITIVE) {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= 3 || tm == 0.0 {
            let next_term = tm * q;
            let next_weight =
                weight.to_f64().abs() + 1.0 / (a + rf + 1.0).abs().max(1.0) + 2.0 / (rf + 2.0);
            let tail = log_series_tail(next_term, next_weight, a + rf + 1.0, rf + 1.0, rho);
            let value = sum_w.to_f64();
            let rounding = 8.0 * DD_EPS * (rounding + abs_w) + f64::EPSILON * 0.5 * value.abs();
            return Some(Evaluation {
                value: c(value),
                tail,
                rounding,
            });
        }
        if r > 200_000 {
            return None;
        }
    }
}

/// Same bracket in complex double precision.
pub fn log_series_c64(a: Complex64, rho: f64) -> Option<Evaluation> {
    if is_pole(a) {
        return None;
    }
    let ln_rho = rho.ln();
    let mut psi_a = psi(a);
    let mut psi_1 = -EULER;
    let mut term = c(1.0);
    let mut weight = ln_rho + psi_a - 2.0 * psi_1;
    let mut sum_w = term * weight;
    let mut abs_m = 1.0f64;
    let mut abs_w = weight.norm();
    let mut rounding = 0.0f64;
    let mut small_run = 0;
    let mut r = 0u32;
    loop {
        let rf = r as f64;
        let a_plus_r = a + rf;
        psi_a += 1.0 / a_plus_r;
        psi_1 += 1.0 / (rf + 1.0);
        let denom = (rf + 1.0) * (rf + 1.0);
        term = term * a_plus_r * rho / denom;
        weight = ln_rho + psi_a - 2.0 * psi_1;
        r += 1;
        let tm = term.norm();
        let tw = (term * weight).norm();
        sum_w += term * weight;
        abs_m += tm;
        abs_w += tw;
        rounding += (r as f64).sqrt() * tw;
        if !tm.is_finite() {
            return None;
        }
        let q = (a + rf + 1.0).norm() * rho / ((rf + 2.0) * (rf + 2.0));
        if q < 0.5 && tm <= 1e-17 * abs_m && tw <= 1e-17 * abs_w {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= 3 || tm == 0.0 {
            let next_term = tm * q;
            let next_weight =
                weight.norm() + 1.0 / (a + rf + 1.0).norm().max(1.0) + 2.0 / (rf + 2.0);
            let tail =
                log_series_tail(next_term, next_weight, (a + rf + 1.0).norm(), rf + 1.0, rho);
            let rounding = 4.0 * f64::EPSILON * (rounding + abs_w);
            return Some(Evaluation {
                value: sum_w,
                tail,
                rounding,
            });
        }
        if r > 200_000 {
            return None;
        }
    }
}

/// Large-ρ expansion Γ(a)U(a,1,ρ) ~ Γ(a)ρ^{−a} Σ_n (−1)^n ((a)_n)² / (n! ρ^n),
/// truncated just before the smallest term.
pub fn asymptotic_gamma_u(a: Complex64, rho: f64) -> Option<Evaluation> {
    if is_pole(a) {
        return None;
    }
    let prefactor = (ln_gamma(a) - a * rho.ln()).exp();
    if !prefactor.re.is_finite() || !prefactor.im.is_finite() {
        return None;
    }
    let mut term = c(1.0);
    let mut sum = c(1.0);
    let mut last = 1.0f64;
    let mut omitted = f64::INFINITY;
    for n in 0..2000u32 {
        let nf = n as f64;
        let next = -term * (a + nf) * (a + nf) / ((nf + 1.0) * rho);
        let m = next.norm();
        if m >= last && n > 0 {
            omitted = m;
            break;
        }
        if m <= 1e-18 * sum.norm() {
            omitted = m;
            sum += next;
            break;
        }
        sum += next;
        term = next;
        last = m;
    }
    let scale = prefactor.norm();
    Some(Evaluation {
        value: prefactor * sum,
        tail: omitted * scale,
        rounding: 4.0 * f64::EPSILON * scale * sum.norm(),
    })
}

#[inline]
fn ln1p_exp(s: f64) -> f64 {
    if s > 36.0 {
        s + (-s).exp()
    } else {
        s.exp().ln_1p()
    }
}

/// Γ(a)U(a,b,ρ) = ∫₀^∞ e^{−ρt} t^{a−1} (1+t)^{b−a−1} dt for Re a > 0.
///
/// Integrated in s = ln t around the saddle of the integrand's modulus, with
/// geometric panels and the range cut where the modulus drops by e^{−46}.
pub fn integral_gamma_u(a: Complex64, b: i32, rho: f64, rel_tol: f64) -> Result<Evaluation> {
    let alpha = a.re;
    if alpha <= 0.0 {
        return Err(Error::Domain(format!(
            "integral representation needs Re a > 0, got {a}"
        )));
    }
    if rho <= 0.0 || !rho.is_finite() {
        return Err(Error::Domain(format!(
            "rho must be positive and finite, got {rho}"
        )));
    }
    let bf = b as f64;
    let beta_re = bf - alpha - 1.0;
    let slope = |s: f64| {
        let sig = 1.0 / (1.0 + (-s).exp());
        alpha - rho * s.exp() + beta_re * sig
    };
    let lo = (alpha / (rho + beta_re.abs() + 1.0)).ln() - 1.0;
    let hi = ((alpha + beta_re.abs() + 1.0) / rho).ln() + 1.0;
    let s_star = brent(slope, lo, hi, 1e-14 * (1.0 + lo.abs().max(hi.abs())), 300)
        .ok_or_else(|| Error::Domain("failed to bracket the integrand peak".into()))?;
    let es = s_star.exp();
    let sig_star = es / (1.0 + es);
    let beta = c(bf) - a - 1.0;
    let h_star = -rho * es + a * s_star + beta * ln1p_exp(s_star);
    if h_star.re < -745.0 {
        return Ok(Evaluation {
            value: c(0.0),
            tail: 0.0,
            rounding: 0.0,
        });
    }
    if h_star.re > 709.0 {
        return Err(Error::Overflow(format!(
            "Γ(a)U(a,{b},ρ) too large at a = {a}, ρ = {rho}"
        )));
    }
    // h(s* + u) − h(s*), arranged to avoid cancellation of large terms.
    // a·u + β·ln(1 + σ(eᵘ−1)) = −a·ln(1 + (1−σ)(e⁻ᵘ−1)) + (b−1)·ln(1 + σ(eᵘ−1)).
    let sig_comp = 1.0 / (1.0 + es);
    let rel = move |u: f64| -> Complex64 {
        let em1 = u.exp_m1();
        -rho * es * em1 - a * (sig_comp * (-u).exp_m1()).ln_1p()
            + (bf - 1.0) * (sig_star * em1).ln_1p()
    };
    let curvature = -rho * es + beta_re * sig_star * (1.0 - sig_star);
    let width = if curvature < 0.0 {
        (1.0 / -curvature).sqrt()
    } else {
        1.0
    };
    let mut points = vec![0.0];
    let mut step = width;
    loop {
        points.push(-step);
        if rel(-step).re < -46.0 || step > 1e6 {
            break;
        }
        step *= 2.0;
    }
    step = width;
    loop {
        points.push(step);
        if rel(step).re < -46.0 || step > 1e6 {
            break;
        }
        step *= 2.0;
    }
    points.sort_by(f64::total_cmp);
    let r = integrate_pieces(|u| rel(u).exp(), &points, QuadOptions::rel(rel_tol));
    let scale = h_star.exp();
    let value = scale * r.value;
    let cut = 1e-19 * value.norm();
    Ok(Evaluation {
        value,
        tail: r.error * scale.norm() + cut,
        rounding: 4.0 * f64::EPSILON * value.norm(),
    })
}

/// Γ(a)·U(a,1,ρ), choosing the most accurate available method.
pub fn gamma_u(a: Complex64, rho: f64) -> Result<Evaluation> {
    if rho <= 0.0 {
        return Err(Error::Domain(
            "U(a,1,ρ) diverges logarithmically at ρ = 0".into(),
        ));
    }
    if is_pole(a) {
        return Err(Error::Pole(format!("Γ(a) has a pole at a = {}", a.re)));
    }
    let mut best: Option<Evaluation> = None;
    let consider = |e: Evaluation, best: &mut Option<Evaluation>| {
        if best.is_none_or(|b| e.relative_error() < b.relative_error()) {
            *best = Some(e);
        }
    };
    let series_ok = series_log_peak(a, rho) < 600.0;
    let real = a.im == 0.0;
    let target = if real { 1e-14 } else { 1e-13 };
    if series_ok {
        let series = if real {
            log_series_dd(a.re, rho)
        } else {
            log_series_c64(a, rho)
        };
        if let Some(e) = series {
            let e = Evaluation {
                value: -e.value,
                ..e
            };
            if e.relative_error() <= target {
                return Ok(e);
            }
            consider(e, &mut best);
        }
    }
    if rho >= 8.0 {
        if let Some(e) = asymptotic_gamma_u(a, rho) {
            if e.relative_error() <= target {
                return Ok(e);
            }
            consider(e, &mut best);
        }
    }
    if a.re > 0.0 {
        let e = integral_gamma_u(a, 1, rho, 1e-14)?;
        if e.value.norm() == 0.0 {
            return Ok(e);
        }
        consider(e, &mut best);
    }
    best.ok_or_else(|| {
        Error::Domain(format!(
            "no method converged for Γ(a)U(a,1,ρ) at a = {a}, ρ = {rho}"
        ))
    })
}

/// U(a,1,ρ) from the logarithmic series, with certified tail estimate.
pub fn kummer_u_log(a: Complex64, rho: f64) -> Result<KernelValue> {
    if rho <= 0.0 {
        return Err(Error::Domain(format!(
            "U(a,1,ρ) ~ −ln ρ / Γ(a) diverges as ρ → 0⁺ (got ρ = {rho})"
        )));
    }
    if is_pole(a) {
        return Err(Error::Pole(format!(
            "log series undefined at non-positive integer a = {}",
            a.re
        )));
    }
    if series_log_peak(a, rho) > 700.0 {
        return Err(Error::Overflow(format!(
            "log series terms overflow at a = {a}, ρ = {rho}"
        )));
    }
    let eval = if a.im == 0.0 {
        log_series_dd(a.re, rho)
    } else {
        log_series_c64(a, rho)
    }
    .ok_or_else(|| Error::Overflow(format!("log series failed at a = {a}, ρ = {rho}")))?;
    let g = gamma(a);
    Ok(KernelValue {
        value: -eval.value / g,
        truncation_error: eval.tail / g.norm(),
    })
}

/// U(a,b,ρ) from the integral representation (integer `b`), Re a > 0.
pub fn kummer_u_integral(a: Complex64, b: i32, rho: f64) -> Result<KernelValue> {
    let eval = integral_gamma_u(a, b, rho, 1e-13)?;
    let lg = ln_gamma(a);
    let value = (eval.value.ln() - lg).exp();
    let value = if eval.value.norm() == 0.0 {
        c(0.0)
    } else {
        value
    };
    Ok(KernelValue {
        value,
        truncation_error: eval.tail * (-lg.re).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn m_series_special_values() {
        let v = kummer_m(c(1.0), 1.0).unwrap();
        assert!((v.value.re - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(kummer_m(c(0.0), 7.0).unwrap().value, c(1.0));
        assert_eq!(
            kummer_m(Complex64::new(0.3, 2.0), 0.0).unwrap().value,
            c(1.0)
        );
    }

    #[test]
    fn u_at_a_one_is_exponential_integral() {
        // Γ(1)U(1,1,ρ) = e^ρ E₁(ρ); at ρ = 1 this is 0.596347362323194...
        let v = gamma_u(c(1.0), 1.0).unwrap();
        assert!((v.value.re - 0.596_347_362_323_194_1).abs() < 1e-15);
        let w = integral_gamma_u(c(1.0), 1, 1.0, 1e-14).unwrap();
        assert!((w.value.re - 0.596_347_362_323_194_1).abs() < 1e-14);
    }

    #[test]
    fn methods_agree_across_regimes() {
        for &a in &[0.5, 1.0, 2.3, 7.5] {
            for &rho in &[0.05, 1.0, 4.0, 12.0, 20.0, 35.0] {
                let q = integral_gamma_u(c(a), 1, rho, 1e-14).unwrap().value;
                if let Some(e) = log_series_dd(a, rho) {
                    let bound = e.error() + 1e-12 * q.norm();
                    assert!(
                        (-e.value - q).norm() <= bound,
                        "series vs integral a={a} rho={rho}"
                    );
                }
                let best = gamma_u(c(a), rho).unwrap();
                assert!(
                    rel(best.value, q) < 1e-12,
                    "selected method a={a} rho={rho}"
                );
                if rho >= 12.0 {
                    let asy = asymptotic_gamma_u(c(a), rho).unwrap();
                    if asy.relative_error() < 1e-13 {
                        assert!(rel(asy.value, q) < 1e-12, "asymptotic a={a} rho={rho}");
                    }
                }
            }
        }
    }

    #[test]
    fn negative_a_series_vs_asymptotic_overlap() {
        for &a in &[-0.5, -1.3, -2.7, -3.5] {
            for &rho in &[30.0, 35.0, 40.0] {
                let s = -log_series_dd(a, rho).unwrap().value;
                let asy = asymptotic_gamma_u(c(a), rho).unwrap();
                assert!(asy.relative_error() < 1e-11);
                assert!(
                    rel(s, asy.value) < 1e-11,
                    "a={a} rho={rho}: {s} vs {}",
                    asy.value
                );
            }
        }
    }

    #[test]
    fn complex_a_integral_vs_series() {
        let a = Complex64::new(3.0, 3.0);
        for &rho in &[0.5, 2.0, 8.0] {
            let e = log_series_c64(a, rho).unwrap();
            let q = integral_gamma_u(a, 1, rho, 1e-14).unwrap().value;
            assert!(
                (-e.value - q).norm() <= e.error() + 1e-12 * q.norm(),
                "rho = {rho}"
            );
        }
    }

    #[test]
    fn deep_a_underflows_to_zero() {
        let v = gamma_u(c(1e12), 8.0).unwrap();
        assert_eq!(v.value, c(0.0));
    }

    #[test]
    fn pole_and_origin_errors() {
        assert!(matches!(gamma_u(c(-2.0), 1.0), Err(Error::Pole(_))));
        assert!(matches!(kummer_u_log(c(0.5), 0.0), Err(Error::Domain(_))));
        assert!(matches!(
            kummer_u_integral(c(-0.5), 1, 1.0),
            Err(Error::Domain(_))
        ));
    }
}
