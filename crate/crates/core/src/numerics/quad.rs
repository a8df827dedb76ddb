//! Adaptive Gauss–Kronrod (7/15) quadrature and fixed Gauss–Legendre rules.

use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Default::default()
        }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let s = f1 + f2;
        kronrod += s * WGK[j];
        abs_sum += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let mut error = ((kronrod - gauss) * half).norm();
    let floor = 4.0 * f64::EPSILON * abs_sum * half.abs();
    if error < floor {
        error = floor;
    }
    Panel { a, b, value, error }
}

/// Globally adaptive integration over consecutive pieces `[p_0,p_1], [p_1,p_2], ...`.
pub fn integrate_pieces<F: FnMut(f64) -> Complex64>(
    mut f: F,
    points: &[f64],
    opts: QuadOptions,
) -> QuadResult {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(&mut f, w[0], w[1]));
            evaluations += 15;
        }
    }
    loop {
        let total: Complex64 = heap.iter().map(|p| p.value).sum();
        let err: f64 = heap.iter().map(|p| p.error).sum();
        let target = opts.abs_tol.max(opts.rel_tol * total.norm());
        if err <= target || heap.len() >= opts.max_intervals {
            return QuadResult {
                value: total,
                error: err,
                evaluations,
                converged: err <= target,
            };
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => {
                return QuadResult {
                    value: Complex64::new(0.0, 0.0),
                    error: 0.0,
                    evaluations,
                    converged: true,
                }
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine resolution.
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            let err: f64 = heap.iter().map(|p| p.error).sum();
            if err <= target {
                continue;
            }
            let total: Complex64 = heap.iter().map(|p| p.value).sum();
            return QuadResult {
                value: total,
                error: err + worst.error,
                evaluations,
                converged: false,
            };
        }
        heap.push(gk15(&mut f, worst.a, mid));
        heap.push(gk15(&mut f, mid, worst.b));
        evaluations += 30;
    }
}

pub fn integrate<F: FnMut(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> QuadResult {
    integrate_pieces(f, &[a, b], opts)
}

/// Real-valued convenience wrapper; returns (value, error estimate).
pub fn integrate_real<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    opts: QuadOptions,
) -> (f64, f64) {
    let r = integrate_pieces(|x| Complex64::new(f(x), 0.0), points, opts);
    (r.value.re, r.error)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if n == 0 {
                break;
            }
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_polynomials() {
        let mut f = |x: f64| Complex64::new(x.powi(22) + 3.0 * x.powi(5), 0.0);
        let p = gk15(&mut f, -1.0, 1.0);
        assert!((p.value.re - 2.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let (v, _) = integrate_real(|x| x.ln(), &[0.0, 1.0], QuadOptions::rel(1e-12));
        assert!((v + 1.0).abs() < 1e-11);
        let (v, _) = integrate_real(|x| 1.0 / x.sqrt(), &[0.0, 1.0], QuadOptions::rel(1e-10));
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn gauss_legendre_weights_sum_and_moments() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}");
            if n >= 3 {
                let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
                assert!((m4 - 0.4).abs() < 1e-13);
            }
        }
    }
}
