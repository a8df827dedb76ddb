//! Double-double real arithmetic (about 32 significant digits).
//!
//! Only the handful of operations needed by the Kummer log-series are
//! provided: the four field operations, `exp`, `ln` and a few constants.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.3190468138462996e-17,
    };
    pub const EULER_GAMMA: Dd = Dd {
        hi: 0.5772156649015329,
        lo: -4.942915152430645e-18,
    };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.2246467991473532e-16,
    };

    #[inline]
    pub const fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    /// Exact ratio of two integers held in f64 (|p|, |q| < 2^53).
    pub fn ratio(p: f64, q: f64) -> Dd {
        Dd::from_f64(p) / Dd::from_f64(q)
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / Dd::LN2.hi).round();
        let r = self - Dd::LN2.mul_f64(k);
        // |r| ≤ ln2/2, so 27 Taylor terms reach double-double precision.
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for n in 1..=27 {
            term = (term * r) / Dd::from_f64(n as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        let scale = 2f64.powi(k as i32);
        Dd {
            hi: sum.hi * scale,
            lo: sum.lo * scale,
        }
    }

    /// Natural logarithm by Newton refinement of the f64 estimate.
    pub fn ln(self) -> Dd {
        assert!(self.hi > 0.0, "Dd::ln of non-positive value");
        let mut y = Dd::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
        Dd::from_f64(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

/// Bernoulli ratios B_{2k}/(2k) as exact numerator/denominator pairs.
const DIGAMMA_ASYMPTOTIC: [(f64, f64); 12] = [
    (1.0, 12.0),
    (-1.0, 120.0),
    (1.0, 252.0),
    (-1.0, 240.0),
    (1.0, 132.0),
    (-691.0, 32760.0),
    (1.0, 12.0),
    (-3617.0, 8160.0),
    (43867.0, 14364.0),
    (-174611.0, 6600.0),
    (854513.0, 3036.0),
    (-236364091.0, 65520.0),
];

/// Digamma of a real argument in double-double precision.
///
/// Returns `None` at the poles (non-positive integers).
pub fn digamma_dd(x: f64) -> Option<Dd> {
    if x <= 0.0 && x == x.floor() {
        return None;
    }
    let mut acc = Dd::ZERO;
    let mut y = Dd::from_f64(x);
    // Shift into the asymptotic regime; for x < 0 this walks through the poles'
    // neighbourhood but never lands on one since x is not an integer.
    while y.hi < 40.0 {
        acc = acc - y.recip();
        y = y + Dd::ONE;
    }
    let inv = y.recip();
    let inv2 = inv * inv;
    let mut pow = inv2;
    let mut series = Dd::ZERO;
    for &(p, q) in DIGAMMA_ASYMPTOTIC.iter() {
        series = series + Dd::ratio(p, q) * pow;
        pow = pow * inv2;
    }
    Some(acc + y.ln() - inv.mul_f64(0.5) - series)
}
