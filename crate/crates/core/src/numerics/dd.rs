//! Double-double arithmetic (about 106 bits of mantissa).
//!
//! Used where a result is a tiny difference of O(1) power sums, e.g. the
//! fourth-cumulant gap of a spec whose eigenvalues are `sqrt(1 +- 1/n)`.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
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

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn recip(self) -> Self {
        Self::ONE / self
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::ZERO;
        }
        // One Newton step from the f64 root doubles the number of good bits.
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let resid = (self - Self::new(p, e)).to_f64();
        Self::new(x, resid / (2.0 * x))
    }

    pub fn powi(self, mut p: u32) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while p > 0 {
            if p & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            p >>= 1;
        }
        acc
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Mul<f64> for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self * Self::from(rhs)
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * q1;
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * q2;
        let q3 = r.hi / rhs.hi;
        Self::new(q1, q2) + Self::from(q3)
    }
}

impl Div<f64> for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self / Self::from(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_third_times_three() {
        let third = DoubleDouble::ONE / 3.0;
        let back = third * 3.0 - DoubleDouble::ONE;
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn sqrt_squares_back() {
        for &x in &[2.0, 1.001, 0.999, 1e-7, 123.456] {
            let r = DoubleDouble::from(x).sqrt();
            let err = (r * r - DoubleDouble::from(x)).to_f64().abs();
            assert!(err < 1e-30 * x.max(1.0), "x={x} err={err}");
        }
    }

    #[test]
    fn recovers_cancellation_lost_in_f64() {
        // (1 + 1e-20) - 1 is zero in f64.
        let a = DoubleDouble::ONE + DoubleDouble::from(1e-20);
        let d = (a - DoubleDouble::ONE).to_f64();
        assert!((d - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = DoubleDouble::from(1.1).sqrt();
        let mut prod = DoubleDouble::ONE;
        for _ in 0..7 {
            prod = prod * x;
        }
        let diff = (prod - x.powi(7)).to_f64().abs();
        assert!(diff < 1e-30);
    }
}
