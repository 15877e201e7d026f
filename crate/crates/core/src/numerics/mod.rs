//! Self-contained special functions, quadrature and root finding.

mod dd;

pub use dd::DoubleDouble;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Stopping rule shared by the iterative routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-10,
            max_iter: 1_000_000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }
}

/// Least-squares fit of `ln y = intercept + slope * ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln |Gamma(x)|` via the Lanczos approximation, reflected for `x < 1/2`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = (std::f64::consts::PI * x).sin().abs();
        return std::f64::consts::PI.ln() - s.ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `n!` as a float; exact up to `22!`.
pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn gamma_fn(x: f64) -> f64 {
    if x > 0.0 {
        ln_gamma(x).exp()
    } else {
        let s = (std::f64::consts::PI * x).sin();
        std::f64::consts::PI / (s * ln_gamma(1.0 - x).exp())
    }
}

const KUMMER_MAX_TERMS: usize = 100_000;
const KUMMER_Z_MAX: f64 = 700.0;

fn kummer_series(a: f64, b: f64, z: f64) -> Result<f64> {
    let mut sum = CompensatedSum::default();
    let mut term = 1.0;
    sum.add(term);
    for k in 0..KUMMER_MAX_TERMS {
        let kf = k as f64;
        let ratio = (a + kf) / (b + kf) * z / (kf + 1.0);
        term *= ratio;
        sum.add(term);
        if term == 0.0 {
            return Ok(sum.value());
        }
        if term.abs() <= 1e-17 * sum.value().abs() && ratio.abs() < 0.5 {
            return Ok(sum.value());
        }
    }
    Err(Error::Numeric {
        routine: "kummer_m",
        estimate: sum.value(),
        error: term.abs(),
    })
}

fn check_kummer_b(b: f64) -> Result<()> {
    if !b.is_finite() || (b <= 0.0 && b.fract() == 0.0) {
        return Err(domain(format!("kummer_m: b = {b} is a nonpositive integer")));
    }
    Ok(())
}

/// Confluent hypergeometric function `M(a, b, z)` for `|z| <= 700`.
///
/// Negative arguments go through Kummer's transformation
/// `M(a, b, z) = e^z M(b - a, b, -z)` so the series never alternates.
pub fn kummer_m(a: f64, b: f64, z: f64) -> Result<f64> {
    check_kummer_b(b)?;
    if !(z.abs() <= KUMMER_Z_MAX) {
        return Err(domain(format!("kummer_m: |z| = {} exceeds 700", z.abs())));
    }
    if z < 0.0 {
        Ok(z.exp() * kummer_series(b - a, b, -z)?)
    } else {
        kummer_series(a, b, z)
    }
}

/// `e^{-z} M(a, b, z)` for `z >= 0`, finite for every `z`.
///
/// Beyond the series range the leading asymptotic expansion is used; the
/// neglected part is of order `e^{-z}` and vanishes in double precision.
pub fn kummer_m_scaled(a: f64, b: f64, z: f64) -> Result<f64> {
    check_kummer_b(b)?;
    if !(z >= 0.0) || !z.is_finite() {
        return Err(domain(format!("kummer_m_scaled: z = {z} must be finite and >= 0")));
    }
    if z <= KUMMER_Z_MAX {
        return Ok((-z).exp() * kummer_series(a, b, z)?);
    }
    if a <= 0.0 && a.fract() == 0.0 {
        // Polynomial in z times e^{-z}: underflows.
        return Ok(0.0);
    }
    let mut sum = CompensatedSum::default();
    let mut term = 1.0;
    sum.add(term);
    for k in 0..200 {
        let kf = k as f64;
        let next = term * (b - a + kf) * (1.0 - a + kf) / ((kf + 1.0) * z);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        term = next;
        sum.add(term);
        if term.abs() < 1e-17 * sum.value().abs() {
            break;
        }
    }
    let log_pref = ln_gamma(b) - ln_gamma(a) + (a - b) * z.ln();
    Ok(gamma_sign(b) * gamma_sign(a) * log_pref.exp() * sum.value())
}

fn gamma_sign(x: f64) -> f64 {
    if x > 0.0 || (x.floor() as i64) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn reg_lower_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(domain(format!("reg_lower_gamma: shape {s} must be positive")));
    }
    if !(x >= 0.0) {
        return Err(domain(format!("reg_lower_gamma: x = {x} must be >= 0")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let log_pref = -x + s * x.ln() - ln_gamma(s);
    if x < s + 1.0 {
        let mut sum = CompensatedSum::default();
        let mut term = 1.0 / s;
        sum.add(term);
        for n in 1..100_000 {
            term *= x / (s + n as f64);
            sum.add(term);
            if term.abs() < 1e-17 * sum.value().abs() {
                return Ok((sum.value() * log_pref.exp()).min(1.0));
            }
        }
        Err(Error::Numeric {
            routine: "reg_lower_gamma",
            estimate: sum.value() * log_pref.exp(),
            error: term.abs(),
        })
    } else {
        // Modified Lentz evaluation of the continued fraction for Q(s, x).
        let tiny = 1e-300;
        let mut bb = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / bb;
        let mut h = d;
        for i in 1..100_000 {
            let an = -(i as f64) * (i as f64 - s);
            bb += 2.0;
            d = an * d + bb;
            if d.abs() < tiny {
                d = tiny;
            }
            c = bb + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                let q = log_pref.exp() * h;
                return Ok((1.0 - q).max(0.0));
            }
        }
        Err(Error::Numeric {
            routine: "reg_lower_gamma",
            estimate: 1.0 - log_pref.exp() * h,
            error: f64::NAN,
        })
    }
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the per-interval Gauss/Kronrod discrepancies.
    pub error: f64,
    pub intervals: usize,
}

// Nodes and weights as tabulated (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let (k, g) = (kronrod * half, gauss * half);
    if !k.is_finite() {
        return Err(domain(format!("integrate: integrand not finite on [{a}, {b}]")));
    }
    Ok((k, (k - g).abs()))
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: &Tolerance) -> Result<Quadrature> {
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    let (v, e) = gauss_kronrod(f, a, b)?;
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut intervals = 1usize;
    let finish = |heap: &BinaryHeap<Segment>, frozen: &[Segment]| {
        let segs = || heap.iter().chain(frozen.iter());
        (
            compensated_sum(segs().map(|s| s.value)),
            compensated_sum(segs().map(|s| s.error)),
        )
    };
    loop {
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            let (value, error) = finish(&heap, &frozen);
            return Ok(Quadrature { value, error, intervals });
        }
        let Some(worst) = heap.pop() else {
            let (value, error) = finish(&heap, &frozen);
            if error <= tol.abs.max(tol.rel * value.abs()) {
                return Ok(Quadrature { value, error, intervals });
            }
            return Err(Error::Numeric { routine: "integrate", estimate: value, error });
        };
        if intervals >= tol.max_iter {
            heap.push(worst);
            let (value, error) = finish(&heap, &frozen);
            return Err(Error::Numeric { routine: "integrate", estimate: value, error });
        }
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 8.0 * f64::EPSILON * mid.abs() {
            frozen.push(worst);
            continue;
        }
        let (lv, le) = gauss_kronrod(f, worst.a, mid)?;
        let (rv, re) = gauss_kronrod(f, mid, worst.b)?;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        intervals += 1;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
        // Running sums drift; resynchronise now and then.
        if intervals % 256 == 0 {
            let (v, e) = finish(&heap, &frozen);
            total = v;
            total_err = e;
        }
    }
}

/// Adaptive 15-point Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// Infinite endpoints are mapped onto a finite interval via
/// `x = a + t / (1 - t)`. Convergence means the accumulated error estimate
/// is at most `max(tol.abs, tol.rel * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: &Tolerance) -> Result<Quadrature> {
    integrate_dyn(&f, a, b, tol)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: &Tolerance) -> Result<Quadrature> {
    if a.is_nan() || b.is_nan() {
        return Err(domain("integrate: NaN endpoint"));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, intervals: 0 });
    }
    if a > b {
        let q = integrate_dyn(f, b, a, tol)?;
        return Ok(Quadrature { value: -q.value, ..q });
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(&f, a, b, tol),
        (true, false) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            };
            adaptive(&g, 0.0, 1.0, tol)
        }
        (false, true) => {
            let g = |t: f64| f(b - (1.0 - t) / t) / (t * t);
            adaptive(&g, 0.0, 1.0, tol)
        }
        (false, false) => {
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, tol)?;
            let right = integrate_dyn(f, 0.0, f64::INFINITY, tol)?;
            Ok(Quadrature {
                value: left.value + right.value,
                error: left.error + right.error,
                intervals: left.intervals + right.intervals,
            })
        }
    }
}

/// Brent's bracketing root finder on `[lo, hi]`.
///
/// Returns `x` with `|f(x)| <= tol.abs` inside a bracket no wider than
/// `tol.abs`, or the best point when the bracket cannot shrink further.
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: &Tolerance) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(domain(format!(
            "find_root: no sign change on [{lo}, {hi}] (f = {fa}, {fb})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.abs;
        let m = 0.5 * (c - b);
        if fb == 0.0 {
            return Ok(b);
        }
        if m.abs() <= tol1 {
            let stuck = m.abs() <= 2.0 * f64::EPSILON * b.abs().max(f64::MIN_POSITIVE);
            if fb.abs() <= tol.abs || stuck {
                return Ok(b);
            }
            a = b;
            fa = fb;
            b += m;
            fb = f(b);
            continue;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b);
    }
    Err(Error::Numeric {
        routine: "find_root",
        estimate: b,
        error: (c - b).abs(),
    })
}

/// Ordinary least squares on `(ln n, ln y)`.
pub fn fit_loglog(ns: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if ns.len() != ys.len() || ns.len() < 2 {
        return Err(domain("fit_loglog: need at least two (n, y) pairs of equal length"));
    }
    if ns.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(domain("fit_loglog: every n and y must be positive and finite"));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / k;
    let my = compensated_sum(ls.iter().copied()) / k;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    if sxx == 0.0 {
        return Err(domain("fit_loglog: all n are equal"));
    }
    let sxy = compensated_sum(xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)));
    let syy = compensated_sum(ls.iter().map(|y| (y - my) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = compensated_sum(
        xs.iter()
            .zip(&ls)
            .map(|(x, y)| (y - intercept - slope * x).powi(2)),
    );
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(LogLogFit { slope, intercept, r_squared })
}
