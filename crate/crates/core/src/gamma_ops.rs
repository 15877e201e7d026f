//! Variances and covariances of the centered Gamma operators
//! `Gamma_bar_r(F) = sum_i 2^r c_i^{r+1} (N_i^2 - 1)` and the
//! characterisations of Gamma laws built on them.

use serde::{Deserialize, Serialize};

use crate::chaos2::EigenvalueSpec;
use crate::error::{domain, Result};
use crate::numerics::{compensated_sum, factorial, DoubleDouble};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub r: u32,
    pub value: f64,
}

/// `Delta_r = Var(Gamma_{r+1} - 2 Gamma_r) = 2^{2r+3} sum c^{2r+2} (c-1)^2`.
pub fn delta(spec: &EigenvalueSpec, r: u32) -> DeltaValue {
    let c = spec.coeffs();
    let sum = compensated_sum((0..spec.len()).map(|i| {
        let d = spec.deviation(i);
        c[i].powi(2 * r as i32 + 2) * d * d
    }));
    DeltaValue { r, value: 2f64.powi(2 * r as i32 + 3) * sum }
}

/// The same quantity from cumulants alone:
/// `kappa_{2r+4}/(2r+3)! - 4 kappa_{2r+3}/(2r+2)! + 4 kappa_{2r+2}/(2r+1)!`.
pub fn delta_via_cumulants(spec: &EigenvalueSpec, r: u32) -> Result<f64> {
    let p = 2 * r + 2;
    Ok(compensated_sum([
        spec.cumulant(p + 2)? / factorial(p + 1),
        -4.0 * spec.cumulant(p + 1)? / factorial(p),
        4.0 * spec.cumulant(p)? / factorial(p - 1),
    ]))
}

/// `Cov(Gamma_bar_3 - 2 Gamma_bar_2, Gamma_bar_2 - 2 Gamma_bar_1) = 64 sum c^5 (c-1)^2`.
pub fn cov_32_21(spec: &EigenvalueSpec) -> f64 {
    let c = spec.coeffs();
    64.0 * compensated_sum((0..spec.len()).map(|i| {
        let d = spec.deviation(i);
        c[i].powi(5) * d * d
    }))
}

/// `kappa_7/6! - 4 kappa_6/5! + 4 kappa_5/4!`.
pub fn cov_32_21_via_cumulants(spec: &EigenvalueSpec) -> Result<f64> {
    Ok(compensated_sum([
        spec.cumulant(7)? / factorial(6),
        -4.0 * spec.cumulant(6)? / factorial(5),
        4.0 * spec.cumulant(5)? / factorial(4),
    ]))
}

/// `Phi(beta) = Var((Gamma_bar_3 - 2 Gamma_bar_2) - 2 beta^2 (Gamma_bar_2 - 2 Gamma_bar_1))`
/// `= 2 sum_i (8(c^4 - c^3) - 8 beta^2 (c^3 - c^2))^2`.
pub fn phi(spec: &EigenvalueSpec, beta: f64) -> f64 {
    let b2 = beta * beta;
    let c = spec.coeffs();
    2.0 * compensated_sum((0..spec.len()).map(|i| {
        let d = spec.deviation(i);
        let a = 8.0 * c[i].powi(3) * d - 8.0 * b2 * c[i] * c[i] * d;
        a * a
    }))
}

/// Shape of `Phi` as a quadratic in `beta^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiProfile {
    /// `Var(Gamma_bar_3 - 2 Gamma_bar_2) = Delta_2`.
    pub var_x: f64,
    /// `Var(Gamma_bar_2 - 2 Gamma_bar_1) = Delta_1`.
    pub var_y: f64,
    pub cov: f64,
    /// Minimiser `sqrt(cov / (2 var_y))`, clipped to 0 when `cov < 0`.
    pub beta_min: f64,
    pub phi_min: f64,
    /// The nonzero point with `Phi(beta0) = Phi(0)`.
    pub beta0: f64,
    pub negative_covariance: bool,
    /// `var_y = 0`: every eigenvalue is 1 and `Phi` vanishes identically.
    pub degenerate: bool,
}

pub fn phi_profile(spec: &EigenvalueSpec) -> PhiProfile {
    let var_x = delta(spec, 2).value;
    let var_y = delta(spec, 1).value;
    let cov = cov_32_21(spec);
    if var_y == 0.0 {
        return PhiProfile {
            var_x,
            var_y,
            cov,
            beta_min: 0.0,
            phi_min: var_x,
            beta0: 0.0,
            negative_covariance: false,
            degenerate: true,
        };
    }
    let negative_covariance = cov < 0.0;
    let (beta_min, beta0) = if negative_covariance {
        (0.0, 0.0)
    } else {
        ((cov / (2.0 * var_y)).sqrt(), (cov / var_y).sqrt())
    };
    PhiProfile {
        var_x,
        var_y,
        cov,
        beta_min,
        phi_min: phi(spec, beta_min),
        beta0,
        negative_covariance,
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psi2Value {
    pub value: f64,
    /// `var_x var_y - cov^2`, the Gram determinant of the pair.
    pub gram_det: f64,
}

/// `Var(beta1 X - 2 beta2 Y)` with `X = Gamma_bar_3 - 2 Gamma_bar_2`,
/// `Y = Gamma_bar_2 - 2 Gamma_bar_1`.
pub fn psi2(spec: &EigenvalueSpec, beta1: f64, beta2: f64) -> Psi2Value {
    let var_x = delta(spec, 2).value;
    let var_y = delta(spec, 1).value;
    let cov = cov_32_21(spec);
    Psi2Value {
        value: beta1 * beta1 * var_x - 4.0 * beta1 * beta2 * cov + 4.0 * beta2 * beta2 * var_y,
        gram_det: var_x * var_y - cov * cov,
    }
}

/// `Var(sum_r beta_r (Gamma_bar_r - 2 Gamma_bar_{r-1}))` over distinct orders
/// `r >= 1`, equal to `2 sum_i (c_i - 1)^2 (sum_r beta_r 2^r c_i^r)^2`.
pub fn psi_general(spec: &EigenvalueSpec, orders: &[u32], betas: &[f64]) -> Result<f64> {
    if orders.len() != betas.len() || orders.is_empty() {
        return Err(domain("psi_general: orders and betas must be nonempty and of equal length"));
    }
    if orders.contains(&0) {
        return Err(domain("psi_general: orders start at 1"));
    }
    let mut sorted = orders.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(domain("psi_general: orders must be distinct"));
    }
    let c = spec.coeffs();
    Ok(2.0
        * compensated_sum((0..spec.len()).map(|i| {
            let d = spec.deviation(i);
            let inner: f64 = orders
                .iter()
                .zip(betas)
                .map(|(&r, &b)| b * (2.0 * c[i]).powi(r as i32))
                .sum();
            d * d * inner * inner
        })))
}

/// `max(|kappa_3 - 8 nu|, |kappa_4 - 48 nu|)`.
pub fn discrepancy_m(spec: &EigenvalueSpec, nu: f64) -> Result<f64> {
    Ok(spec.cumulant_gap(3, nu)?.abs().max(spec.cumulant_gap(4, nu)?.abs()))
}

/// `|kappa_{r+2}/(r+1)! - 2 kappa_{r+1}/r!| = 2^{r+1} |sum c^{r+2} - sum c^{r+1}|`,
/// which vanishes for every Gamma law.
pub fn mean_gap(spec: &EigenvalueSpec, r: u32) -> Result<f64> {
    if r == 0 {
        return Err(domain("mean_gap: r must be >= 1"));
    }
    let diff = spec.power_sum_extended(r + 2) - spec.power_sum_extended(r + 1);
    Ok(2f64.powi(r as i32 + 1) * diff.to_f64().abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCheck {
    pub is_gamma: bool,
    pub reason: Option<String>,
    /// Eigenvalues that keep `F` away from `G(nu)`.
    pub offending: Vec<f64>,
    pub variance: f64,
    pub delta1: f64,
}

/// Decides `F ~ G(nu)` by testing `Var F = 2 nu` and `Delta_1 = 0`, the
/// latter on the scale `tol * Var(F)^2`.
pub fn is_centered_gamma(spec: &EigenvalueSpec, nu: f64, tol: f64) -> GammaCheck {
    let variance = spec.variance();
    let delta1 = delta(spec, 1).value;
    let mut offending: Vec<f64> = (0..spec.len())
        .filter(|&i| spec.deviation(i).abs() > tol.sqrt())
        .map(|i| spec.coeffs()[i])
        .collect();
    let reason = if !(nu > 0.0) {
        Some(format!("nu = {nu} is not positive"))
    } else if (variance - 2.0 * nu).abs() > tol * (2.0 * nu).max(1.0) {
        Some(format!("variance {variance} differs from 2 nu = {}", 2.0 * nu))
    } else if delta1 > tol * variance * variance {
        Some(format!("Delta_1 = {delta1:e} is not zero"))
    } else {
        None
    };
    if reason.is_some() && offending.is_empty() {
        if let Some(i) = (0..spec.len()).max_by(|&a, &b| {
            spec.deviation(a).abs().total_cmp(&spec.deviation(b).abs())
        }) {
            if spec.deviation(i) != 0.0 {
                offending.push(spec.coeffs()[i]);
            }
        }
    }
    GammaCheck { is_gamma: reason.is_none(), reason, offending, variance, delta1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSign {
    /// Every eigenvalue lies outside `(0, 1)`, so `A^4 - A^3` is positive semidefinite.
    Nonneg,
    /// Every eigenvalue lies in `[0, 1]`, so `A^4 - A^3` is negative semidefinite.
    Nonpos,
    Neither,
}

pub fn trace_sign(spec: &EigenvalueSpec) -> TraceSign {
    let inside = |i: usize| spec.coeffs()[i] > 0.0 && spec.deviation(i) < 0.0;
    let in_unit = |i: usize| spec.coeffs()[i] >= 0.0 && spec.deviation(i) <= 0.0;
    if (0..spec.len()).all(|i| !inside(i)) {
        TraceSign::Nonneg
    } else if (0..spec.len()).all(in_unit) {
        TraceSign::Nonpos
    } else {
        TraceSign::Neither
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceClassCheck {
    pub sign: TraceSign,
    /// `Delta_2`.
    pub lhs: f64,
    /// `72 (kappa_4 - 6 kappa_3)^2`.
    pub rhs: f64,
    pub holds: bool,
}

pub fn trace_class_bound_check(spec: &EigenvalueSpec) -> TraceClassCheck {
    let lhs = delta(spec, 2).value;
    // kappa_4 - 6 kappa_3 = 48 (S_4 - S_3)
    let k = (spec.power_sum_extended(4) - spec.power_sum_extended(3)).to_f64() * 48.0;
    let rhs = 72.0 * k * k;
    TraceClassCheck { sign: trace_sign(spec), lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) }
}

/// `sum c (c^3 - c^2)^2 / sum (c^3 - c^2)^2`; `None` when every eigenvalue is 1.
pub fn ratio_condition(spec: &EigenvalueSpec) -> Option<f64> {
    let c = spec.coeffs();
    let w: Vec<f64> = (0..spec.len())
        .map(|i| {
            let d = spec.deviation(i);
            c[i].powi(4) * d * d
        })
        .collect();
    let den = compensated_sum(w.iter().copied());
    if den == 0.0 {
        return None;
    }
    Some(compensated_sum(w.iter().zip(c).map(|(w, c)| w * c)) / den)
}

/// Eigenvalue multiset `{k/2} x l1` together with `{1} x l2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedGamma {
    pub k: f64,
    pub l1: usize,
    pub l2: usize,
}

/// Detects the mixed-Gamma shape. With no eigenvalue away from 1 the
/// convention is `l1 = 0`, `k = 2`.
pub fn mixed_gamma_detect(spec: &EigenvalueSpec, tol: f64) -> Option<MixedGamma> {
    let (ones, rest): (Vec<usize>, Vec<usize>) =
        (0..spec.len()).partition(|&i| spec.deviation(i).abs() <= tol);
    let l2 = ones.len();
    if rest.is_empty() {
        return Some(MixedGamma { k: 2.0, l1: 0, l2 });
    }
    let c = spec.coeffs();
    let v = c[rest[0]];
    if !(v > 0.0) || rest.iter().any(|&i| (c[i] - v).abs() > tol * v.max(1.0)) {
        return None;
    }
    Some(MixedGamma { k: 2.0 * v, l1: rest.len(), l2 })
}

/// `2 Delta_0^2` and `Phi(1) + B/2`, where
/// `B = sum_{i != j} (4c_i^2 - 4c_i)^2 (4c_j^2 - 4c_j)^2`.
pub fn phi_one_identity(spec: &EigenvalueSpec) -> (f64, f64) {
    let d0 = delta(spec, 0).value;
    let a: Vec<DoubleDouble> = (0..spec.len())
        .map(|i| {
            let d = DoubleDouble::from(spec.deviation(i));
            let c = spec.extended(i);
            (c * d * 4.0).powi(2)
        })
        .collect();
    let total = a.iter().fold(DoubleDouble::ZERO, |acc, x| acc + *x);
    let squares = a.iter().fold(DoubleDouble::ZERO, |acc, x| acc + *x * *x);
    let b = (total * total - squares).to_f64();
    (2.0 * d0 * d0, phi(spec, 1.0) + 0.5 * b)
}
