//! Numerical distances: total variation for two-eigenvalue laws by
//! quadrature, Kolmogorov distance and cumulants by Monte Carlo.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos2::{sample_values, EigenvalueSpec};
use crate::error::{domain, Result};
use crate::numerics::{compensated_sum, find_root, integrate, kummer_m_scaled, Tolerance};
use crate::target::GammaTarget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    Quadrature,
    MonteCarlo,
}

/// A distance value with the uncertainty matching its method: a
/// deterministic `error_bound` for quadrature, a `std_error` for Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub method: DistanceMethod,
    pub error_bound: Option<f64>,
    pub std_error: Option<f64>,
}

impl DistanceEstimate {
    fn quadrature(value: f64, error_bound: f64) -> Self {
        Self { value, method: DistanceMethod::Quadrature, error_bound: Some(error_bound), std_error: None }
    }

    fn monte_carlo(value: f64, std_error: f64) -> Self {
        Self { value, method: DistanceMethod::MonteCarlo, error_bound: None, std_error: Some(std_error) }
    }
}

fn check_pair(c1: f64, c2: f64) -> Result<()> {
    if !(c1 > 0.0 && c2 > 0.0) || !c1.is_finite() || !c2.is_finite() {
        return Err(domain(format!("two-eigenvalue density needs c1, c2 > 0; got ({c1}, {c2})")));
    }
    Ok(())
}

/// Density of `c1 (N_1^2 - 1) + c2 (N_2^2 - 1)` at `x`.
///
/// With `y = x + c1 + c2`, `big >= small` the two eigenvalues and
/// `z = (big - small) y / (2 big small)`, the density is
/// `exp(-y / (2 big)) * e^{-z} M(1/2, 1, z) / (2 sqrt(c1 c2))`.
pub fn density_two_eig(c1: f64, c2: f64, x: f64) -> Result<f64> {
    check_pair(c1, c2)?;
    let y = x + c1 + c2;
    if !(y >= 0.0) {
        return Ok(0.0);
    }
    let (big, small) = if c1 >= c2 { (c1, c2) } else { (c2, c1) };
    let z = (big - small) * y / (2.0 * big * small);
    let scaled = kummer_m_scaled(0.5, 1.0, z)?;
    Ok((-y / (2.0 * big)).exp() * scaled / (2.0 * (c1 * c2).sqrt()))
}

/// Total variation distance between the two-eigenvalue law and `G(2)`,
/// `(1/2) int |phi - psi|`.
///
/// The line is cut at both support edges and at every crossing of the two
/// densities, so each piece integrates a smooth function of constant sign.
pub fn dtv_two_eig(c1: f64, c2: f64) -> Result<DistanceEstimate> {
    check_pair(c1, c2)?;
    let target = GammaTarget::new(2.0)?;
    let phi = |x: f64| density_two_eig(c1, c2, x).unwrap_or(f64::NAN);
    let diff = |x: f64| phi(x) - target.pdf(x);

    let big = c1.max(c2);
    let pref = 1.0 / (2.0 * (c1 * c2).sqrt());
    let tail_eps: f64 = 1e-17;
    // Tail masses: psi beyond X is e^{-(X+2)/2}; phi beyond X is at most
    // 2 big pref e^{-(X + c1 + c2) / (2 big)}.
    let x_psi = -2.0 + 2.0 * (1.0 / tail_eps).ln();
    let x_phi = -(c1 + c2) + 2.0 * big * (2.0 * big * pref / tail_eps).ln().max(0.0);
    let upper = x_psi.max(x_phi);
    let truncation = (-(upper + 2.0) / 2.0).exp() + 2.0 * big * pref * (-(upper + c1 + c2) / (2.0 * big)).exp();

    let (e1, e2) = (f64::min(-2.0, -(c1 + c2)), f64::max(-2.0, -(c1 + c2)));
    let mut cuts = vec![e1];
    if e2 > e1 {
        cuts.push(e2);
    }
    let tol = Tolerance::new(1e-15, 1e-15);
    let grid = 4000;
    let start = e2;
    let h = (upper - start) / grid as f64;
    let mut prev_x = start + 1e-12 * h;
    let mut prev = diff(prev_x);
    for i in 1..=grid {
        let x = start + i as f64 * h;
        let cur = diff(x);
        if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
            cuts.push(find_root(diff, prev_x, x, &tol)?);
        }
        prev_x = x;
        prev = cur;
    }
    cuts.push(upper);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let quad_tol = Tolerance::new(1e-16, 1e-13);
    let pieces: Vec<(f64, f64)> = cuts
        .windows(2)
        .map(|w| integrate(diff, w[0], w[1], &quad_tol).map(|q| (q.value.abs(), q.error)))
        .collect::<Result<_>>()?;
    let total = compensated_sum(pieces.iter().map(|p| p.0));
    let err = compensated_sum(pieces.iter().map(|p| p.1));
    Ok(DistanceEstimate::quadrature(0.5 * total, 0.5 * (err + truncation)))
}

/// Total variation distance for a spec with exactly two positive eigenvalues.
pub fn dtv_spec(spec: &EigenvalueSpec) -> Result<DistanceEstimate> {
    match spec.coeffs() {
        [a, b] if *a > 0.0 && *b > 0.0 => dtv_two_eig(*a, *b),
        _ => Err(domain("total variation by quadrature needs exactly two positive eigenvalues")),
    }
}

/// `sup_x |F_m(x) - G(x)|` over `m` draws of `F`, with the one-sided
/// jumps on both sides of each order statistic.
pub fn mc_kolmogorov(spec: &EigenvalueSpec, nu: f64, m: usize, seed: u64) -> Result<DistanceEstimate> {
    if m < 1000 {
        return Err(domain(format!("Monte Carlo Kolmogorov distance needs m >= 1000; got {m}")));
    }
    let target = GammaTarget::new(nu)?;
    let mut xs = sample_values(spec, m, seed);
    xs.par_sort_unstable_by(f64::total_cmp);
    let mf = m as f64;
    let sup = xs
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = target.cdf(x)?;
            Ok(((i + 1) as f64 / mf - g).abs().max((g - i as f64 / mf).abs()))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(DistanceEstimate::monte_carlo(sup, 1.0 / (2.0 * mf.sqrt())))
}

/// Unbiased cumulant estimates `k_1 .. k_{p_max}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantTable {
    pub n: usize,
    /// `values[p - 1] = k_p`.
    pub values: Vec<f64>,
}

impl CumulantTable {
    pub fn k(&self, p: usize) -> f64 {
        self.values[p - 1]
    }
}

pub fn empirical_cumulants(samples: &[f64], p_max: usize) -> Result<CumulantTable> {
    if !(1..=4).contains(&p_max) {
        return Err(domain(format!("k-statistics are provided up to order 4; asked for {p_max}")));
    }
    let n = samples.len();
    if n <= p_max {
        return Err(domain(format!("need more than {p_max} samples; got {n}")));
    }
    let nf = n as f64;
    let mean = compensated_sum(samples.iter().copied()) / nf;
    let moment = |p: i32| compensated_sum(samples.iter().map(|x| (x - mean).powi(p))) / nf;
    let (m2, m3, m4) = (moment(2), moment(3), moment(4));
    let all = [
        mean,
        nf / (nf - 1.0) * m2,
        nf * nf / ((nf - 1.0) * (nf - 2.0)) * m3,
        nf * nf * ((nf + 1.0) * m4 - 3.0 * (nf - 1.0) * m2 * m2) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0)),
    ];
    Ok(CumulantTable { n, values: all[..p_max].to_vec() })
}

/// Sampling variance of the k-statistic `k_p` (`p <= 4`) from `n` draws of
/// a law whose cumulants are `kappa[0] = kappa_1, ..., kappa[7] = kappa_8`.
pub fn k_statistic_variance(kappa: &[f64; 8], p: usize, n: usize) -> Result<f64> {
    let k = |i: usize| kappa[i - 1];
    let nf = n as f64;
    if n <= p {
        return Err(domain("k-statistic variance needs n > p"));
    }
    Ok(match p {
        1 => k(2) / nf,
        2 => k(4) / nf + 2.0 * k(2) * k(2) / (nf - 1.0),
        3 => {
            k(6) / nf
                + 9.0 * k(2) * k(4) / (nf - 1.0)
                + 9.0 * k(3) * k(3) / (nf - 1.0)
                + 6.0 * nf * k(2).powi(3) / ((nf - 1.0) * (nf - 2.0))
        }
        4 => {
            k(8) / nf
                + 16.0 * k(2) * k(6) / (nf - 1.0)
                + 48.0 * k(3) * k(5) / (nf - 1.0)
                + 34.0 * k(4) * k(4) / (nf - 1.0)
                + 72.0 * nf * k(2) * k(2) * k(4) / ((nf - 1.0) * (nf - 2.0))
                + 144.0 * nf * k(2) * k(3) * k(3) / ((nf - 1.0) * (nf - 2.0))
                + 24.0 * nf * (nf + 1.0) * k(2).powi(4) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0))
        }
        _ => return Err(domain("k-statistic variance is provided up to order 4")),
    })
}
