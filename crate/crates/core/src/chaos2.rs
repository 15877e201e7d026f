//! Elements of the second Wiener chaos, `F = sum_i c_i (N_i^2 - 1)`.
//!
//! A spec stores its eigenvalues in canonical order (nonincreasing `|c|`,
//! positive first on ties, zeros dropped). Each eigenvalue also carries a
//! low-order correction so that families built from square roots keep about
//! 32 significant digits; power sums are accumulated in double-double.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::{compensated_sum, factorial, DoubleDouble};
use crate::rng;
use crate::target::GammaTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EigenvalueSpec {
    coeffs: Vec<f64>,
    tails: Vec<f64>,
}

impl TryFrom<Vec<f64>> for EigenvalueSpec {
    type Error = crate::Error;
    fn try_from(raw: Vec<f64>) -> Result<Self> {
        Self::new(raw)
    }
}

impl From<EigenvalueSpec> for Vec<f64> {
    fn from(spec: EigenvalueSpec) -> Self {
        spec.coeffs
    }
}

/// Sorts into canonical order and drops zeros.
pub fn canonicalize(raw: &[f64]) -> Result<EigenvalueSpec> {
    EigenvalueSpec::new(raw.to_vec())
}

impl EigenvalueSpec {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        Self::from_extended(raw.into_iter().map(DoubleDouble::from).collect())
    }

    pub fn from_extended(raw: Vec<DoubleDouble>) -> Result<Self> {
        if let Some(bad) = raw.iter().find(|c| !c.to_f64().is_finite()) {
            return Err(domain(format!("eigenvalue {} is not finite", bad.to_f64())));
        }
        let mut kept: Vec<DoubleDouble> = raw.into_iter().filter(|c| c.hi != 0.0).collect();
        if kept.is_empty() {
            return Err(domain("a spec needs at least one nonzero eigenvalue"));
        }
        kept.sort_by(|a, b| {
            let (ma, mb) = (a.abs(), b.abs());
            mb.hi
                .total_cmp(&ma.hi)
                .then_with(|| mb.lo.total_cmp(&ma.lo))
                .then_with(|| (a.hi < 0.0).cmp(&(b.hi < 0.0)))
        });
        Ok(Self {
            coeffs: kept.iter().map(|c| c.hi).collect(),
            tails: kept.iter().map(|c| c.lo).collect(),
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn extended(&self, i: usize) -> DoubleDouble {
        DoubleDouble::new(self.coeffs[i], self.tails[i])
    }

    /// `c_i - 1` without losing the low-order part of `c_i`.
    pub fn deviation(&self, i: usize) -> f64 {
        (self.coeffs[i] - 1.0) + self.tails[i]
    }

    pub fn power_sum_extended(&self, p: u32) -> DoubleDouble {
        (0..self.len()).fold(DoubleDouble::ZERO, |acc, i| acc + self.extended(i).powi(p))
    }

    pub fn power_sum(&self, p: u32) -> f64 {
        self.power_sum_extended(p).to_f64()
    }

    /// `kappa_1 = 0` and `kappa_p = 2^{p-1} (p-1)! sum c_i^p`.
    pub fn cumulant(&self, p: u32) -> Result<f64> {
        match p {
            0 => Err(domain("cumulant order must be >= 1")),
            1 => Ok(0.0),
            _ => Ok(2f64.powi(p as i32 - 1) * factorial(p - 1) * self.power_sum(p)),
        }
    }

    /// `kappa_p(F) - kappa_p(G(nu))`, evaluated before rounding to f64.
    pub fn cumulant_gap(&self, p: u32, nu: f64) -> Result<f64> {
        GammaTarget::new(nu)?;
        match p {
            0 => Err(domain("cumulant order must be >= 1")),
            1 => Ok(0.0),
            _ => {
                let diff = self.power_sum_extended(p) - DoubleDouble::from(nu);
                Ok((diff * (2f64.powi(p as i32 - 1) * factorial(p - 1))).to_f64())
            }
        }
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.power_sum(2)
    }

    /// `omega = max_{i <= nu} |c_i - 1|`, `vartheta = max_{i > nu} |c_i|`,
    /// with missing eigenvalues read as zero.
    pub fn omega_vartheta(&self, nu: usize) -> Result<(f64, f64)> {
        if nu == 0 {
            return Err(domain("omega/vartheta need an integer nu >= 1"));
        }
        let omega = (0..nu)
            .map(|i| if i < self.len() { self.deviation(i).abs() } else { 1.0 })
            .fold(0.0, f64::max);
        let vartheta = self.coeffs.iter().skip(nu).map(|c| c.abs()).fold(0.0, f64::max);
        Ok((omega, vartheta))
    }

    /// `E exp(i t F) = prod_i e^{-i c_i t} (1 - 2 i c_i t)^{-1/2}`.
    pub fn charfn(&self, t: f64) -> Complex64 {
        let log_mod = compensated_sum(self.coeffs.iter().map(|c| -0.25 * (4.0 * c * c * t * t).ln_1p()));
        let phase = compensated_sum(self.coeffs.iter().map(|c| -c * t + 0.5 * (2.0 * c * t).atan()));
        Complex64::from_polar(log_mod.exp(), phase)
    }

    /// The same spec scaled to variance `2 nu`.
    pub fn rescaled(&self, nu: f64) -> Result<Self> {
        GammaTarget::new(nu)?;
        let s = (DoubleDouble::from(nu) / self.power_sum_extended(2)).sqrt();
        Self::from_extended((0..self.len()).map(|i| self.extended(i) * s).collect())
    }
}

/// One joint draw of `F` and the centered Gamma operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosSample {
    pub f: f64,
    /// `gamma_bar[r - 1]` is `Gamma_r(F) - E Gamma_r(F) = sum_i 2^r c_i^{r+1} (N_i^2 - 1)`.
    pub gamma_bar: Vec<f64>,
}

fn draw_block<T, G>(spec: &EigenvalueSpec, seed: u64, stream: u64, len: usize, mut emit: G) -> Vec<T>
where
    G: FnMut(&[f64]) -> T,
{
    let mut r = rng::stream_rng(seed, stream);
    let mut chi = vec![0.0; spec.len()];
    (0..len)
        .map(|_| {
            for x in chi.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut r);
                *x = z * z - 1.0;
            }
            emit(&chi)
        })
        .collect()
}

/// `m` draws of `F`.
pub fn sample_values(spec: &EigenvalueSpec, m: usize, seed: u64) -> Vec<f64> {
    let c = spec.coeffs();
    rng::blocks(m)
        .collect::<Vec<_>>()
        .into_par_iter()
        .flat_map_iter(|(stream, len)| {
            draw_block(spec, seed, stream, len, |chi| {
                c.iter().zip(chi).map(|(c, x)| c * x).sum::<f64>()
            })
        })
        .collect()
}

/// `m` joint draws of `F` and `Gamma_bar_1 .. Gamma_bar_{r_max}` from the
/// same Gaussian vector. The `f` fields coincide with [`sample_values`].
pub fn sample_joint(spec: &EigenvalueSpec, r_max: usize, m: usize, seed: u64) -> Vec<ChaosSample> {
    let c = spec.coeffs();
    // weights[r][i] = 2^r c_i^{r+1}
    let weights: Vec<Vec<f64>> = (1..=r_max)
        .map(|r| c.iter().map(|ci| 2f64.powi(r as i32) * ci.powi(r as i32 + 1)).collect())
        .collect();
    rng::blocks(m)
        .collect::<Vec<_>>()
        .into_par_iter()
        .flat_map_iter(|(stream, len)| {
            draw_block(spec, seed, stream, len, |chi| ChaosSample {
                f: c.iter().zip(chi).map(|(c, x)| c * x).sum::<f64>(),
                gamma_bar: weights
                    .iter()
                    .map(|w| w.iter().zip(chi).map(|(w, x)| w * x).sum::<f64>())
                    .collect(),
            })
        })
        .collect()
}

/// Parametric families used in rate experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Family {
    /// `(1 - a, -b)` with `a = 1/n`, `b = sqrt(1 - (1 - a)^2)`; variance 2.
    Toy2,
    /// `(1 - a, +b)`; variance 2.
    Toy3,
    /// `sqrt((n-1)/n)` and `n - 1` copies of `-1/sqrt(n(n-1))`; variance 2.
    Ustat,
    /// `(sqrt(1 + 1/n), sqrt(1 - 1/n))`; variance 4.
    Concrete,
    /// `sqrt(1 +- 1/n)`, `sqrt(1 - e)`, two copies of `sqrt(e/2)` with
    /// `e = n^{-(1+delta)}`; variance 6.
    Delta { delta: f64 },
}

impl Family {
    pub fn from_name(name: &str, delta: Option<f64>) -> Result<Self> {
        let fam = match name {
            "toy2" => Family::Toy2,
            "toy3" => Family::Toy3,
            "ustat" => Family::Ustat,
            "concrete" => Family::Concrete,
            "delta" => Family::Delta {
                delta: delta.ok_or_else(|| domain("family 'delta' needs a delta parameter"))?,
            },
            other => return Err(domain(format!("unknown family '{other}'"))),
        };
        if let Family::Delta { delta } = fam {
            if !(delta >= 0.0) || !delta.is_finite() {
                return Err(domain(format!("delta = {delta} must be finite and >= 0")));
            }
        }
        Ok(fam)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Toy2 => "toy2",
            Family::Toy3 => "toy3",
            Family::Ustat => "ustat",
            Family::Concrete => "concrete",
            Family::Delta { .. } => "delta",
        }
    }

    /// Degrees of freedom of the Gamma law the family approaches.
    pub fn target_nu(&self) -> f64 {
        match self {
            Family::Toy2 | Family::Toy3 | Family::Ustat => 1.0,
            Family::Concrete => 2.0,
            Family::Delta { .. } => 3.0,
        }
    }

    pub fn spec(&self, n: u64) -> Result<EigenvalueSpec> {
        if n < 2 {
            return Err(domain(format!("family {}: n = {n} must be >= 2", self.name())));
        }
        let one = DoubleDouble::ONE;
        let nf = n as f64;
        let inv_n = one / nf;
        let coeffs = match *self {
            Family::Toy2 | Family::Toy3 => {
                let lead = one - inv_n;
                let beta = (inv_n * (DoubleDouble::from(2.0) - inv_n)).sqrt();
                let sign = if matches!(self, Family::Toy2) { -1.0 } else { 1.0 };
                vec![lead, beta * sign]
            }
            Family::Ustat => {
                let lead = (DoubleDouble::from(nf - 1.0) / nf).sqrt();
                let rest = -(DoubleDouble::from(nf) * (nf - 1.0)).sqrt().recip();
                std::iter::once(lead).chain(std::iter::repeat(rest).take(n as usize - 1)).collect()
            }
            Family::Concrete => vec![(one + inv_n).sqrt(), (one - inv_n).sqrt()],
            Family::Delta { delta } => {
                let eps = DoubleDouble::from(nf.powf(-(1.0 + delta)));
                let small = (eps / 2.0).sqrt();
                vec![(one + inv_n).sqrt(), (one - inv_n).sqrt(), (one - eps).sqrt(), small, small]
            }
        };
        EigenvalueSpec::from_extended(coeffs)
    }
}

/// Convenience wrapper around [`Family::from_name`] and [`Family::spec`].
pub fn family(name: &str, n: u64, delta: Option<f64>) -> Result<EigenvalueSpec> {
    Family::from_name(name, delta)?.spec(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, Tolerance};
    use proptest::prelude::*;

    fn spec(c: &[f64]) -> EigenvalueSpec {
        EigenvalueSpec::new(c.to_vec()).unwrap()
    }

    #[test]
    fn canonical_order() {
        let s = spec(&[0.5, -2.0, 0.0, 2.0, -0.5]);
        assert_eq!(s.coeffs(), &[2.0, -2.0, 0.5, -0.5]);
        assert!(EigenvalueSpec::new(vec![0.0, 0.0]).is_err());
        assert!(EigenvalueSpec::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn serde_round_trip_is_canonical() {
        let s: EigenvalueSpec = serde_json::from_str("[0.5, 0, -3]").unwrap();
        assert_eq!(s.coeffs(), &[-3.0, 0.5]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, "[-3.0,0.5]");
        assert!(serde_json::from_str::<EigenvalueSpec>("[0]").is_err());
    }

    #[test]
    fn gamma_spec_cumulants() {
        let s = spec(&[1.0, 1.0]);
        assert_eq!(s.cumulant(3).unwrap(), 16.0);
        assert_eq!(s.cumulant(4).unwrap(), 96.0);
        assert_eq!(s.cumulant(1).unwrap(), 0.0);
        assert_eq!(s.variance(), 4.0);
    }

    #[test]
    fn concrete_fourth_cumulant_gap() {
        let s = family("concrete", 10, None).unwrap();
        assert!((s.cumulant_gap(4, 2.0).unwrap() - 0.96).abs() < 1e-14);
        let k3 = s.cumulant_gap(3, 2.0).unwrap();
        assert!((k3 - 0.0600).abs() < 1e-4, "{k3}");
        for &n in &[100u64, 1000, 100_000] {
            let gap = family("concrete", n, None).unwrap().cumulant_gap(4, 2.0).unwrap();
            let exact = 96.0 / (n as f64).powi(2);
            assert!((gap / exact - 1.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn family_variances() {
        for (name, nu) in [("toy2", 1.0), ("toy3", 1.0), ("ustat", 1.0), ("concrete", 2.0)] {
            for &n in &[2u64, 7, 100, 5000] {
                let s = family(name, n, None).unwrap();
                assert!((s.variance() - 2.0 * nu).abs() < 1e-14, "{name} n={n}");
            }
        }
        for &d in &[0.0, 0.5, 1.0] {
            let s = family("delta", 50, Some(d)).unwrap();
            assert!((s.variance() - 6.0).abs() < 1e-14);
            assert_eq!(s.len(), 5);
        }
        assert!(family("nope", 10, None).is_err());
        assert!(family("delta", 10, None).is_err());
        assert!(family("ustat", 1, None).is_err());
    }

    #[test]
    fn toy_signs() {
        let t2 = family("toy2", 4, None).unwrap();
        let t3 = family("toy3", 4, None).unwrap();
        assert_eq!(t2.coeffs()[0], 0.75);
        assert!(t2.coeffs()[1] < 0.0 && t3.coeffs()[1] > 0.0);
        assert!((t2.coeffs()[1].abs() - (1.0f64 - 0.5625).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn omega_vartheta_examples() {
        let s = spec(&[1.1, 0.9, 0.05]);
        let (w, v) = s.omega_vartheta(2).unwrap();
        assert!((w - 0.1).abs() < 1e-15);
        assert_eq!(v, 0.05);
        let (w1, v1) = spec(&[1.0]).omega_vartheta(2).unwrap();
        assert_eq!((w1, v1), (1.0, 0.0));
        assert!(s.omega_vartheta(0).is_err());
    }

    #[test]
    fn charfn_of_gamma_spec_is_target() {
        let s = spec(&[1.0, 1.0, 1.0]);
        let g = GammaTarget::new(3.0).unwrap();
        for &t in &[-3.0, -0.2, 0.0, 0.7, 5.0] {
            assert!((s.charfn(t) - g.charfn(t)).norm() < 1e-14);
        }
    }

    #[test]
    fn charfn_against_single_chi_square_integral() {
        // c (N^2 - 1) with c = -0.7: integrate against the chi-square(1) density.
        let c = -0.7;
        let s = spec(&[c]);
        let tol = Tolerance::new(1e-13, 1e-12);
        for &t in &[0.4, 1.9] {
            let dens = |u: f64| (-0.5 * u).exp() / (2.0 * std::f64::consts::PI * u).sqrt();
            let re = integrate(|u: f64| dens(u) * (t * c * (u - 1.0)).cos(), 0.0, f64::INFINITY, &tol).unwrap();
            let im = integrate(|u: f64| dens(u) * (t * c * (u - 1.0)).sin(), 0.0, f64::INFINITY, &tol).unwrap();
            let phi = s.charfn(t);
            assert!((phi.re - re.value).abs() < 1e-9 && (phi.im - im.value).abs() < 1e-9);
        }
    }

    #[test]
    fn joint_samples_share_f_with_plain_samples() {
        let s = spec(&[1.3, -0.4, 0.2]);
        let joint = sample_joint(&s, 2, 40_000, 5);
        let plain = sample_values(&s, 40_000, 5);
        assert!(joint.iter().zip(&plain).all(|(j, p)| j.f == *p));
        assert_eq!(joint[0].gamma_bar.len(), 2);
    }

    #[test]
    fn samples_are_identical_across_thread_counts() {
        let s = family("ustat", 20, None).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_values(&s, 70_000, 99));
        let b = four.install(|| sample_values(&s, 70_000, 99));
        assert_eq!(a, b);
    }

    #[test]
    fn rescale_hits_target_variance() {
        let s = spec(&[3.0, -1.0, 0.2]).rescaled(2.5).unwrap();
        assert!((s.variance() - 5.0).abs() < 1e-14);
    }

    fn arb_coeffs() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 1..12)
            .prop_filter("needs a nonzero entry", |v| v.iter().any(|c| *c != 0.0))
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent_and_order_free(mut c in arb_coeffs()) {
            let a = canonicalize(&c).unwrap();
            c.reverse();
            let b = canonicalize(&c).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(&canonicalize(a.coeffs()).unwrap(), &a);
        }

        #[test]
        fn cumulant_matches_independent_power_sum(c in arb_coeffs(), p in 2u32..9) {
            let s = canonicalize(&c).unwrap();
            let naive: f64 = c.iter().map(|x| x.powi(p as i32)).sum();
            let expected = 2f64.powi(p as i32 - 1) * factorial(p - 1) * naive;
            let scale = 2f64.powi(p as i32 - 1) * factorial(p - 1) * c.iter().map(|x| x.abs().powi(p as i32)).sum::<f64>();
            prop_assert!((s.cumulant(p).unwrap() - expected).abs() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn charfn_is_bounded(c in arb_coeffs(), t in -20.0f64..20.0) {
            let s = canonicalize(&c).unwrap();
            prop_assert!(s.charfn(t).norm() <= 1.0 + 1e-14);
        }
    }
}
