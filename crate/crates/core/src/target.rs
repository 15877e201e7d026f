//! The centered Gamma target `G(nu) = 2 Gamma(nu/2, 1) - nu`.

use num_complex::Complex64;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::{factorial, ln_gamma, reg_lower_gamma};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTarget {
    nu: f64,
}

/// Hölder data `|G(x+h) - G(x)| <= constant * |h|^exponent` for the target cdf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderData {
    pub exponent: f64,
    pub constant: f64,
}

impl GammaTarget {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(domain(format!("target: nu = {nu} must be positive and finite")));
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.nu
    }

    /// `kappa_1 = 0`, `kappa_p = 2^{p-1} (p-1)! nu` for `p >= 2`.
    pub fn cumulant(&self, p: u32) -> Result<f64> {
        match p {
            0 => Err(domain("target cumulant order must be >= 1")),
            1 => Ok(0.0),
            _ => Ok(2f64.powi(p as i32 - 1) * factorial(p - 1) * self.nu),
        }
    }

    /// Density of `G + nu = 2 Gamma(nu/2)` at `y`. Resolves points close to
    /// the lower support edge that `pdf(y - nu)` would round away.
    pub fn shifted_pdf(&self, y: f64) -> f64 {
        if !(y > 0.0) {
            return 0.0;
        }
        let h = 0.5 * self.nu;
        (-h * std::f64::consts::LN_2 - ln_gamma(h) + (h - 1.0) * y.ln() - 0.5 * y).exp()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.shifted_pdf(x + self.nu)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let y = x + self.nu;
        if !(y > 0.0) {
            return Ok(0.0);
        }
        reg_lower_gamma(0.5 * self.nu, 0.5 * y)
    }

    /// `e^{-i nu t} (1 - 2 i t)^{-nu/2}` on the principal branch, written
    /// out in modulus and argument.
    pub fn charfn(&self, t: f64) -> Complex64 {
        let modulus = (1.0 + 4.0 * t * t).powf(-0.25 * self.nu);
        let phase = -self.nu * t + 0.5 * self.nu * (2.0 * t).atan();
        Complex64::from_polar(modulus, phase)
    }

    /// `m` iid draws; the same `seed` always gives the same vector.
    pub fn sample(&self, m: usize, seed: u64) -> Vec<f64> {
        let gamma = Gamma::new(0.5 * self.nu, 1.0).expect("shape checked in new");
        let nu = self.nu;
        rng::blocks(m)
            .collect::<Vec<_>>()
            .into_par_iter()
            .flat_map_iter(|(stream, len)| {
                let mut r = rng::stream_rng(seed, stream);
                (0..len).map(move |_| 2.0 * gamma.sample(&mut r) - nu).collect::<Vec<_>>()
            })
            .collect()
    }

    /// Hölder exponent and constant of the cdf.
    ///
    /// For `nu >= 2` the density is bounded by its value at the mode `-2`.
    /// For `nu < 2` the density is decreasing, so the steepest increment sits
    /// at the left end of the support:
    /// `G(-nu + h) <= 2^{-nu/2} / Gamma(nu/2) * h^{nu/2} / (nu/2)`.
    pub fn holder(&self) -> HolderData {
        let nu = self.nu;
        if nu == 2.0 {
            HolderData { exponent: 1.0, constant: 0.5 }
        } else if nu > 2.0 {
            HolderData { exponent: 1.0, constant: self.pdf(-2.0) }
        } else {
            let constant = (2f64.ln() * (1.0 - 0.5 * nu) - nu.ln() - ln_gamma(0.5 * nu)).exp();
            HolderData { exponent: 0.5 * nu, constant }
        }
    }
}
