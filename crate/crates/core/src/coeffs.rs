//! Combinatorial coefficients `c_q(r_1, .., r_s)` in the chaos expansion of
//! iterated Gamma operators for an element of the `q`-th chaos.
//!
//! Two recursions are provided. They share every factor except the first:
//! `c_q` uses `s q - 2 (r_1 + .. + r_{s-1})`, while `c_alt` uses `q`. On the
//! second chaos every admissible tuple makes the two factors equal.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::chaos2::EigenvalueSpec;
use crate::error::{domain, Error, Result};

pub const MAX_Q: u32 = 5;
pub const MAX_S: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexTuple {
    pub q: u32,
    pub rs: Vec<u32>,
}

impl IndexTuple {
    pub fn new(q: u32, rs: Vec<u32>) -> Self {
        Self { q, rs }
    }

    /// Every `1 <= r_k <= min(kq - 2(r_1 + .. + r_{k-1}), q)` and every
    /// partial sum `r_1 + .. + r_j < (j+1) q / 2` for `j < s`.
    pub fn is_admissible(&self) -> bool {
        let q = self.q as i64;
        if q < 1 || self.rs.is_empty() {
            return false;
        }
        let mut prefix = 0i64;
        for (k, &r) in self.rs.iter().enumerate() {
            let k1 = k as i64 + 1;
            let r = r as i64;
            if r < 1 || r > (k1 * q - 2 * prefix).min(q) {
                return false;
            }
            if k1 < self.rs.len() as i64 && 2 * (prefix + r) >= (k1 + 1) * q {
                return false;
            }
            prefix += r;
        }
        true
    }
}

/// A coefficient value, or an exclusion marker for inadmissible tuples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    pub excluded: bool,
}

fn binom(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

fn fact(n: u128) -> Option<u128> {
    (1..=n).try_fold(1u128, |acc, k| acc.checked_mul(k))
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Variant {
    New,
    Alt,
}

fn cache() -> &'static Mutex<HashMap<(Variant, IndexTuple), u128>> {
    static CACHE: OnceLock<Mutex<HashMap<(Variant, IndexTuple), u128>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn overflow() -> Error {
    Error::Numeric { routine: "coefficient", estimate: f64::INFINITY, error: f64::INFINITY }
}

fn exact(variant: Variant, q: u32, rs: &[u32]) -> Result<u128> {
    let key = (variant, IndexTuple::new(q, rs.to_vec()));
    if let Some(&v) = cache().lock().expect("cache poisoned").get(&key) {
        return Ok(v);
    }
    let (qq, s) = (q as u128, rs.len() as u128);
    let last = *rs.last().expect("nonempty") as u128;
    let value = if rs.len() == 1 {
        let b = binom(qq - 1, last - 1).ok_or_else(overflow)?;
        qq.checked_mul(fact(last - 1).ok_or_else(overflow)?)
            .and_then(|v| v.checked_mul(b))
            .and_then(|v| v.checked_mul(b))
            .ok_or_else(overflow)?
    } else {
        let prefix: u128 = rs[..rs.len() - 1].iter().map(|&r| r as u128).sum();
        let top = s * qq - 2 * prefix;
        let lead = match variant {
            Variant::New => top,
            Variant::Alt => qq,
        };
        let prev = exact(variant, q, &rs[..rs.len() - 1])?;
        [
            fact(last - 1),
            binom(top - 1, last - 1),
            binom(qq - 1, last - 1),
            Some(prev),
        ]
        .into_iter()
        .try_fold(lead, |acc, f| acc.checked_mul(f?))
        .ok_or_else(overflow)?
    };
    cache().lock().expect("cache poisoned").insert(key, value);
    Ok(value)
}

fn evaluate(variant: Variant, tuple: &IndexTuple) -> Result<Coefficient> {
    if tuple.q == 0 || tuple.q > MAX_Q || tuple.rs.len() > MAX_S {
        return Err(domain(format!(
            "coefficients are tabulated for 1 <= q <= {MAX_Q} and s <= {MAX_S}"
        )));
    }
    if !tuple.is_admissible() {
        return Ok(Coefficient { value: 0.0, excluded: true });
    }
    Ok(Coefficient { value: exact(variant, tuple.q, &tuple.rs)? as f64, excluded: false })
}

/// `c_q(r_1) = q (r_1 - 1)! C(q-1, r_1-1)^2` and
/// `c_q(r_1..r_s) = (sq - 2 sum_{k<s} r_k) (r_s - 1)! C(sq - 2 sum_{k<s} r_k - 1, r_s - 1) C(q-1, r_s-1) c_q(r_1..r_{s-1})`.
pub fn c_new(tuple: &IndexTuple) -> Result<Coefficient> {
    evaluate(Variant::New, tuple)
}

/// As [`c_new`] with leading factor `q`.
pub fn c_alt(tuple: &IndexTuple) -> Result<Coefficient> {
    evaluate(Variant::Alt, tuple)
}

/// All admissible tuples of length `s` in lexicographic order.
pub fn enumerate_admissible(q: u32, s: usize) -> Result<Vec<IndexTuple>> {
    if q == 0 || q > MAX_Q || s == 0 || s > MAX_S {
        return Err(domain(format!(
            "enumeration is capped at 1 <= q <= {MAX_Q}, 1 <= s <= {MAX_S}"
        )));
    }
    fn extend(q: u32, s: usize, prefix: &mut Vec<u32>, out: &mut Vec<IndexTuple>) {
        if prefix.len() == s {
            out.push(IndexTuple::new(q, prefix.clone()));
            return;
        }
        let k = prefix.len() as i64 + 1;
        let sum: i64 = prefix.iter().map(|&r| r as i64).sum();
        let hi = (k * q as i64 - 2 * sum).min(q as i64);
        for r in 1..=hi {
            if (k as usize) < s && 2 * (sum + r) >= (k + 1) * q as i64 {
                continue;
            }
            prefix.push(r as u32);
            extend(q, s, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(q, s, &mut Vec::new(), &mut out);
    Ok(out)
}

/// First admissible tuple with `s <= s_max` on which the two recursions
/// disagree, or `None`.
pub fn equality_witness(q: u32, s_max: usize) -> Result<Option<IndexTuple>> {
    for s in 1..=s_max {
        for t in enumerate_admissible(q, s)? {
            if c_new(&t)?.value != c_alt(&t)?.value {
                return Ok(Some(t));
            }
        }
    }
    Ok(None)
}

/// Whether the two recursions agree on the second chaos up to `s_max`.
pub fn verify_q2_equality(s_max: usize) -> Result<bool> {
    Ok(equality_witness(2, s_max)?.is_none())
}

/// `Var(Gamma_1(F))` on the second chaos, two ways: `kappa_4 / 3!`, and
/// `kappa_4 / 3 - 8 sum c^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

pub fn gamma3_identity_check(spec: &EigenvalueSpec) -> Result<IdentityCheck> {
    let k4 = spec.cumulant(4)?;
    let lhs = k4 / 6.0;
    let rhs = k4 / 3.0 - 8.0 * spec.power_sum(4);
    let ok = (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs());
    Ok(IdentityCheck { lhs, rhs, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(q: u32, rs: &[u32]) -> IndexTuple {
        IndexTuple::new(q, rs.to_vec())
    }

    #[test]
    fn worked_values() {
        assert_eq!(c_new(&t(2, &[1])).unwrap().value, 2.0);
        assert_eq!(c_new(&t(2, &[2])).unwrap().value, 2.0);
        assert_eq!(c_new(&t(2, &[1, 2])).unwrap().value, 4.0);
        assert_eq!(c_alt(&t(2, &[1, 2])).unwrap().value, 4.0);
        assert_eq!(c_new(&t(3, &[1, 1])).unwrap().value, 12.0);
        assert_eq!(c_alt(&t(3, &[1, 1])).unwrap().value, 9.0);
    }

    #[test]
    fn inadmissible_is_excluded() {
        let c = c_new(&t(2, &[2, 1])).unwrap();
        assert!(c.excluded);
        assert_eq!(c.value, 0.0);
        assert!(c_new(&t(6, &[1])).is_err());
        assert!(c_new(&t(2, &[1; 7])).is_err());
    }

    #[test]
    fn q2_s3_enumeration() {
        let all = enumerate_admissible(2, 3).unwrap();
        assert_eq!(all, vec![t(2, &[1, 1, 1]), t(2, &[1, 1, 2])]);
    }

    #[test]
    fn q2_sizes_flat_after_two() {
        let sizes: Vec<usize> = (1..=6).map(|s| enumerate_admissible(2, s).unwrap().len()).collect();
        assert_eq!(sizes[0], 2);
        assert!(sizes.windows(2).skip(1).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn equality_and_witness() {
        assert!(verify_q2_equality(5).unwrap());
        assert!(verify_q2_equality(6).unwrap());
        let w = equality_witness(3, 2).unwrap().expect("a q = 3 witness");
        assert!(w.is_admissible());
        assert_ne!(c_new(&w).unwrap().value, c_alt(&w).unwrap().value);
    }

    #[test]
    fn chain_tuples_carry_powers_of_two() {
        // (1, .., 1) with s ones weighs 2^s; (1, .., 1, 2) is the constant term
        // 2^s sum c^{s+1} = kappa_{s+1} / s!.
        let spec = EigenvalueSpec::new(vec![1.3, -0.4, 0.7]).unwrap();
        for s in 1..=MAX_S {
            let ones = t(2, &vec![1; s]);
            assert_eq!(c_new(&ones).unwrap().value, 2f64.powi(s as i32));
            let mut tail = vec![1; s - 1];
            tail.push(2);
            let c = c_new(&t(2, &tail)).unwrap().value;
            let k = spec.cumulant(s as u32 + 1).unwrap() / crate::numerics::factorial(s as u32);
            assert!((c * spec.power_sum(s as u32 + 1) - k).abs() <= 1e-12 * k.abs());
        }
    }

    #[test]
    fn gamma3_identity_example() {
        let spec = EigenvalueSpec::new(vec![1.3, -0.4, 0.7]).unwrap();
        assert!(gamma3_identity_check(&spec).unwrap().ok);
    }

    proptest! {
        #[test]
        fn enumeration_is_sorted_unique_and_admissible(q in 1u32..=MAX_Q, s in 1usize..=MAX_S) {
            let all = enumerate_admissible(q, s).unwrap();
            prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
            for tup in &all {
                prop_assert!(tup.is_admissible());
                let c = c_new(tup).unwrap();
                prop_assert!(!c.excluded && c.value > 0.0);
            }
        }

        #[test]
        fn brute_force_enumeration_agrees(q in 1u32..=4, s in 1usize..=4) {
            // Every tuple in [1, q]^s filtered by the predicate.
            let mut brute = Vec::new();
            let total = (q as usize).pow(s as u32);
            for code in 0..total {
                let mut rs = Vec::with_capacity(s);
                let mut x = code;
                for _ in 0..s {
                    rs.push((x % q as usize) as u32 + 1);
                    x /= q as usize;
                }
                rs.reverse();
                let tup = IndexTuple::new(q, rs);
                if tup.is_admissible() {
                    brute.push(tup);
                }
            }
            brute.sort();
            prop_assert_eq!(brute, enumerate_admissible(q, s).unwrap());
        }
    }
}
