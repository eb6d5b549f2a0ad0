//! Exact Binomial(r, 1/2) probabilities in log space, standardized survival
//! functions, two-sided p-values, and large-r sampling.
//!
//! All tail quantities use strict inequalities and are accumulated from the
//! extreme outcome inward with compensated (Kahan) summation.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::RngStream;

const LN_2: f64 = std::f64::consts::LN_2;

/// `log P(Bin(r, 1/2) = z) = log C(r, z) - r log 2`.
pub fn log_pmf(r: u64, z: u64) -> Result<f64> {
    if z > r {
        return Err(Error::domain(format!("z={z} outside 0..={r}")));
    }
    let r_f = r as f64;
    let z_f = z as f64;
    Ok(ln_gamma(r_f + 1.0) - ln_gamma(z_f + 1.0) - ln_gamma(r_f - z_f + 1.0) - r_f * LN_2)
}

/// Relative tolerance used to decide whether a threshold `t` hits an
/// achievable standardized value exactly.
const SNAP_TOL: f64 = 1e-9;

/// Cached null kernel for a fixed number of trials `r`.
///
/// Holds the lower-tail CDF of `Bin(r, 1/2)` up to the center, which is all
/// that two-sided quantities need by symmetry. Construction is O(r); lookups
/// are O(1). Immutable after construction, safe to share across threads.
#[derive(Debug, Clone)]
pub struct BinomialHalfKernel {
    r: u64,
    /// `lower[i] = P(B <= i)` for `i = 0..=floor(r/2)`, summed from z = 0 inward.
    lower: Vec<f64>,
}

impl BinomialHalfKernel {
    pub fn new(r: u64) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("r must be at least 1"));
        }
        let half = (r / 2) as usize;
        let mut lower = Vec::with_capacity(half + 1);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for z in 0..=half as u64 {
            let term = log_pmf(r, z)?.exp();
            // Kahan step.
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            lower.push(sum);
        }
        Ok(Self { r, lower })
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    /// `P(B <= i)` for `i <= floor(r/2)`.
    fn lower_cdf(&self, i: i64) -> f64 {
        if i < 0 {
            0.0
        } else {
            self.lower[i as usize]
        }
    }

    /// Distinct values of `|z - r/2| / sqrt(r/4)`, ascending.
    pub fn achievable_values(&self) -> Vec<f64> {
        let sqrt_r = (self.r as f64).sqrt();
        (0..=self.r / 2)
            .rev()
            .map(|z| (self.r - 2 * z) as f64 / sqrt_r)
            .collect()
    }

    /// `P(|B - r/2| / sqrt(r/4) > t)` with strict inequality.
    pub fn standardized_survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        let r = self.r as f64;
        // The tail outcome z (z < r/2) is counted iff r - 2z > t * sqrt(r).
        let x = t * r.sqrt();
        let w = r - x;
        let zt = if (w - w.round()).abs() <= SNAP_TOL * (1.0 + x) {
            // t sits on an achievable value: strict comparison excludes it.
            (w.round() as i64 - 1).div_euclid(2)
        } else {
            (w / 2.0).floor() as i64
        };
        let half = (self.r / 2) as i64;
        let zt = zt.min(if self.r % 2 == 0 { half - 1 } else { half });
        // ln_gamma carries ~1e-14 absolute error into the CDF; keep the
        // result a probability.
        (2.0 * self.lower_cdf(zt)).min(1.0)
    }

    /// `P(|2B - r| >= m)` for `m` of the same parity as `r`. Exact: the
    /// inclusive bound maps to the lower tail at `z = (r - m) / 2`.
    pub fn center_deviation_tail(&self, m: u64) -> f64 {
        if m == 0 {
            1.0
        } else if m > self.r {
            0.0
        } else {
            (2.0 * self.lower_cdf(((self.r - m) / 2) as i64)).min(1.0)
        }
    }

    /// `P(|B - r/2| > |z - r/2|)`, the exact two-sided p-value of outcome `z`.
    pub fn two_sided_pvalue(&self, z: u64) -> Result<f64> {
        if z > self.r {
            return Err(Error::domain(format!("z={z} outside 0..={}", self.r)));
        }
        let z_prime = z.min(self.r - z) as i64;
        Ok((2.0 * self.lower_cdf(z_prime - 1)).min(1.0))
    }
}

/// One-shot `P(|Bin(r,1/2) - r/2| / sqrt(r/4) > t)`. Builds a kernel; use
/// [`BinomialHalfKernel`] directly when evaluating many thresholds.
pub fn standardized_survival(r: u64, t: f64) -> Result<f64> {
    Ok(BinomialHalfKernel::new(r)?.standardized_survival(t))
}

/// One-shot exact two-sided p-value of outcome `z` under `Bin(r, 1/2)`.
pub fn two_sided_pvalue(r: u64, z: u64) -> Result<f64> {
    BinomialHalfKernel::new(r)?.two_sided_pvalue(z)
}

/// Exact draw from `Bin(r, 1/2)`; O(1) expected time for large `r`.
pub fn sample_binomial_half(r: u64, rng: &mut RngStream) -> u64 {
    if r == 1 {
        return rng.gen::<bool>() as u64;
    }
    Binomial::new(r, 0.5).expect("valid binomial parameters").sample(rng)
}
