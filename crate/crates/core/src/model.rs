//! Binary regression model: symmetric link functions, the k-sparse
//! Rademacher prior, and response simulation.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design::BinaryDesign;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A symmetric link: a CDF with `theta(z) + theta(-z) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkFunction {
    /// `theta(z) = 1 / (1 + exp(-z))`
    Logistic,
    /// Standard normal CDF.
    Probit,
    /// CDF of U(-1/2, 1/2): `theta(z) = z + 1/2` clamped to [0, 1].
    Uniform,
}

impl LinkFunction {
    pub fn evaluate(self, z: f64) -> f64 {
        match self {
            LinkFunction::Logistic => {
                // Stable in both tails.
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            LinkFunction::Probit => Normal::standard().cdf(z),
            LinkFunction::Uniform => (z + 0.5).clamp(0.0, 1.0),
        }
    }

    /// `theta'(0)`.
    pub fn derivative_at_zero(self) -> f64 {
        match self {
            LinkFunction::Logistic => 0.25,
            LinkFunction::Probit => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            LinkFunction::Uniform => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Logistic => "logistic",
            LinkFunction::Probit => "probit",
            LinkFunction::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for LinkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LinkFunction::Logistic),
            "probit" => Ok(LinkFunction::Probit),
            "uniform" => Ok(LinkFunction::Uniform),
            other => Err(Error::invalid(format!("unknown link function '{other}'"))),
        }
    }
}

/// Sign structure of the alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    /// Independent fair Rademacher sign per nonzero coordinate.
    TwoSided,
    /// A single shared Rademacher sign.
    OneSided,
}

/// The k-sparse +/-A prior: support uniform over k-subsets of `{1..p}`,
/// signs Rademacher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseSignalPrior {
    pub p: usize,
    pub k: usize,
    pub signal_strength: f64,
    pub sidedness: Sidedness,
}

impl SparseSignalPrior {
    pub fn new(p: usize, k: usize, signal_strength: f64, sidedness: Sidedness) -> Result<Self> {
        if p == 0 || k == 0 {
            return Err(Error::invalid("p and k must be positive"));
        }
        if k > p {
            return Err(Error::invalid(format!("sparsity k={k} exceeds dimension p={p}")));
        }
        if signal_strength < 0.0 {
            return Err(Error::invalid("signal strength must be nonnegative"));
        }
        Ok(Self { p, k, signal_strength, sidedness })
    }
}

/// A sampled coefficient vector, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub p: usize,
    /// Sorted support columns (0-based) with their signed values.
    pub entries: Vec<(usize, f64)>,
}

impl Coefficients {
    pub fn zero(p: usize) -> Self {
        Self { p, entries: Vec::new() }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.p];
        for &(j, v) in &self.entries {
            beta[j] = v;
        }
        beta
    }
}

/// Draw a coefficient vector from the prior.
pub fn sample_prior(prior: &SparseSignalPrior, rng: &mut RngStream) -> Coefficients {
    let mut support = sample(rng, prior.p, prior.k).into_vec();
    support.sort_unstable();
    let shared_sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let entries = support
        .into_iter()
        .map(|j| {
            let sign = match prior.sidedness {
                Sidedness::TwoSided => {
                    if rng.gen::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Sidedness::OneSided => shared_sign,
            };
            (j, sign * prior.signal_strength)
        })
        .collect();
    Coefficients { p: prior.p, entries }
}

/// Binary response vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseVector(pub Vec<u8>);

impl ResponseVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Simulate `y_i ~ Bernoulli(theta(x_i' beta))` independently per row.
pub fn simulate_response(
    design: &BinaryDesign,
    beta: &Coefficients,
    link: LinkFunction,
    rng: &mut RngStream,
) -> Result<ResponseVector> {
    if beta.p != design.p() {
        return Err(Error::invalid(format!(
            "coefficient dimension {} does not match design p={}",
            beta.p,
            design.p()
        )));
    }
    let dense = beta.to_dense();
    let mut y = Vec::with_capacity(design.n());
    for row in design.rows() {
        let xb: f64 = row.iter().map(|&j| dense[j as usize]).sum();
        let prob = link.evaluate(xb);
        y.push(u8::from(rng.gen::<f64>() < prob));
    }
    Ok(ResponseVector(y))
}

/// The binomial-proportion shift `Delta = theta(A) - 1/2` induced by a signal
/// of strength `A` under the given link.
pub fn binomial_proportion_shift(signal_strength: f64, link: LinkFunction) -> f64 {
    link.evaluate(signal_strength) - 0.5
}

/// Sparsity regime of an alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Dense,
    Sparse,
}

/// Relates the sparsity exponent `alpha` and the signal count `k = p^(1-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub p: usize,
    pub k: usize,
    pub alpha: f64,
    pub regime: Regime,
}

impl RegimeSpec {
    pub fn from_alpha(p: usize, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || alpha <= 0.0 {
            return Err(Error::invalid(format!("alpha={alpha} must lie in (0, 1]")));
        }
        if p < 2 {
            return Err(Error::invalid("p must be at least 2"));
        }
        let k = ((p as f64).powf(1.0 - alpha).round() as usize).max(1);
        Ok(Self { p, k, alpha, regime: Self::classify(alpha) })
    }

    pub fn from_k(p: usize, k: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid("p must be at least 2"));
        }
        if k == 0 || k > p {
            return Err(Error::invalid(format!("k={k} must lie in [1, p={p}]")));
        }
        let alpha = 1.0 - (k as f64).ln() / (p as f64).ln();
        Ok(Self { p, k, alpha, regime: Self::classify(alpha) })
    }

    fn classify(alpha: f64) -> Regime {
        if alpha <= 0.5 {
            Regime::Dense
        } else {
            Regime::Sparse
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::make_anova;
    use crate::rng::stream;

    #[test]
    fn links_are_symmetric_and_centered() {
        for link in [LinkFunction::Logistic, LinkFunction::Probit, LinkFunction::Uniform] {
            assert_eq!(link.evaluate(0.0), 0.5, "{link:?}");
            let mut prev = -1.0;
            for i in -40..=40 {
                let z = i as f64 * 0.25;
                let v = link.evaluate(z);
                assert!((link.evaluate(z) + link.evaluate(-z) - 1.0).abs() < 1e-12, "{link:?} at {z}");
                assert!(v >= prev, "{link:?} not nondecreasing at {z}");
                prev = v;
            }
        }
        assert_eq!(LinkFunction::Logistic.derivative_at_zero(), 0.25);
        assert_eq!(LinkFunction::Uniform.derivative_at_zero(), 1.0);
    }

    #[test]
    fn prior_full_support() {
        let prior = SparseSignalPrior::new(4, 4, 1.0, Sidedness::TwoSided).unwrap();
        let beta = sample_prior(&prior, &mut stream(1, 0));
        assert_eq!(beta.entries.len(), 4);
        let cols: Vec<usize> = beta.entries.iter().map(|e| e.0).collect();
        assert_eq!(cols, vec![0, 1, 2, 3]);
        for &(_, v) in &beta.entries {
            assert_eq!(v.abs(), 1.0);
        }
    }

    #[test]
    fn prior_rejects_oversparse() {
        assert!(SparseSignalPrior::new(4, 5, 1.0, Sidedness::TwoSided).is_err());
    }

    #[test]
    fn prior_large_p_sparse_draw() {
        let prior = SparseSignalPrior::new(10_000, 2, 0.7, Sidedness::TwoSided).unwrap();
        let beta = sample_prior(&prior, &mut stream(3, 0));
        assert_eq!(beta.entries.len(), 2);
        assert!(beta.entries[0].0 < beta.entries[1].0);
    }

    #[test]
    fn one_sided_shares_sign_with_fair_frequency() {
        let prior = SparseSignalPrior::new(6, 2, 0.5, Sidedness::OneSided).unwrap();
        let mut rng = stream(11, 0);
        let mut positives = 0usize;
        let n = 10_000;
        for _ in 0..n {
            let beta = sample_prior(&prior, &mut rng);
            let signs: Vec<f64> = beta.entries.iter().map(|e| e.1.signum()).collect();
            assert_eq!(signs[0], signs[1], "one-sided draw must share the sign");
            if signs[0] > 0.0 {
                positives += 1;
            }
        }
        let freq = positives as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "sign frequency {freq}");
    }

    #[test]
    fn null_response_is_fair() {
        let design = make_anova(10, 10).unwrap();
        let mut rng = stream(5, 0);
        let beta = Coefficients::zero(10);
        let mut ones = 0usize;
        let trials = 1000;
        for _ in 0..trials {
            let y = simulate_response(&design, &beta, LinkFunction::Logistic, &mut rng).unwrap();
            ones += y.0.iter().map(|&b| b as usize).sum::<usize>();
        }
        let mean = ones as f64 / (trials * 100) as f64;
        assert!((mean - 0.5).abs() < 0.005, "null mean {mean}");
    }

    #[test]
    fn anova_signal_success_probability() {
        // Logistic with A = ln 3 gives theta(A) = 0.75 on supported rows.
        let a = 3.0f64.ln();
        let design = make_anova(5, 200).unwrap();
        let beta = Coefficients { p: 5, entries: vec![(2, a)] };
        let mut rng = stream(9, 0);
        let mut ones = 0usize;
        let trials = 500;
        for _ in 0..trials {
            let y = simulate_response(&design, &beta, LinkFunction::Logistic, &mut rng).unwrap();
            // Rows 400..600 are the singleton rows of column 2 in make_anova layout.
            ones += y.0[400..600].iter().map(|&b| b as usize).sum::<usize>();
        }
        let mean = ones as f64 / (trials * 200) as f64;
        assert!((mean - 0.75).abs() < 0.01, "signal mean {mean}");
    }

    #[test]
    fn uniform_link_shift_is_identity() {
        assert!((binomial_proportion_shift(0.2, LinkFunction::Uniform) - 0.2).abs() < 1e-15);
        assert_eq!(binomial_proportion_shift(0.0, LinkFunction::Logistic), 0.0);
        let d = binomial_proportion_shift(3.0f64.ln(), LinkFunction::Logistic);
        assert!((d - 0.25).abs() < 1e-15);
        let u = binomial_proportion_shift(0.3, LinkFunction::Uniform);
        assert!((0.5 + u - 0.8).abs() < 1e-15);
    }

    #[test]
    fn regime_round_trips() {
        let s = RegimeSpec::from_k(10_000, 2).unwrap();
        assert_eq!(s.regime, Regime::Sparse);
        assert!((s.alpha - 0.924_742).abs() < 1e-5);
        let d = RegimeSpec::from_k(10_000, 631).unwrap();
        assert_eq!(d.regime, Regime::Dense);
        let r = RegimeSpec::from_alpha(10_000, 0.5).unwrap();
        assert_eq!(r.k, 100);
        assert_eq!(r.regime, Regime::Dense);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let design = make_anova(3, 1).unwrap();
        let beta = Coefficients::zero(4);
        assert!(simulate_response(&design, &beta, LinkFunction::Uniform, &mut stream(0, 0)).is_err());
    }
}
