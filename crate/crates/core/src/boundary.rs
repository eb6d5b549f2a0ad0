//! Detection boundaries in the sparse regime and the induced signal
//! calibration rules used by the parameter studies.

use crate::error::{Error, Result};
use crate::model::LinkFunction;

/// Which boundary curve to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryFamily {
    /// Gaussian sequence benchmark.
    Linear,
    /// Binomial proportions benchmark: linear curve divided by 4.
    Binomial,
    /// Binary regression with a given link: binomial curve scaled by
    /// `1 / (2 theta'(0))^2` relative to linear.
    Binary(LinkFunction),
    /// Max-test boundary over binary designs: the upper branch everywhere.
    MaxBinary(LinkFunction),
    /// Max-test boundary for binomial proportions.
    MaxBinomial,
}

impl BoundaryFamily {
    pub fn parse(name: &str, link: LinkFunction) -> Result<Self> {
        match name {
            "linear" => Ok(BoundaryFamily::Linear),
            "binomial" => Ok(BoundaryFamily::Binomial),
            "binary" => Ok(BoundaryFamily::Binary(link)),
            "max-binary" => Ok(BoundaryFamily::MaxBinary(link)),
            "max-binomial" => Ok(BoundaryFamily::MaxBinomial),
            other => Err(Error::invalid(format!("unknown boundary family '{other}'"))),
        }
    }

    fn scale(self) -> f64 {
        match self {
            BoundaryFamily::Linear => 1.0,
            BoundaryFamily::Binomial | BoundaryFamily::MaxBinomial => 0.25,
            BoundaryFamily::Binary(link) | BoundaryFamily::MaxBinary(link) => {
                0.25 / link.derivative_at_zero().powi(2)
            }
        }
    }

    fn is_max(self) -> bool {
        matches!(self, BoundaryFamily::MaxBinary(_) | BoundaryFamily::MaxBinomial)
    }
}

/// The two branches of the sparse-regime benchmark exponent.
fn linear_lower_branch(alpha: f64) -> f64 {
    alpha - 0.5
}

fn linear_upper_branch(alpha: f64) -> f64 {
    let s = (1.0 - alpha).sqrt();
    (1.0 - s) * (1.0 - s)
}

/// Boundary exponent `rho*(alpha)` on the sparse range `alpha` in (1/2, 1].
///
/// Alternatives with `t > rho*` are detectable, `t < rho*` undetectable; for
/// the max families the single upper branch applies on the whole range.
pub fn rho_star(family: BoundaryFamily, alpha: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(Error::domain(format!(
            "rho* is defined on the sparse range alpha in (1/2, 1]; got alpha={alpha}"
        )));
    }
    let base = if family.is_max() || alpha >= 0.75 {
        linear_upper_branch(alpha)
    } else {
        linear_lower_branch(alpha)
    };
    Ok(base * family.scale())
}

/// Signal strength for an exponent `t`: `A = sqrt(2 t log p / r)`.
pub fn signal_from_t(t: f64, p: usize, r: u64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::domain(format!("exponent t={t} must be nonnegative")));
    }
    if p < 2 || r == 0 {
        return Err(Error::invalid("need p >= 2 and r >= 1"));
    }
    Ok((2.0 * t * (p as f64).ln() / r as f64).sqrt())
}

/// Inverse of [`signal_from_t`]: `t = A^2 r / (2 log p)`.
pub fn t_from_signal(a: f64, p: usize, r: u64) -> Result<f64> {
    if a < 0.0 {
        return Err(Error::domain(format!("signal strength A={a} must be nonnegative")));
    }
    if p < 2 || r == 0 {
        return Err(Error::invalid("need p >= 2 and r >= 1"));
    }
    Ok(a * a * r as f64 / (2.0 * (p as f64).ln()))
}

/// How a study converts a grid value `t` to a signal strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SignalRule {
    /// `A = sqrt(max(2 (rho* + t), 0) log p / r)`: `t` offsets the boundary
    /// exponent, with the inner expression clamped at zero.
    #[serde(rename = "fig4-clamped")]
    Fig4Clamped,
    /// The un-clamped form of the same rule. A negative inner expression has
    /// no real square root, so it is still truncated to a zero signal.
    #[serde(rename = "fig5")]
    Fig5,
    /// `t` is the signal strength `A` itself; used for dense-regime studies.
    #[serde(rename = "explicit-A")]
    ExplicitA,
}

impl std::str::FromStr for SignalRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig4-clamped" => Ok(SignalRule::Fig4Clamped),
            "fig5" => Ok(SignalRule::Fig5),
            "explicit-A" => Ok(SignalRule::ExplicitA),
            other => Err(Error::invalid(format!("unknown signal rule '{other}'"))),
        }
    }
}

impl SignalRule {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalRule::Fig4Clamped => "fig4-clamped",
            SignalRule::Fig5 => "fig5",
            SignalRule::ExplicitA => "explicit-A",
        }
    }
}

/// Benchmark exponent extended below the sparse range by continuing the
/// lower branch, so offset rules stay defined for dense studies.
fn rho_star_extended(family: BoundaryFamily, alpha: f64) -> f64 {
    if alpha > 0.5 {
        rho_star(family, alpha.min(1.0)).expect("alpha in sparse range")
    } else {
        let base = if family.is_max() { linear_upper_branch(alpha.max(0.0)) } else { linear_lower_branch(alpha) };
        base * family.scale()
    }
}

/// Signal strength used by the risk studies at grid value `t`.
pub fn simulation_signal(
    rule: SignalRule,
    family: BoundaryFamily,
    alpha: f64,
    t: f64,
    p: usize,
    r: u64,
) -> Result<f64> {
    match rule {
        SignalRule::ExplicitA => {
            if t < 0.0 {
                return Err(Error::domain(format!("signal strength A={t} must be nonnegative")));
            }
            Ok(t)
        }
        SignalRule::Fig4Clamped | SignalRule::Fig5 => {
            if p < 2 || r == 0 {
                return Err(Error::invalid("need p >= 2 and r >= 1"));
            }
            let inner = 2.0 * (rho_star_extended(family, alpha) + t);
            let inner = inner.max(0.0);
            Ok((inner * (p as f64).ln() / r as f64).sqrt())
        }
    }
}

/// Dense-regime detectability pivot: `A* = sqrt(sqrt(p) / (k r))`. Signals
/// an order of magnitude above it are detectable by the GLRT, an order
/// below undetectable.
pub fn dense_threshold(p: usize, k: usize, r: u64) -> Result<f64> {
    if p < 2 || k == 0 || r == 0 {
        return Err(Error::invalid("need p >= 2, k >= 1, r >= 1"));
    }
    Ok(((p as f64).sqrt() / (k as f64 * r as f64)).sqrt())
}
