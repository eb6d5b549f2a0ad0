//! Monte Carlo estimation of the minimax testing risk of each statistic over
//! a grid of boundary offsets, reproducing the balanced-design parameter
//! studies.
//!
//! Under a balanced design the per-column counts are sufficient, so trials
//! sample `Z_j ~ Bin(r, theta(+/-A))` directly instead of materializing the
//! `p * r` response rows. This keeps studies with hundreds of millions of
//! implicit rows inside an interactive time budget.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binomial::sample_binomial_half;
use crate::boundary::{simulation_signal, BoundaryFamily, SignalRule};
use crate::design::make_anova;
use crate::error::{Error, Result};
use crate::model::{LinkFunction, RegimeSpec, ResponseVector, Sidedness, SparseSignalPrior};
use crate::oracle::bayes_lr;
use crate::rng::{stream, stream_id, RngStream};
use crate::stats::{
    glrt, hc_ideal, hc_pvalue, hc_statistic, max_test, TestName, ZStatistics, HC_EPSILON,
};

fn default_tests() -> Vec<TestName> {
    vec![TestName::Glrt, TestName::HcHalfrange, TestName::Max]
}

fn default_trials() -> usize {
    300
}

fn default_family() -> String {
    "binary".into()
}

fn default_rule() -> SignalRule {
    SignalRule::Fig4Clamped
}

fn default_epsilon() -> f64 {
    HC_EPSILON
}

/// Full description of a risk study on a balanced design.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub p: usize,
    pub r: u64,
    pub k: usize,
    pub link: LinkFunction,
    #[serde(default = "Sidedness::default_two_sided")]
    pub sidedness: Sidedness,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestName>,
    /// Boundary offsets at which the risk is estimated.
    pub t_grid: Vec<f64>,
    #[serde(default = "default_rule")]
    pub signal_rule: SignalRule,
    /// Boundary family name resolved together with `link`.
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Sidedness {
    fn default_two_sided() -> Self {
        Sidedness::TwoSided
    }
}

impl ExperimentSpec {
    fn validate(&self) -> Result<()> {
        if self.p < 2 || self.r == 0 {
            return Err(Error::invalid("need p >= 2 and r >= 1"));
        }
        if self.k == 0 || self.k > self.p {
            return Err(Error::invalid(format!("k={} must lie in [1, p={}]", self.k, self.p)));
        }
        if self.t_grid.is_empty() {
            return Err(Error::invalid("t_grid must be nonempty"));
        }
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be positive"));
        }
        if self.tests.is_empty() {
            return Err(Error::invalid("tests must be nonempty"));
        }
        Ok(())
    }

    pub fn family(&self) -> Result<BoundaryFamily> {
        BoundaryFamily::parse(&self.family, self.link)
    }
}

/// One estimated point of a risk curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskPoint {
    pub test: TestName,
    pub t: f64,
    pub signal_strength: f64,
    pub risk: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

/// Estimated risk curves for every requested test, plus the tests that were
/// not applicable under this configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskCurve {
    pub spec: ExperimentSpec,
    pub points: Vec<RiskPoint>,
    pub skipped: Vec<(TestName, String)>,
}

/// Minimal empirical testing risk over cut points: the smallest
/// `P_null(T > c) + P_alt(T <= c)` over all cuts `c`.
pub fn estimate_empirical_risk(null: &[f64], alt: &[f64]) -> Result<(f64, f64)> {
    if null.is_empty() || alt.is_empty() {
        return Err(Error::invalid("both arms need at least one trial"));
    }
    let mut null_sorted = null.to_vec();
    let mut alt_sorted = alt.to_vec();
    null_sorted.sort_by(|a, b| a.total_cmp(b));
    alt_sorted.sort_by(|a, b| a.total_cmp(b));
    let n0 = null_sorted.len() as f64;
    let n1 = alt_sorted.len() as f64;

    let count_gt = |v: &[f64], c: f64| v.partition_point(|&x| x <= c);
    let mut best = (1.0f64, 1.0f64, 0.0f64); // (risk, fpr, fnr); c = -inf baseline
    let mut candidates: Vec<f64> = null_sorted.iter().chain(alt_sorted.iter()).copied().collect();
    candidates.sort_by(|a, b| a.total_cmp(b));
    candidates.dedup();
    for &c in &candidates {
        let fpr = (null_sorted.len() - count_gt(&null_sorted, c)) as f64 / n0;
        let fnr = count_gt(&alt_sorted, c) as f64 / n1;
        if fpr + fnr < best.0 {
            best = (fpr + fnr, fpr, fnr);
        }
    }
    let (risk, fpr, fnr) = best;
    let stderr = (fpr * (1.0 - fpr) / n0 + fnr * (1.0 - fnr) / n1).sqrt();
    Ok((risk, stderr))
}

/// Statistic evaluator bound to one spec; errors classify a test as
/// unavailable for the whole study.
fn evaluate(
    test: TestName,
    spec: &ExperimentSpec,
    signal: f64,
    zs: &ZStatistics,
) -> Result<f64> {
    match test {
        TestName::Glrt => Ok(glrt(zs, f64::INFINITY)?.statistic),
        TestName::Hc => Ok(hc_statistic(zs, spec.epsilon, false)?.statistic),
        TestName::HcIdeal => Ok(hc_ideal(zs, spec.epsilon, false)?.statistic),
        TestName::HcPvalue => Ok(hc_pvalue(zs, false, spec.epsilon)?.statistic),
        TestName::HcHalfrange => Ok(hc_pvalue(zs, true, spec.epsilon)?.statistic),
        TestName::Max => Ok(max_test(zs, spec.epsilon)?.statistic),
        TestName::BayesLr => {
            // Balanced design: the likelihood depends on y only through the
            // column counts, so any response with the right counts works.
            let design = make_anova(spec.p, spec.r)?;
            let mut y = Vec::with_capacity(design.n());
            for j in 0..spec.p {
                let z = zs.z[j];
                y.extend(std::iter::repeat(1u8).take(z as usize));
                y.extend(std::iter::repeat(0u8).take((spec.r - z) as usize));
            }
            let prior = SparseSignalPrior::new(spec.p, spec.k, signal, spec.sidedness)?;
            bayes_lr(&design, &ResponseVector(y), &prior, spec.link)
        }
        TestName::GlrtCombined | TestName::HcCombined => Err(Error::UnsupportedConfig(format!(
            "{} needs an explicit design with residual rows; balanced studies have none",
            test.as_str()
        ))),
    }
}

fn sample_null_z(p: usize, r: u64, rng: &mut RngStream) -> Vec<u64> {
    (0..p).map(|_| sample_binomial_half(r, rng)).collect()
}

fn sample_alt_z(
    spec: &ExperimentSpec,
    signal: f64,
    rng: &mut RngStream,
) -> Result<Vec<u64>> {
    let prior = SparseSignalPrior::new(spec.p, spec.k, signal, spec.sidedness)?;
    let beta = crate::model::sample_prior(&prior, rng);
    let mut z = sample_null_z(spec.p, spec.r, rng);
    for &(j, value) in &beta.entries {
        let prob = spec.link.evaluate(value);
        z[j] = Binomial::new(spec.r, prob)
            .map_err(|e| Error::invalid(format!("invalid binomial parameter: {e}")))?
            .sample(rng);
    }
    Ok(z)
}

const NULL_ARM: u64 = 0;
const ALT_ARM: u64 = 1;

/// Run the full study. Results are independent of the worker count: every
/// `(t, arm, trial)` cell owns a dedicated random stream and trials are
/// reduced in index order.
pub fn run_experiment(spec: &ExperimentSpec, workers: Option<usize>) -> Result<RiskCurve> {
    spec.validate()?;
    let family = spec.family()?;
    match workers {
        Some(w) => {
            if w == 0 {
                return Err(Error::invalid("worker count must be positive"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::invalid(format!("failed to build thread pool: {e}")))?;
            pool.install(|| run_experiment_inner(spec, family))
        }
        None => run_experiment_inner(spec, family),
    }
}

fn run_experiment_inner(spec: &ExperimentSpec, family: BoundaryFamily) -> Result<RiskCurve> {
    let alpha = RegimeSpec::from_k(spec.p, spec.k)?.alpha;

    // Classify tests once, on a deterministic probe sample.
    let probe = ZStatistics {
        z: sample_null_z(spec.p, spec.r, &mut stream(spec.seed, stream_id(&[u64::MAX]))),
        r: vec![spec.r; spec.p],
        z_g: vec![0; spec.p],
        g: vec![0; spec.p],
    };
    let mut active = Vec::new();
    let mut skipped = Vec::new();
    for &test in &spec.tests {
        match evaluate(test, spec, 1.0, &probe) {
            Ok(_) => active.push(test),
            Err(e) => skipped.push((test, e.to_string())),
        }
    }
    if active.is_empty() {
        return Err(Error::UnsupportedConfig(
            "no requested test is applicable to this configuration".into(),
        ));
    }

    let mut points = Vec::new();
    for (ti, &t) in spec.t_grid.iter().enumerate() {
        let signal = simulation_signal(spec.signal_rule, family, alpha, t, spec.p, spec.r)?;
        // trial -> statistics per active test, for both arms.
        let trials: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..spec.n_trials)
            .into_par_iter()
            .map(|trial| {
                let mut null_rng = stream(
                    spec.seed,
                    stream_id(&[ti as u64, NULL_ARM, trial as u64]),
                );
                let mut alt_rng =
                    stream(spec.seed, stream_id(&[ti as u64, ALT_ARM, trial as u64]));
                let null_z = sample_null_z(spec.p, spec.r, &mut null_rng);
                let alt_z = sample_alt_z(spec, signal, &mut alt_rng)?;
                let make = |z: Vec<u64>| ZStatistics {
                    z,
                    r: vec![spec.r; spec.p],
                    z_g: vec![0; spec.p],
                    g: vec![0; spec.p],
                };
                let (null_zs, alt_zs) = (make(null_z), make(alt_z));
                let null_stats: Vec<f64> = active
                    .iter()
                    .map(|&w| evaluate(w, spec, signal, &null_zs))
                    .collect::<Result<_>>()?;
                let alt_stats: Vec<f64> = active
                    .iter()
                    .map(|&w| evaluate(w, spec, signal, &alt_zs))
                    .collect::<Result<_>>()?;
                Ok((null_stats, alt_stats))
            })
            .collect();

        let mut null_by_test = vec![Vec::with_capacity(spec.n_trials); active.len()];
        let mut alt_by_test = vec![Vec::with_capacity(spec.n_trials); active.len()];
        for trial in trials {
            let (null_stats, alt_stats) = trial?;
            for (w, &s) in null_stats.iter().enumerate() {
                null_by_test[w].push(s);
            }
            for (w, &s) in alt_stats.iter().enumerate() {
                alt_by_test[w].push(s);
            }
        }

        for (w, &test) in active.iter().enumerate() {
            let (risk, stderr) = estimate_empirical_risk(&null_by_test[w], &alt_by_test[w])?;
            points.push(RiskPoint {
                test,
                t,
                signal_strength: signal,
                risk,
                stderr,
                n_trials: spec.n_trials,
            });
        }
    }

    Ok(RiskCurve { spec: spec.clone(), points, skipped })
}

/// Serialize the risk curve as a CSV table next to a JSON echo of the spec.
/// Both outputs are byte-identical across reruns with the same spec.
pub fn persist_results(curve: &RiskCurve, csv_path: &Path, json_path: &Path) -> Result<()> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| Error::Io { path, source }
    };

    let mut csv = String::from("test,t,A,risk,stderr,n_trials,seed\n");
    for pt in &curve.points {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            pt.test.as_str(),
            pt.t,
            pt.signal_strength,
            pt.risk,
            pt.stderr,
            pt.n_trials,
            curve.spec.seed
        ));
    }
    let mut f = fs::File::create(csv_path).map_err(io_err(csv_path))?;
    f.write_all(csv.as_bytes()).map_err(io_err(csv_path))?;

    let echo = serde_json::json!({
        "spec": curve.spec,
        "skipped": curve
            .skipped
            .iter()
            .map(|(t, why)| serde_json::json!({ "test": t, "reason": why }))
            .collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&echo)
        .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    let mut f = fs::File::create(json_path).map_err(io_err(json_path))?;
    f.write_all(text.as_bytes()).map_err(io_err(json_path))?;
    f.write_all(b"\n").map_err(io_err(json_path))?;
    Ok(())
}
