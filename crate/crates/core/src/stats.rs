//! Test statistics for the global null: the GLRT, the discretized and ideal
//! Higher Criticism statistics, the p-value Higher Criticism, and the Max
//! Test, together with the combined variants that fold in the nonorthogonal
//! part of the design.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::binomial::BinomialHalfKernel;
use crate::design::BinaryDesign;
use crate::error::{Error, Result};
use crate::model::ResponseVector;
use crate::rng::RngStream;

/// Default epsilon in the `(1 + eps) log p` Higher Criticism cutoff.
pub const HC_EPSILON: f64 = 0.05;

/// Per-column success counts split between the singleton and residual parts
/// of the design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZStatistics {
    /// `Z_j`: successes among the singleton rows of column `j`.
    pub z: Vec<u64>,
    /// `r_j`: singleton row count of column `j`.
    pub r: Vec<u64>,
    /// `Z_j^G`: successes among residual rows containing column `j`.
    pub z_g: Vec<u64>,
    /// `g_j`: residual column sums.
    pub g: Vec<u64>,
}

impl ZStatistics {
    pub fn p(&self) -> usize {
        self.r.len()
    }

    fn min_r(&self) -> u64 {
        self.r.iter().copied().min().unwrap_or(0)
    }
}

/// Names of the implemented tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestName {
    Glrt,
    GlrtCombined,
    Hc,
    HcIdeal,
    HcPvalue,
    HcHalfrange,
    HcCombined,
    Max,
    BayesLr,
}

impl TestName {
    pub fn as_str(self) -> &'static str {
        match self {
            TestName::Glrt => "glrt",
            TestName::GlrtCombined => "glrt-combined",
            TestName::Hc => "hc",
            TestName::HcIdeal => "hc-ideal",
            TestName::HcPvalue => "hc-pvalue",
            TestName::HcHalfrange => "hc-halfrange",
            TestName::HcCombined => "hc-combined",
            TestName::Max => "max",
            TestName::BayesLr => "bayes-lr",
        }
    }
}

impl std::str::FromStr for TestName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glrt" => Ok(TestName::Glrt),
            "glrt-combined" => Ok(TestName::GlrtCombined),
            "hc" => Ok(TestName::Hc),
            "hc-ideal" => Ok(TestName::HcIdeal),
            "hc-pvalue" => Ok(TestName::HcPvalue),
            "hc-halfrange" => Ok(TestName::HcHalfrange),
            "hc-combined" => Ok(TestName::HcCombined),
            "max" => Ok(TestName::Max),
            "bayes-lr" => Ok(TestName::BayesLr),
            other => Err(Error::invalid(format!("unknown test name '{other}'"))),
        }
    }
}

/// Outcome of applying a test: the statistic, the cutoff, and the decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub name: TestName,
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
    pub details: BTreeMap<String, serde_json::Value>,
}

impl TestReport {
    fn new(name: TestName, statistic: f64, threshold: f64) -> Self {
        Self { name, statistic, threshold, reject: statistic > threshold, details: BTreeMap::new() }
    }

    fn with(mut self, key: &str, value: serde_json::Value) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

/// Compute the per-column Z-statistics of a response under a design.
pub fn compute_z(design: &BinaryDesign, y: &ResponseVector) -> Result<ZStatistics> {
    if y.len() != design.n() {
        return Err(Error::invalid(format!(
            "response length {} does not match design n={}",
            y.len(),
            design.n()
        )));
    }
    let p = design.p();
    let mut z = vec![0u64; p];
    let mut z_g = vec![0u64; p];
    for (row, &yi) in design.rows().zip(&y.0) {
        if yi == 0 {
            continue;
        }
        if row.len() == 1 {
            z[row[0] as usize] += 1;
        } else {
            for &j in row {
                z_g[j as usize] += 1;
            }
        }
    }
    let r = design.singleton_counts();
    let g = (0..p).map(|j| design.residual_column_count(j)).collect();
    Ok(ZStatistics { z, r, z_g, g })
}

/// Squared centered deviation `(2z - r)^2` in exact integer arithmetic.
fn dev_sq(z: u64, r: u64) -> u128 {
    let d = (2 * z as i128 - r as i128).unsigned_abs();
    d * d
}

/// GLRT: standardized sum of per-column chi-square contributions.
///
/// Columns with `r_j = 0` carry no singleton information and are excluded,
/// with the effective dimension recorded in the details.
pub fn glrt(zs: &ZStatistics, threshold: f64) -> Result<TestReport> {
    let mut raw = 0.0f64;
    let mut p_eff = 0usize;
    for (&z, &r) in zs.z.iter().zip(&zs.r) {
        if r == 0 {
            continue;
        }
        p_eff += 1;
        raw += dev_sq(z, r) as f64 / r as f64;
    }
    if p_eff == 0 {
        return Err(Error::invalid("GLRT needs at least one column with r_j >= 1"));
    }
    let statistic = (raw - p_eff as f64) / (2.0 * p_eff as f64).sqrt();
    Ok(TestReport::new(TestName::Glrt, statistic, threshold)
        .with("raw_sum", json!(raw))
        .with("p_effective", json!(p_eff))
        .with("excluded_columns", json!(zs.p() - p_eff)))
}

/// Calibrate a GLRT cutoff by null Monte Carlo at the given level.
pub fn calibrate_glrt_threshold(
    r: &[u64],
    level: f64,
    n_reps: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::invalid("level must lie in (0, 1)"));
    }
    let mut stats = Vec::with_capacity(n_reps);
    for _ in 0..n_reps {
        let z: Vec<u64> = r.iter().map(|&rj| crate::binomial::sample_binomial_half(rj, rng)).collect();
        let zs = ZStatistics { z, r: r.to_vec(), z_g: vec![], g: vec![] };
        stats.push(glrt(&zs, f64::INFINITY)?.statistic);
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let idx = ((1.0 - level) * n_reps as f64).floor() as usize;
    Ok(stats[idx.min(n_reps - 1)])
}

/// Exact null moments of the residual-part quadratic statistic
/// `sum_j (Z_j^G)^2`, from the fourth-moment expansion of quadratic forms in
/// independent Bernoulli(1/2) variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GMoments {
    /// `sum_j E_H0[(Z_j^G)^2] = sum_j (g_j + g_j^2) / 4`.
    pub expected_sum: f64,
    /// `Var_H0[sum_j (Z_j^G)^2]`.
    pub variance_sum: f64,
}

impl GMoments {
    pub fn from_design(design: &BinaryDesign) -> Self {
        let g_rows = design.residual_row_indices();
        let m = g_rows.len();
        // Pairwise support intersections a[ab] = |S_a cap S_b|.
        // sum_j (Z^G_j)^2 = sum_a a[aa] y_a + 2 sum_{a<b} a[ab] y_a y_b.
        #[derive(Clone)]
        struct Term {
            coef: f64,
            vars: [usize; 2],
            nvars: usize,
        }
        let mut terms: Vec<Term> = Vec::new();
        for (ia, &a) in g_rows.iter().enumerate() {
            let sa = design.row(a);
            terms.push(Term { coef: sa.len() as f64, vars: [ia, 0], nvars: 1 });
            for (ib, &b) in g_rows.iter().enumerate().skip(ia + 1) {
                let sb = design.row(b);
                let inter = intersection_size(sa, sb);
                if inter > 0 {
                    terms.push(Term { coef: 2.0 * inter as f64, vars: [ia, ib], nvars: 2 });
                }
            }
        }
        let _ = m;
        let mean: f64 = terms.iter().map(|t| t.coef * 0.5f64.powi(t.nvars as i32)).sum();
        let mut second = 0.0f64;
        for s in &terms {
            for t in &terms {
                let mut distinct = s.nvars + t.nvars;
                for i in 0..s.nvars {
                    for j in 0..t.nvars {
                        if s.vars[i] == t.vars[j] {
                            distinct -= 1;
                        }
                    }
                }
                second += s.coef * t.coef * 0.5f64.powi(distinct as i32);
            }
        }
        GMoments { expected_sum: mean, variance_sum: second - mean * mean }
    }
}

fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    // Both sorted.
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Combined GLRT: Bonferroni max of the orthogonal-part GLRT and the
/// standardized residual quadratic. Falls back to the plain GLRT when the
/// residual part is degenerate.
pub fn glrt_combined(zs: &ZStatistics, g_moments: &GMoments, threshold: f64) -> Result<TestReport> {
    let base = glrt(zs, threshold)?;
    if g_moments.variance_sum <= 0.0 {
        return Ok(TestReport::new(TestName::GlrtCombined, base.statistic, threshold)
            .with("fallback", json!("plain-glrt"))
            .with("glrt_component", json!(base.statistic)));
    }
    let sum_sq: f64 = zs.z_g.iter().map(|&v| (v as f64).powi(2)).sum();
    let g_component = (sum_sq - g_moments.expected_sum) / g_moments.variance_sum.sqrt();
    let statistic = base.statistic.max(g_component);
    Ok(TestReport::new(TestName::GlrtCombined, statistic, threshold)
        .with("glrt_component", json!(base.statistic))
        .with("g_component", json!(g_component)))
}

/// Integer threshold grid `[1, sqrt(3 log p)]` for the discretized HC.
pub fn hc_grid(p: usize) -> Vec<u64> {
    let top = (3.0 * (p as f64).ln()).sqrt().floor() as u64;
    (1..=top.max(1)).collect()
}

/// Cutoff for the HC statistics: `(1 + eps) log p`, or the
/// `sqrt(2 (1 + eps) log log p)` rule when `use_loglog` is set.
pub fn hc_threshold(p: usize, epsilon: f64, use_loglog: bool) -> f64 {
    let lp = (p as f64).ln();
    if use_loglog {
        (2.0 * (1.0 + epsilon) * lp.ln()).sqrt()
    } else {
        (1.0 + epsilon) * lp
    }
}

fn kernels_for(r: &[u64]) -> Result<HashMap<u64, BinomialHalfKernel>> {
    let mut kernels = HashMap::new();
    for &rj in r {
        if rj >= 1 && !kernels.contains_key(&rj) {
            kernels.insert(rj, BinomialHalfKernel::new(rj)?);
        }
    }
    Ok(kernels)
}

/// Discretized Higher Criticism over the integer grid.
pub fn hc_statistic(zs: &ZStatistics, epsilon: f64, use_loglog: bool) -> Result<TestReport> {
    if zs.min_r() < 2 {
        return Err(Error::invalid("Higher Criticism requires every r_j >= 2"));
    }
    let p = zs.p();
    let kernels = kernels_for(&zs.r)?;
    let mut best: Option<(u64, f64)> = None;
    let mut skipped = Vec::new();
    let mut per_t = Vec::new();
    for t in hc_grid(p) {
        let mut exceed = 0u64;
        let mut mean = 0.0f64;
        let mut var = 0.0f64;
        for (&z, &r) in zs.z.iter().zip(&zs.r) {
            if dev_sq(z, r) > (t as u128 * t as u128) * r as u128 {
                exceed += 1;
            }
            let surv = kernels[&r].standardized_survival(t as f64);
            mean += surv;
            var += surv * (1.0 - surv);
        }
        if var <= 0.0 {
            skipped.push(t);
            continue;
        }
        let w = (exceed as f64 - mean) / var.sqrt();
        per_t.push(json!({ "t": t, "w": w }));
        if best.map_or(true, |(_, b)| w > b) {
            best = Some((t, w));
        }
    }
    let (argmax, statistic) =
        best.ok_or_else(|| Error::invalid("empty usable HC grid: all variances degenerate"))?;
    Ok(TestReport::new(TestName::Hc, statistic, hc_threshold(p, epsilon, use_loglog))
        .with("argmax_t", json!(argmax))
        .with("per_t", json!(per_t))
        .with("skipped_t", json!(skipped)))
}

/// Ideal Higher Criticism: the exact supremum over the threshold continuum,
/// defined for balanced (equal `r_j`) designs.
///
/// `W_p` is a step function of the threshold, so the supremum equals the
/// maximum over evaluations just below each achievable standardized value.
pub fn hc_ideal(zs: &ZStatistics, epsilon: f64, use_loglog: bool) -> Result<TestReport> {
    let p = zs.p();
    let r = zs.r.first().copied().ok_or_else(|| Error::invalid("empty statistics"))?;
    if zs.r.iter().any(|&rj| rj != r) {
        return Err(Error::UnsupportedConfig(
            "ideal HC is defined only for balanced designs (all r_j equal)".into(),
        ));
    }
    if r < 2 {
        return Err(Error::invalid("Higher Criticism requires every r_j >= 2"));
    }
    let kernel = BinomialHalfKernel::new(r)?;
    // Achievable |2z - r| values, positive only; parity matches r.
    let m_start = if r % 2 == 0 { 2 } else { 1 };
    let mut best = f64::NEG_INFINITY;
    let mut found = false;
    for m in (m_start..=r).step_by(2) {
        let tail = kernel.center_deviation_tail(m);
        let var = p as f64 * tail * (1.0 - tail);
        if var <= 0.0 {
            continue;
        }
        let count = zs
            .z
            .iter()
            .filter(|&&z| (2 * z as i128 - r as i128).unsigned_abs() >= m as u128)
            .count();
        let w = (count as f64 - p as f64 * tail) / var.sqrt();
        best = best.max(w);
        found = true;
    }
    if !found {
        return Err(Error::invalid("ideal HC: all evaluation points degenerate"));
    }
    Ok(TestReport::new(TestName::HcIdeal, best, hc_threshold(p, epsilon, use_loglog)))
}

/// P-value Higher Criticism: maximum of the standardized empirical
/// exceedance of sorted exact binomial p-values. `half_range` restricts the
/// maximum to the first `p/2` order statistics.
pub fn hc_pvalue(zs: &ZStatistics, half_range: bool, epsilon: f64) -> Result<TestReport> {
    if zs.min_r() < 2 {
        return Err(Error::invalid("Higher Criticism requires every r_j >= 2"));
    }
    let p = zs.p();
    let kernels = kernels_for(&zs.r)?;
    let mut q: Vec<f64> = zs
        .z
        .iter()
        .zip(&zs.r)
        .map(|(&z, &r)| kernels[&r].two_sided_pvalue(z))
        .collect::<Result<_>>()?;
    q.sort_by(|a, b| a.total_cmp(b));
    let limit = if half_range { p / 2 } else { p };
    let sqrt_p = (p as f64).sqrt();
    let mut best = f64::NEG_INFINITY;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (idx, &qj) in q.iter().take(limit).enumerate() {
        if qj <= 0.0 || qj >= 1.0 {
            skipped += 1;
            continue;
        }
        let j = (idx + 1) as f64;
        let w = sqrt_p * (j / p as f64 - qj) / (qj * (1.0 - qj)).sqrt();
        best = best.max(w);
        used += 1;
    }
    if used == 0 {
        return Err(Error::invalid("p-value HC: all order statistics degenerate"));
    }
    let name = if half_range { TestName::HcHalfrange } else { TestName::HcPvalue };
    Ok(TestReport::new(name, best, hc_threshold(p, epsilon, false))
        .with("skipped", json!(skipped))
        .with("half_range", json!(half_range)))
}

/// Max Test: the largest standardized column deviation, equivalent to the
/// minimum two-sided p-value test.
pub fn max_test(zs: &ZStatistics, epsilon: f64) -> Result<TestReport> {
    if zs.min_r() < 1 {
        return Err(Error::invalid("Max Test requires every r_j >= 1"));
    }
    let p = zs.p();
    let mut best = f64::NEG_INFINITY;
    let mut argmax = 0usize;
    for (j, (&z, &r)) in zs.z.iter().zip(&zs.r).enumerate() {
        let w = (z as f64 - r as f64 / 2.0).abs() / (r as f64 / 4.0).sqrt();
        if w > best {
            best = w;
            argmax = j;
        }
    }
    let threshold = (2.0 * (1.0 + epsilon) * (p as f64).ln()).sqrt();
    Ok(TestReport::new(TestName::Max, best, threshold).with("argmax_column", json!(argmax + 1)))
}

/// Combined Higher Criticism: per-threshold max of the orthogonal-part
/// `W_p(t)` and a residual-part analogue whose null exceedance moments are
/// estimated by seeded Monte Carlo over the residual rows.
pub fn hc_combined(
    design: &BinaryDesign,
    zs: &ZStatistics,
    epsilon: f64,
    n_null_reps: usize,
    rng: &mut RngStream,
) -> Result<TestReport> {
    let g_rows = design.residual_row_indices();
    if g_rows.is_empty() {
        let base = hc_statistic(zs, epsilon, false)?;
        return Ok(TestReport::new(TestName::HcCombined, base.statistic, base.threshold)
            .with("fallback", json!("plain-hc")));
    }
    if zs.min_r() < 2 {
        return Err(Error::invalid("Higher Criticism requires every r_j >= 2"));
    }
    let p = zs.p();
    let grid = hc_grid(p);
    let included: Vec<usize> = (0..p).filter(|&j| zs.g[j] >= 2).collect();
    if included.is_empty() {
        return Err(Error::invalid("combined HC needs at least one column with g_j >= 2"));
    }

    let exceed_counts = |z_g: &[u64]| -> Vec<u64> {
        grid.iter()
            .map(|&t| {
                included
                    .iter()
                    .filter(|&&j| dev_sq(z_g[j], zs.g[j]) > (t as u128 * t as u128) * zs.g[j] as u128)
                    .count() as u64
            })
            .collect()
    };

    // Null Monte Carlo over the residual rows only.
    let mut sums = vec![0.0f64; grid.len()];
    let mut sq_sums = vec![0.0f64; grid.len()];
    let mut z_g = vec![0u64; p];
    for _ in 0..n_null_reps {
        z_g.iter_mut().for_each(|v| *v = 0);
        for &i in &g_rows {
            if rng.gen::<bool>() {
                for &j in design.row(i) {
                    z_g[j as usize] += 1;
                }
            }
        }
        for (ti, &c) in exceed_counts(&z_g).iter().enumerate() {
            sums[ti] += c as f64;
            sq_sums[ti] += (c as f64).powi(2);
        }
    }

    let base = hc_statistic(zs, epsilon, false)?;
    let observed = exceed_counts(&zs.z_g);
    let mut best_g = f64::NEG_INFINITY;
    let mut g_defined = false;
    for ti in 0..grid.len() {
        let mean = sums[ti] / n_null_reps as f64;
        let var = sq_sums[ti] / n_null_reps as f64 - mean * mean;
        if var <= 0.0 {
            continue;
        }
        best_g = best_g.max((observed[ti] as f64 - mean) / var.sqrt());
        g_defined = true;
    }
    let statistic = if g_defined { base.statistic.max(best_g) } else { base.statistic };
    Ok(TestReport::new(TestName::HcCombined, statistic, hc_threshold(p, epsilon, false))
        .with("hc_component", json!(base.statistic))
        .with("g_component", json!(if g_defined { best_g } else { f64::NAN }))
        .with("bonferroni_factor", json!(2))
        .with("null_reps", json!(n_null_reps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{make_anova, make_block_diagonal, BinaryDesign};
    use crate::model::ResponseVector;
    use crate::rng::stream;

    fn balanced(z: Vec<u64>, r: u64) -> ZStatistics {
        let p = z.len();
        ZStatistics { z, r: vec![r; p], z_g: vec![0; p], g: vec![0; p] }
    }

    #[test]
    fn compute_z_anova() {
        let d = make_anova(3, 2).unwrap();
        let y = ResponseVector(vec![1; 6]);
        let zs = compute_z(&d, &y).unwrap();
        assert_eq!(zs.z, vec![2, 2, 2]);
        assert_eq!(zs.g, vec![0, 0, 0]);

        let d = make_anova(4, 1).unwrap();
        let y = ResponseVector(vec![1, 0, 0, 0]);
        let zs = compute_z(&d, &y).unwrap();
        assert_eq!(zs.z, vec![1, 0, 0, 0]);
    }

    #[test]
    fn compute_z_residual_row() {
        let d = BinaryDesign::from_rows(3, vec![vec![0], vec![1], vec![0, 1]]).unwrap();
        let y = ResponseVector(vec![0, 0, 1]);
        let zs = compute_z(&d, &y).unwrap();
        assert_eq!(zs.z, vec![0, 0, 0]);
        assert_eq!(zs.z_g, vec![1, 1, 0]);
        assert_eq!(zs.g, vec![1, 1, 0]);
    }

    #[test]
    fn glrt_center_and_extreme() {
        let zs = balanced(vec![1, 1, 1, 1], 2);
        let rep = glrt(&zs, 0.0).unwrap();
        assert!((rep.statistic + (4.0f64 / 2.0).sqrt()).abs() < 1e-12);
        assert!(!rep.reject);

        // All z_j = r_j: raw = p * r for ANOVA(r).
        let zs = balanced(vec![2, 2, 2, 2], 2);
        let rep = glrt(&zs, 0.0).unwrap();
        let expect = (4.0 * (2.0 - 1.0)) / (8.0f64).sqrt();
        assert!((rep.statistic - expect).abs() < 1e-12);
    }

    #[test]
    fn glrt_null_mean_small() {
        let r = vec![10u64; 500];
        let mut rng = stream(2, 0);
        let mut raw_sum = 0.0;
        let trials = 400;
        for _ in 0..trials {
            let z: Vec<u64> =
                r.iter().map(|&rj| crate::binomial::sample_binomial_half(rj, &mut rng)).collect();
            let zs = ZStatistics { z, r: r.clone(), z_g: vec![], g: vec![] };
            let rep = glrt(&zs, 0.0).unwrap();
            raw_sum += rep.details["raw_sum"].as_f64().unwrap();
        }
        let mean = raw_sum / trials as f64;
        assert!((mean - 500.0).abs() < 15.0, "mean {mean}");
    }

    #[test]
    fn g_moments_match_enumeration() {
        let g = vec![vec![0u32, 1], vec![1, 2], vec![0, 2, 3], vec![3, 4]];
        let n_g = g.len();
        let mut rows: Vec<Vec<u32>> = (0..5).map(|j| vec![j]).collect();
        rows.extend(g.clone());
        let d = BinaryDesign::from_rows(5, rows).unwrap();
        let m = GMoments::from_design(&d);

        // Exhaustive enumeration over the 2^4 residual outcomes.
        let mut mean = 0.0;
        let mut second = 0.0;
        for mask in 0..(1u32 << n_g) {
            let mut z_g = vec![0u64; 5];
            for (i, row) in g.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    for &j in row {
                        z_g[j as usize] += 1;
                    }
                }
            }
            let t: f64 = z_g.iter().map(|&v| (v as f64).powi(2)).sum();
            let w = 1.0 / (1u32 << n_g) as f64;
            mean += w * t;
            second += w * t * t;
        }
        assert!((m.expected_sum - mean).abs() < 1e-10, "{} vs {mean}", m.expected_sum);
        assert!((m.variance_sum - (second - mean * mean)).abs() < 1e-10);
    }

    #[test]
    fn g_moments_random_designs_vs_enumeration() {
        let mut rng = stream(31, 0);
        for trial in 0..5 {
            let d = crate::design::make_weakly_correlated(20, 1, 2, 10, 4, &mut rng).unwrap();
            let m = GMoments::from_design(&d);
            let g_rows = d.residual_row_indices();
            let n_g = g_rows.len();
            let mut mean = 0.0;
            let mut second = 0.0;
            for mask in 0..(1u32 << n_g) {
                let mut z_g = vec![0u64; 20];
                for (i, &row) in g_rows.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        for &j in d.row(row) {
                            z_g[j as usize] += 1;
                        }
                    }
                }
                let t: f64 = z_g.iter().map(|&v| (v as f64).powi(2)).sum();
                let w = 1.0 / (1u32 << n_g) as f64;
                mean += w * t;
                second += w * t * t;
            }
            assert!((m.variance_sum - (second - mean * mean)).abs() < 1e-10, "trial {trial}");
            // Per-column closed form for the expectation.
            let closed: f64 = (0..20)
                .map(|j| {
                    let gj = d.residual_column_count(j) as f64;
                    gj / 4.0 + gj * gj / 4.0
                })
                .sum();
            assert!((m.expected_sum - closed).abs() < 1e-10, "trial {trial}");
        }
    }

    #[test]
    fn glrt_combined_single_row() {
        // G = one row {0, 1}: sum_j (Z^G)^2 = 2y, y ~ Bern(1/2).
        let d = BinaryDesign::from_rows(2, vec![vec![0], vec![0], vec![1], vec![1], vec![0, 1]])
            .unwrap();
        let m = GMoments::from_design(&d);
        assert!((m.expected_sum - 1.0).abs() < 1e-12);
        assert!((m.variance_sum - 1.0).abs() < 1e-12);
        for (y_last, expect) in [(0u8, -1.0), (1, 1.0)] {
            let y = ResponseVector(vec![0, 1, 0, 1, y_last]);
            let zs = compute_z(&d, &y).unwrap();
            let rep = glrt_combined(&zs, &m, 100.0).unwrap();
            let g_comp = rep.details["g_component"].as_f64().unwrap();
            assert!((g_comp - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn glrt_combined_empty_g_falls_back() {
        let d = make_anova(4, 2).unwrap();
        let m = GMoments::from_design(&d);
        let y = ResponseVector(vec![1, 0, 1, 0, 1, 0, 1, 0]);
        let zs = compute_z(&d, &y).unwrap();
        let plain = glrt(&zs, 1.0).unwrap();
        let comb = glrt_combined(&zs, &m, 1.0).unwrap();
        assert_eq!(comb.statistic, plain.statistic);
        assert_eq!(comb.details["fallback"], json!("plain-glrt"));
    }

    #[test]
    fn hc_central_data_never_rejects() {
        let zs = balanced(vec![2; 10], 4);
        let rep = hc_statistic(&zs, HC_EPSILON, false).unwrap();
        assert!(rep.statistic < 0.0);
        assert!(!rep.reject);
    }

    #[test]
    fn hc_hand_computed_p4_r4() {
        let zs = balanced(vec![4, 2, 2, 2], 4);
        let rep = hc_statistic(&zs, HC_EPSILON, false).unwrap();
        // W_p(1) = (1 - 4/8) / sqrt(4 * (1/8) * (7/8)).
        let expect = 0.5 / (4.0f64 * 0.125 * 0.875).sqrt();
        assert!((rep.statistic - expect).abs() < 1e-12, "{} vs {expect}", rep.statistic);
        assert_eq!(rep.details["argmax_t"], json!(1));

        let ideal = hc_ideal(&zs, HC_EPSILON, false).unwrap();
        assert!(ideal.statistic >= rep.statistic - 1e-12);
        assert!((ideal.statistic - expect).abs() < 1e-12);
    }

    #[test]
    fn hc_requires_r_at_least_two() {
        let zs = balanced(vec![0, 1], 1);
        assert!(hc_statistic(&zs, HC_EPSILON, false).is_err());
        assert!(hc_pvalue(&zs, false, HC_EPSILON).is_err());
    }

    #[test]
    fn hc_ideal_rejects_unbalanced() {
        let zs = ZStatistics { z: vec![1, 1], r: vec![2, 4], z_g: vec![0, 0], g: vec![0, 0] };
        assert!(matches!(
            hc_ideal(&zs, HC_EPSILON, false),
            Err(Error::UnsupportedConfig(_))
        ));
    }

    #[test]
    fn hc_pvalue_skips_degenerate() {
        let zs = balanced(vec![4, 2, 2, 2], 4);
        let rep = hc_pvalue(&zs, false, HC_EPSILON).unwrap();
        // q = (0, 0.625, 0.625, 0.625); the zero is skipped.
        assert_eq!(rep.details["skipped"], json!(1));
        let expect = (2..=4)
            .map(|j| 2.0 * (j as f64 / 4.0 - 0.625) / (0.625f64 * 0.375).sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((rep.statistic - expect).abs() < 1e-12);
    }

    #[test]
    fn proposition_chain_on_simulated_data() {
        let mut rng = stream(12, 0);
        let r = 50u64;
        let p = 100usize;
        for trial in 0..200 {
            let z: Vec<u64> =
                (0..p).map(|_| crate::binomial::sample_binomial_half(r, &mut rng)).collect();
            let zs = balanced(z, r);
            let hc = hc_statistic(&zs, HC_EPSILON, false).unwrap().statistic;
            let ideal = hc_ideal(&zs, HC_EPSILON, false).unwrap().statistic;
            let prime = hc_pvalue(&zs, false, HC_EPSILON).unwrap().statistic;
            assert!(prime >= ideal - 1e-10, "trial {trial}: {prime} < {ideal}");
            assert!(ideal >= hc - 1e-10, "trial {trial}: {ideal} < {hc}");
        }
    }

    #[test]
    fn hc_ideal_dominates_dense_grid() {
        let mut rng = stream(13, 0);
        let r = 36u64;
        let p = 50usize;
        let kernel = BinomialHalfKernel::new(r).unwrap();
        for _ in 0..20 {
            let z: Vec<u64> =
                (0..p).map(|_| crate::binomial::sample_binomial_half(r, &mut rng)).collect();
            let zs = balanced(z.clone(), r);
            let ideal = hc_ideal(&zs, HC_EPSILON, false).unwrap().statistic;
            let max_t = (r as f64).sqrt();
            for i in 0..10_000 {
                let t = i as f64 * max_t / 10_000.0;
                let surv = kernel.standardized_survival(t);
                let var = p as f64 * surv * (1.0 - surv);
                if var <= 0.0 {
                    continue;
                }
                let count = z
                    .iter()
                    .filter(|&&zj| (zj as f64 - r as f64 / 2.0).abs() / (r as f64 / 4.0).sqrt() > t)
                    .count();
                let w = (count as f64 - p as f64 * surv) / var.sqrt();
                assert!(w <= ideal + 1e-9, "grid point t={t} exceeds ideal");
            }
        }
    }

    #[test]
    fn max_test_values() {
        let zs = balanced(vec![2, 2, 2, 2], 4);
        assert_eq!(max_test(&zs, HC_EPSILON).unwrap().statistic, 0.0);
        let zs = balanced(vec![4, 2, 2, 2], 4);
        assert!((max_test(&zs, HC_EPSILON).unwrap().statistic - 2.0).abs() < 1e-12);
    }

    #[test]
    fn max_test_equals_min_pvalue_argmax() {
        let mut rng = stream(14, 0);
        let r = 40u64;
        let kernel = BinomialHalfKernel::new(r).unwrap();
        for _ in 0..100 {
            let z: Vec<u64> =
                (0..30).map(|_| crate::binomial::sample_binomial_half(r, &mut rng)).collect();
            let zs = balanced(z.clone(), r);
            let rep = max_test(&zs, HC_EPSILON).unwrap();
            let max_w = rep.statistic;
            let min_q = z.iter().map(|&zj| kernel.two_sided_pvalue(zj).unwrap()).fold(f64::INFINITY, f64::min);
            let argmax = rep.details["argmax_column"].as_u64().unwrap() as usize - 1;
            assert_eq!(kernel.two_sided_pvalue(z[argmax]).unwrap(), min_q, "max W at {max_w}");
        }
    }

    #[test]
    fn sign_flip_invariance() {
        let mut rng = stream(15, 0);
        let d = make_anova(8, 6).unwrap();
        let bits: Vec<u8> = (0..48).map(|_| rng.gen::<bool>() as u8).collect();
        let y = ResponseVector(bits.clone());
        let flipped = ResponseVector(bits.iter().map(|&b| 1 - b).collect());
        let a = compute_z(&d, &y).unwrap();
        let b = compute_z(&d, &flipped).unwrap();
        for (test_a, test_b) in [
            (glrt(&a, 0.0).unwrap(), glrt(&b, 0.0).unwrap()),
            (hc_statistic(&a, HC_EPSILON, false).unwrap(), hc_statistic(&b, HC_EPSILON, false).unwrap()),
            (max_test(&a, HC_EPSILON).unwrap(), max_test(&b, HC_EPSILON).unwrap()),
        ] {
            assert!((test_a.statistic - test_b.statistic).abs() < 1e-12);
        }
    }

    #[test]
    fn column_permutation_equivariance() {
        let z = vec![3u64, 7, 2, 5, 4];
        let zs = balanced(z.clone(), 8);
        let mut z_perm = z;
        z_perm.rotate_left(2);
        let zs_perm = balanced(z_perm, 8);
        for (a, b) in [
            (glrt(&zs, 0.0).unwrap(), glrt(&zs_perm, 0.0).unwrap()),
            (
                hc_statistic(&zs, HC_EPSILON, false).unwrap(),
                hc_statistic(&zs_perm, HC_EPSILON, false).unwrap(),
            ),
            (
                hc_pvalue(&zs, true, HC_EPSILON).unwrap(),
                hc_pvalue(&zs_perm, true, HC_EPSILON).unwrap(),
            ),
            (max_test(&zs, HC_EPSILON).unwrap(), max_test(&zs_perm, HC_EPSILON).unwrap()),
        ] {
            assert!((a.statistic - b.statistic).abs() < 1e-12);
        }
    }

    #[test]
    fn hc_combined_falls_back_without_g() {
        let d = make_anova(6, 4).unwrap();
        let y = ResponseVector(vec![1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0, 1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0]);
        let zs = compute_z(&d, &y).unwrap();
        let mut rng = stream(16, 0);
        let comb = hc_combined(&d, &zs, HC_EPSILON, 100, &mut rng).unwrap();
        let plain = hc_statistic(&zs, HC_EPSILON, false).unwrap();
        assert_eq!(comb.statistic, plain.statistic);
        assert_eq!(comb.details["fallback"], json!("plain-hc"));
    }

    #[test]
    fn hc_combined_with_g_runs() {
        let g: Vec<Vec<u32>> = (0..6).map(|i| vec![i, (i + 1) % 8]).collect();
        let bd = make_block_diagonal(8, &vec![(4, 1); 8], g).unwrap();
        let d = &bd.design;
        let mut rng = stream(17, 0);
        let y_bits: Vec<u8> = (0..d.n()).map(|_| rng.gen::<bool>() as u8).collect();
        let zs = compute_z(d, &ResponseVector(y_bits)).unwrap();
        let rep = hc_combined(d, &zs, HC_EPSILON, 2000, &mut rng).unwrap();
        assert!(rep.statistic.is_finite());
        assert!(rep.details.contains_key("g_component"));
    }
}
