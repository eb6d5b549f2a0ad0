//! Binary design matrices: generators, structure audits, and the
//! nondetectability estimator.
//!
//! A design is stored by row supports. Balanced one-way (ANOVA) layouts use a
//! compact implicit representation so that desk-scale parameter studies can
//! reference designs with hundreds of millions of rows without materializing
//! them.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone)]
enum Repr {
    /// Balanced design: column `j` owns rows `j*r .. (j+1)*r`, each `{j}`.
    Anova { r: u64, cols: Vec<u32> },
    /// General sparse rows in CSR form.
    General {
        offsets: Vec<usize>,
        cols: Vec<u32>,
        /// Singleton-row count per column (`r_j`).
        r: Vec<u64>,
        /// Total nonzero count per column.
        col_totals: Vec<u64>,
        /// Maximum row support size.
        q: usize,
    },
}

/// Sparse 0/1 design matrix with derived orthogonal/residual structure.
#[derive(Debug, Clone)]
pub struct BinaryDesign {
    n: usize,
    p: usize,
    repr: Repr,
}

impl BinaryDesign {
    /// Build from explicit row supports (0-based column indices).
    pub fn from_rows(p: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("p must be positive"));
        }
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut r = vec![0u64; p];
        let mut col_totals = vec![0u64; p];
        let mut q = 0usize;
        offsets.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::invalid(format!("row {} repeats column {}", i + 1, w[0] + 1)));
                }
            }
            if let Some(&last) = row.last() {
                if last as usize >= p {
                    return Err(Error::invalid(format!(
                        "row {} references column {} but p={p}",
                        i + 1,
                        last + 1
                    )));
                }
            }
            q = q.max(row.len());
            if row.len() == 1 {
                r[row[0] as usize] += 1;
            }
            for &j in &row {
                col_totals[j as usize] += 1;
            }
            cols.extend_from_slice(&row);
            offsets.push(cols.len());
        }
        Ok(Self { n, p, repr: Repr::General { offsets, cols, r, col_totals, q } })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Support of row `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        match &self.repr {
            Repr::Anova { r, cols } => {
                let j = i / *r as usize;
                std::slice::from_ref(&cols[j])
            }
            Repr::General { offsets, cols, .. } => &cols[offsets[i]..offsets[i + 1]],
        }
    }

    /// Iterate all row supports in order.
    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    /// `r_j`: number of singleton rows supported on column `j`.
    pub fn singleton_count(&self, j: usize) -> u64 {
        match &self.repr {
            Repr::Anova { r, .. } => *r,
            Repr::General { r, .. } => r[j],
        }
    }

    pub fn singleton_counts(&self) -> Vec<u64> {
        match &self.repr {
            Repr::Anova { r, .. } => vec![*r; self.p],
            Repr::General { r, .. } => r.clone(),
        }
    }

    /// `g_j`: column sum over the rows outside the singleton part.
    pub fn residual_column_count(&self, j: usize) -> u64 {
        match &self.repr {
            Repr::Anova { .. } => 0,
            Repr::General { r, col_totals, .. } => col_totals[j] - r[j],
        }
    }

    /// Maximum row support size `Q`.
    pub fn max_row_support(&self) -> usize {
        match &self.repr {
            Repr::Anova { .. } => 1,
            Repr::General { q, .. } => *q,
        }
    }

    /// `n* = sum_j r_j`, the number of singleton rows.
    pub fn singleton_rows(&self) -> u64 {
        match &self.repr {
            Repr::Anova { r, .. } => *r * self.p as u64,
            Repr::General { r, .. } => r.iter().sum(),
        }
    }

    /// `n_* = n - n*`, the number of residual (G) rows.
    pub fn residual_rows(&self) -> u64 {
        self.n as u64 - self.singleton_rows()
    }

    /// Indices of the rows outside the singleton part, in order.
    pub fn residual_row_indices(&self) -> Vec<usize> {
        match &self.repr {
            Repr::Anova { .. } => Vec::new(),
            Repr::General { offsets, .. } => (0..self.n)
                .filter(|&i| offsets[i + 1] - offsets[i] != 1)
                .collect(),
        }
    }

    fn is_anova(&self) -> Option<u64> {
        match &self.repr {
            Repr::Anova { r, .. } => Some(*r),
            Repr::General { .. } => None,
        }
    }
}

/// Balanced one-way layout: each column has exactly `r` singleton rows.
pub fn make_anova(p: usize, r: u64) -> Result<BinaryDesign> {
    if p == 0 || r == 0 {
        return Err(Error::invalid("p and r must be positive"));
    }
    Ok(BinaryDesign {
        n: p * r as usize,
        p,
        repr: Repr::Anova { r, cols: (0..p as u32).collect() },
    })
}

/// A block-diagonal design plus its summary parameters.
#[derive(Debug, Clone)]
pub struct BlockDesign {
    pub design: BinaryDesign,
    /// `c* = max_j c_j`, the largest block row count.
    pub c_star: usize,
    /// `l* = max_j d_j`, the largest block column count.
    pub l_star: usize,
}

impl BlockDesign {
    /// Does the design fall in the nondetectable regime: `c* < log p / slack`
    /// with the residual union small (`|U S_i| < p / slack`)?
    pub fn nondetect_verdict(&self, p: usize, slack: f64) -> (bool, bool) {
        let log_p = (p as f64).ln();
        let union = residual_union(&self.design) as f64;
        ((self.c_star as f64) < log_p / slack, union < p as f64 / slack)
    }
}

/// Block-diagonal design: block `j` is a `c_j x d_j` all-ones block on
/// consecutive columns, followed by optional arbitrary residual rows.
pub fn make_block_diagonal(
    p: usize,
    block_dims: &[(usize, usize)],
    g_rows: Vec<Vec<u32>>,
) -> Result<BlockDesign> {
    let total_cols: usize = block_dims.iter().map(|&(_, d)| d).sum();
    if total_cols > p {
        return Err(Error::invalid(format!(
            "blocks span {total_cols} columns but p={p}; column ranges would overlap or overflow"
        )));
    }
    let mut rows = Vec::new();
    let mut col0 = 0u32;
    let mut c_star = 0usize;
    let mut l_star = 0usize;
    for &(c, d) in block_dims {
        if c == 0 || d == 0 {
            return Err(Error::invalid("block dimensions must be positive"));
        }
        c_star = c_star.max(c);
        l_star = l_star.max(d);
        for _ in 0..c {
            rows.push((col0..col0 + d as u32).collect());
        }
        col0 += d as u32;
    }
    rows.extend(g_rows);
    let design = BinaryDesign::from_rows(p, rows)?;
    Ok(BlockDesign { design, c_star, l_star })
}

/// A banded design plus its bandwidth.
#[derive(Debug, Clone)]
pub struct BandedDesign {
    pub design: BinaryDesign,
    /// `l2 - l1`.
    pub bandwidth: usize,
}

impl BandedDesign {
    /// True when `bandwidth < log p / slack` (nondetectable regime).
    pub fn nondetect_verdict(&self, p: usize, slack: f64) -> bool {
        (self.bandwidth as f64) < (p as f64).ln() / slack
    }
}

/// Banded design: row `i` (1-based) supports columns `[i - l1, i + l2]`
/// clipped to `[1, p]`.
pub fn make_banded(n: usize, p: usize, l1: usize, l2: usize) -> Result<BandedDesign> {
    if l2 <= l1 {
        return Err(Error::invalid(format!("banded design requires l2 > l1 (got l1={l1}, l2={l2})")));
    }
    let mut rows = Vec::with_capacity(n);
    for i in 1..=n as i64 {
        let lo = (i - l1 as i64).max(1);
        let hi = (i + l2 as i64).min(p as i64);
        if lo > hi {
            rows.push(Vec::new());
        } else {
            rows.push((lo..=hi).map(|j| (j - 1) as u32).collect());
        }
    }
    let design = BinaryDesign::from_rows(p, rows)?;
    Ok(BandedDesign { design, bandwidth: l2 - l1 })
}

/// Generate a weakly correlated design: an unbalanced singleton part with
/// `r_j` uniform in `[r_low, r_high]`, plus `n_g` residual rows each with
/// support size uniform in `[2, q_g]` and uniformly chosen columns.
pub fn make_weakly_correlated(
    p: usize,
    r_low: u64,
    r_high: u64,
    n_g: usize,
    q_g: usize,
    rng: &mut RngStream,
) -> Result<BinaryDesign> {
    use rand::Rng;
    if r_low == 0 || r_low > r_high {
        return Err(Error::invalid("need 1 <= r_low <= r_high"));
    }
    if n_g > 0 && q_g < 2 {
        return Err(Error::invalid("residual rows require q_g >= 2"));
    }
    let mut rows = Vec::new();
    for j in 0..p as u32 {
        let r_j = rng.gen_range(r_low..=r_high);
        for _ in 0..r_j {
            rows.push(vec![j]);
        }
    }
    for _ in 0..n_g {
        let size = rng.gen_range(2..=q_g.min(p));
        let mut support: Vec<u32> = sample(rng, p, size).iter().map(|j| j as u32).collect();
        support.sort_unstable();
        rows.push(support);
    }
    BinaryDesign::from_rows(p, rows)
}

/// Size of the union of supports over the rows outside the singleton part.
pub fn residual_union(design: &BinaryDesign) -> usize {
    let mut seen = vec![false; design.p()];
    let mut count = 0usize;
    for i in design.residual_row_indices() {
        for &j in design.row(i) {
            if !seen[j as usize] {
                seen[j as usize] = true;
                count += 1;
            }
        }
    }
    count
}

/// Structure audit of a design against the weakly-correlated conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    pub n: usize,
    pub p: usize,
    pub r_star: u64,
    pub r_sub: u64,
    pub n_star: u64,
    pub n_sub: u64,
    pub q: usize,
    /// `n_* Q^2 / r^*`.
    pub c3_ratio: f64,
    pub c3_ratio_over_p_quarter: f64,
    pub c3_ratio_over_sqrt_p: f64,
    pub c3_ratio_over_log_p: f64,
    pub union_offdiag: usize,
    pub slack: f64,
    pub verdicts: BTreeMap<String, bool>,
}

/// Audit with the default slack factor of 1.
pub fn audit(design: &BinaryDesign, p_for_ratios: usize) -> StructureReport {
    audit_with_slack(design, p_for_ratios, 1.0)
}

/// Compute the structure parameters and decisive finite-sample verdicts.
///
/// An asymptotic condition `x << y` is flagged true when `x < y / slack`.
pub fn audit_with_slack(design: &BinaryDesign, p_for_ratios: usize, slack: f64) -> StructureReport {
    let r = design.singleton_counts();
    let r_star = r.iter().copied().max().unwrap_or(0);
    let r_sub = r.iter().copied().min().unwrap_or(0);
    let n_star = design.singleton_rows();
    let n_sub = design.residual_rows();
    let q = design.max_row_support();
    let pf = p_for_ratios as f64;
    let c3_ratio = if n_sub == 0 {
        0.0
    } else {
        n_sub as f64 * (q as f64).powi(2) / r_star as f64
    };
    let log_p = pf.ln();
    let union = residual_union(design);
    let mut verdicts = BTreeMap::new();
    verdicts.insert("c3_gamma_log_p".to_string(), c3_ratio < log_p / slack);
    verdicts.insert("c3_gamma_sqrt_p".to_string(), c3_ratio < pf.sqrt() / slack);
    verdicts.insert("c3_gamma_p_quarter".to_string(), c3_ratio < pf.powf(0.25) / slack);
    verdicts.insert("r_star_ll_log_p".to_string(), (r_star as f64) < log_p / slack);
    verdicts.insert("union_offdiag_ll_p".to_string(), (union as f64) < pf / slack);
    StructureReport {
        n: design.n(),
        p: design.p(),
        r_star,
        r_sub,
        n_star,
        n_sub,
        q,
        c3_ratio,
        c3_ratio_over_p_quarter: c3_ratio / pf.powf(0.25),
        c3_ratio_over_sqrt_p: c3_ratio / pf.sqrt(),
        c3_ratio_over_log_p: c3_ratio / log_p,
        union_offdiag: union,
        slack,
        verdicts,
    }
}

/// Sampled falsifier for the row-intersection nondetectability condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondetectEstimate {
    pub sigma_p: u32,
    pub samples: usize,
    /// Largest observed `count / N` over sampled support pairs.
    pub delta_hat: f64,
    /// `log p`.
    pub threshold: f64,
    pub slack: f64,
    /// Pairs with no close elements but a positive intersection count.
    pub violations: usize,
    pub verdict: bool,
}

/// Rows of the design intersecting both supports, and the number of `m2`
/// elements within `sigma_p` of some element of `m1`.
pub(crate) fn pair_counts(
    design: &BinaryDesign,
    m1: &[u32],
    m2: &[u32],
    sigma_p: u32,
) -> (u64, u64) {
    let close = m2
        .iter()
        .filter(|&&j2| m1.iter().any(|&j1| j1.abs_diff(j2) <= sigma_p))
        .count() as u64;
    let count = if let Some(r) = design.is_anova() {
        let overlap = m2.iter().filter(|j2| m1.contains(j2)).count() as u64;
        overlap * r
    } else {
        let mut in1 = vec![false; design.p()];
        let mut in2 = vec![false; design.p()];
        for &j in m1 {
            in1[j as usize] = true;
        }
        for &j in m2 {
            in2[j as usize] = true;
        }
        design
            .rows()
            .filter(|row| {
                row.iter().any(|&j| in1[j as usize]) && row.iter().any(|&j| in2[j as usize])
            })
            .count() as u64
    };
    (count, close)
}

/// Draw `n_pairs` pairs of uniform `k`-subsets and record the worst
/// intersection-count ratio. A sampling check can only falsify the
/// condition; exact verification needs exhaustive pair enumeration.
pub fn estimate_nondetect_condition(
    design: &BinaryDesign,
    k: usize,
    sigma_p: u32,
    n_pairs: usize,
    rng: &mut RngStream,
) -> Result<NondetectEstimate> {
    estimate_nondetect_with_slack(design, k, sigma_p, n_pairs, 1.0, rng)
}

pub fn estimate_nondetect_with_slack(
    design: &BinaryDesign,
    k: usize,
    sigma_p: u32,
    n_pairs: usize,
    slack: f64,
    rng: &mut RngStream,
) -> Result<NondetectEstimate> {
    let p = design.p();
    if k == 0 || k > p {
        return Err(Error::invalid(format!("k={k} must lie in [1, p={p}]")));
    }
    if n_pairs == 0 {
        return Err(Error::invalid("need at least one sampled pair"));
    }
    let mut delta_hat = 0.0f64;
    let mut violations = 0usize;
    for _ in 0..n_pairs {
        let m1: Vec<u32> = sample(rng, p, k).iter().map(|j| j as u32).collect();
        let m2: Vec<u32> = sample(rng, p, k).iter().map(|j| j as u32).collect();
        let (count, close) = pair_counts(design, &m1, &m2, sigma_p);
        if close == 0 {
            if count > 0 {
                violations += 1;
            }
        } else {
            delta_hat = delta_hat.max(count as f64 / close as f64);
        }
    }
    let threshold = (p as f64).ln();
    Ok(NondetectEstimate {
        sigma_p,
        samples: n_pairs,
        delta_hat,
        threshold,
        slack,
        violations,
        verdict: violations == 0 && delta_hat < threshold / slack,
    })
}

/// Default closeness radius: `ceil(log p)`.
pub fn default_sigma_p(p: usize) -> u32 {
    (p as f64).ln().ceil() as u32
}

/// On-disk design formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignFormat {
    /// Header-free rows of comma-separated 0/1 entries.
    DenseCsv,
    /// A leading line `n,p`, then 1-based lines `i,j`.
    SparseTriplet,
}

impl std::str::FromStr for DesignFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-csv" => Ok(DesignFormat::DenseCsv),
            "sparse-triplet" => Ok(DesignFormat::SparseTriplet),
            other => Err(Error::invalid(format!("unknown design format '{other}'"))),
        }
    }
}

pub fn load_design(path: &Path, format: DesignFormat) -> Result<BinaryDesign> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    let parse_err = |line: usize, message: String| Error::Parse { path: path.into(), line, message };
    match format {
        DesignFormat::DenseCsv => {
            let mut rows = Vec::new();
            let mut p = 0usize;
            for (idx, line) in text.lines().enumerate() {
                let lineno = idx + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let mut row = Vec::new();
                for (col, field) in line.split(',').enumerate() {
                    match field.trim() {
                        "0" => {}
                        "1" => row.push(col as u32),
                        other => {
                            return Err(parse_err(
                                lineno,
                                format!("non-binary entry '{other}' in column {}", col + 1),
                            ))
                        }
                    }
                    p = p.max(col + 1);
                }
                rows.push(row);
            }
            if rows.is_empty() {
                return Err(parse_err(1, "empty design file".into()));
            }
            BinaryDesign::from_rows(p, rows)
        }
        DesignFormat::SparseTriplet => {
            let mut lines = text.lines().enumerate();
            let (_, header) = lines
                .next()
                .ok_or_else(|| parse_err(1, "missing 'n,p' header line".into()))?;
            let (n, p) = parse_pair(header)
                .ok_or_else(|| parse_err(1, format!("expected 'n,p' header, found '{header}'")))?;
            if n == 0 || p == 0 {
                return Err(parse_err(1, "n and p must be positive".into()));
            }
            let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
            for (idx, line) in lines {
                let lineno = idx + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let (i, j) = parse_pair(line)
                    .ok_or_else(|| parse_err(lineno, format!("expected 'i,j', found '{line}'")))?;
                if i == 0 || i > n {
                    return Err(parse_err(lineno, format!("row index {i} outside 1..={n}")));
                }
                if j == 0 || j > p {
                    return Err(parse_err(lineno, format!("column index {j} outside 1..={p}")));
                }
                rows[i - 1].push((j - 1) as u32);
            }
            BinaryDesign::from_rows(p, rows)
        }
    }
}

pub fn save_design(design: &BinaryDesign, path: &Path, format: DesignFormat) -> Result<()> {
    let mut out = String::new();
    match format {
        DesignFormat::DenseCsv => {
            for row in design.rows() {
                let mut dense = vec![b'0'; design.p()];
                for &j in row {
                    dense[j as usize] = b'1';
                }
                let mut first = true;
                for b in dense {
                    if !first {
                        out.push(',');
                    }
                    out.push(b as char);
                    first = false;
                }
                out.push('\n');
            }
        }
        DesignFormat::SparseTriplet => {
            out.push_str(&format!("{},{}\n", design.n(), design.p()));
            for (i, row) in design.rows().enumerate() {
                for &j in row {
                    out.push_str(&format!("{},{}\n", i + 1, j + 1));
                }
            }
        }
    }
    let mut file = fs::File::create(path).map_err(|source| Error::Io { path: path.into(), source })?;
    file.write_all(out.as_bytes()).map_err(|source| Error::Io { path: path.into(), source })
}

fn parse_pair(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split(',');
    let a = it.next()?.trim().parse().ok()?;
    let b = it.next()?.trim().parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((a, b))
}
