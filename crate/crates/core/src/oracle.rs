//! Exact prior-integrated likelihood ratio and its null second moment, by
//! full enumeration of the prior's support/sign atoms. Intended for small
//! problems; both entry points enforce an explicit work budget.

use crate::design::BinaryDesign;
use crate::error::{Error, Result};
use crate::model::{LinkFunction, ResponseVector, Sidedness, SparseSignalPrior};

/// Enumeration budget: number of prior atoms (first moment) or atom pairs
/// (second moment) may not exceed this.
pub const ORACLE_BUDGET: u128 = 10_000_000;

fn choose(p: u64, k: u64) -> u128 {
    let k = k.min(p - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (p - i) as u128 / (i + 1) as u128;
    }
    out
}

/// Number of atoms of the prior: `C(p, k)` supports times the sign patterns.
pub fn atom_count(prior: &SparseSignalPrior) -> u128 {
    let signs: u128 = match prior.sidedness {
        Sidedness::TwoSided => 1u128 << prior.k.min(127),
        Sidedness::OneSided => 2,
    };
    choose(prior.p as u64, prior.k as u64).saturating_mul(signs)
}

/// All k-subsets of `0..p` in lexicographic order.
fn subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + p - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Per-row linear predictors `x_i' beta` for every prior atom.
fn atom_predictors(
    design: &BinaryDesign,
    prior: &SparseSignalPrior,
) -> Vec<Vec<f64>> {
    let a = prior.signal_strength;
    let mut out = Vec::new();
    for support in subsets(prior.p, prior.k) {
        let mut member = vec![false; prior.p];
        for &j in &support {
            member[j] = true;
        }
        match prior.sidedness {
            Sidedness::TwoSided => {
                for mask in 0u64..(1u64 << prior.k) {
                    let mut signed = vec![0.0f64; prior.p];
                    for (bit, &j) in support.iter().enumerate() {
                        signed[j] = if mask & (1 << bit) != 0 { a } else { -a };
                    }
                    out.push(predictors(design, &signed));
                }
            }
            Sidedness::OneSided => {
                for sign in [1.0f64, -1.0] {
                    let mut signed = vec![0.0f64; prior.p];
                    for &j in &support {
                        signed[j] = sign * a;
                    }
                    out.push(predictors(design, &signed));
                }
            }
        }
    }
    out
}

fn predictors(design: &BinaryDesign, beta: &[f64]) -> Vec<f64> {
    design
        .rows()
        .map(|row| row.iter().map(|&j| beta[j as usize]).sum())
        .collect()
}

/// Exact prior-integrated likelihood ratio of the observed response:
/// the average over atoms of `prod_i 2 theta((2 y_i - 1) x_i' beta)`.
pub fn bayes_lr(
    design: &BinaryDesign,
    y: &ResponseVector,
    prior: &SparseSignalPrior,
    link: LinkFunction,
) -> Result<f64> {
    if prior.p != design.p() {
        return Err(Error::invalid(format!(
            "prior dimension {} does not match design p={}",
            prior.p,
            design.p()
        )));
    }
    if y.len() != design.n() {
        return Err(Error::invalid(format!(
            "response length {} does not match design n={}",
            y.len(),
            design.n()
        )));
    }
    let atoms = atom_count(prior);
    if atoms > ORACLE_BUDGET {
        return Err(Error::UnsupportedSize(format!(
            "prior has {atoms} atoms, exceeding the enumeration budget {ORACLE_BUDGET}"
        )));
    }
    let signs: Vec<f64> = y.0.iter().map(|&b| 2.0 * b as f64 - 1.0).collect();
    let preds = atom_predictors(design, prior);
    let mut total = 0.0f64;
    for xb in &preds {
        let mut term = 1.0f64;
        for (i, &v) in xb.iter().enumerate() {
            term *= 2.0 * link.evaluate(signs[i] * v);
        }
        total += term;
    }
    Ok(total / preds.len() as f64)
}

/// Exact null second moment `E_H0[L^2]`: the average over atom pairs of
/// `prod_i 2 [theta(u_i) theta(v_i) + theta(-u_i) theta(-v_i)]` with
/// `u = X beta`, `v = X beta'`.
pub fn bayes_lr_second_moment(
    design: &BinaryDesign,
    prior: &SparseSignalPrior,
    link: LinkFunction,
) -> Result<f64> {
    if prior.p != design.p() {
        return Err(Error::invalid(format!(
            "prior dimension {} does not match design p={}",
            prior.p,
            design.p()
        )));
    }
    let atoms = atom_count(prior);
    if atoms.saturating_mul(atoms) > ORACLE_BUDGET {
        return Err(Error::UnsupportedSize(format!(
            "{atoms}^2 atom pairs exceed the enumeration budget {ORACLE_BUDGET}"
        )));
    }
    let preds = atom_predictors(design, prior);
    let mut total = 0.0f64;
    for u in &preds {
        for v in &preds {
            let mut term = 1.0f64;
            for i in 0..u.len() {
                term *= 2.0
                    * (link.evaluate(u[i]) * link.evaluate(v[i])
                        + link.evaluate(-u[i]) * link.evaluate(-v[i]));
            }
            total += term;
        }
    }
    Ok(total / (preds.len() as f64).powi(2))
}
