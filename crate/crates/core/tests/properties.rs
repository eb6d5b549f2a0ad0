//! Randomized property tests for the library invariants.

use proptest::prelude::*;

use sparse_detect::binomial::BinomialHalfKernel;
use sparse_detect::boundary::{rho_star, signal_from_t, t_from_signal, BoundaryFamily};
use sparse_detect::design::{load_design, save_design, BinaryDesign, DesignFormat};
use sparse_detect::model::LinkFunction;
use sparse_detect::risk::estimate_empirical_risk;
use sparse_detect::stats::{glrt, hc_ideal, hc_pvalue, hc_statistic, max_test, ZStatistics};

fn balanced(z: Vec<u64>, r: u64) -> ZStatistics {
    let p = z.len();
    ZStatistics { z, r: vec![r; p], z_g: vec![0; p], g: vec![0; p] }
}

fn z_vector(r: u64) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0..=r, 4..60)
}

/// Counts restricted to the interior 1..r-1: every strict p-value is then
/// positive, so all HC variants are fully defined.
fn interior_z_vector(r: u64) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1..r, 4..60)
}

proptest! {
    #[test]
    fn pvalue_symmetric_and_probability(r in 1u64..200, z_frac in 0.0f64..=1.0) {
        let z = (z_frac * r as f64).round() as u64;
        let kernel = BinomialHalfKernel::new(r).unwrap();
        let q = kernel.two_sided_pvalue(z).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert_eq!(q, kernel.two_sided_pvalue(r - z).unwrap());
    }

    #[test]
    fn survival_nonincreasing(r in 1u64..150, a in 0.0f64..15.0, b in 0.0f64..15.0) {
        let kernel = BinomialHalfKernel::new(r).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(kernel.standardized_survival(hi) <= kernel.standardized_survival(lo));
    }

    #[test]
    fn statistics_sign_flip_invariant(z in z_vector(12)) {
        let r = 12u64;
        let zs = balanced(z.clone(), r);
        let flipped = balanced(z.iter().map(|&v| r - v).collect(), r);
        let a = glrt(&zs, 0.0).unwrap().statistic;
        let b = glrt(&flipped, 0.0).unwrap().statistic;
        prop_assert!((a - b).abs() < 1e-10);
        let a = hc_statistic(&zs, 0.05, false).unwrap().statistic;
        let b = hc_statistic(&flipped, 0.05, false).unwrap().statistic;
        prop_assert!((a - b).abs() < 1e-10);
        let a = max_test(&zs, 0.05).unwrap().statistic;
        let b = max_test(&flipped, 0.05).unwrap().statistic;
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn statistics_permutation_equivariant(z in interior_z_vector(10), rot in 0usize..50) {
        let r = 10u64;
        let zs = balanced(z.clone(), r);
        let mut perm = z;
        let rot = rot % perm.len();
        perm.rotate_left(rot);
        let zp = balanced(perm, r);
        for (a, b) in [
            (glrt(&zs, 0.0).unwrap(), glrt(&zp, 0.0).unwrap()),
            (hc_statistic(&zs, 0.05, false).unwrap(), hc_statistic(&zp, 0.05, false).unwrap()),
            (hc_pvalue(&zs, true, 0.05).unwrap(), hc_pvalue(&zp, true, 0.05).unwrap()),
            (max_test(&zs, 0.05).unwrap(), max_test(&zp, 0.05).unwrap()),
        ] {
            prop_assert!((a.statistic - b.statistic).abs() < 1e-10);
        }
    }

    // The chain is asserted only on datasets where the p-value statistic is
    // fully defined: a count at 0 or r has a strict p-value of exactly zero,
    // whose term is formally infinite and is skipped instead.
    #[test]
    fn proposition_chain(z in interior_z_vector(16)) {
        let zs = balanced(z, 16);
        let hc = hc_statistic(&zs, 0.05, false).unwrap().statistic;
        let ideal = hc_ideal(&zs, 0.05, false).unwrap().statistic;
        let prime = hc_pvalue(&zs, false, 0.05).unwrap().statistic;
        prop_assert!(prime >= ideal - 1e-9);
        prop_assert!(ideal >= hc - 1e-9);
    }

    #[test]
    fn risk_bounded_and_transform_invariant(
        null in prop::collection::vec(-50.0f64..50.0, 1..40),
        alt in prop::collection::vec(-50.0f64..50.0, 1..40),
    ) {
        let (risk, stderr) = estimate_empirical_risk(&null, &alt).unwrap();
        prop_assert!((0.0..=1.0).contains(&risk));
        prop_assert!(stderr >= 0.0);
        // Strictly increasing transform: x -> x/100 then exp (avoids overflow).
        let tn: Vec<f64> = null.iter().map(|x| (x / 100.0).exp()).collect();
        let ta: Vec<f64> = alt.iter().map(|x| (x / 100.0).exp()).collect();
        let (risk_t, _) = estimate_empirical_risk(&tn, &ta).unwrap();
        prop_assert_eq!(risk, risk_t);
    }

    #[test]
    fn boundary_families_related(alpha in 0.5001f64..=1.0) {
        let lin = rho_star(BoundaryFamily::Linear, alpha).unwrap();
        let bin = rho_star(BoundaryFamily::Binomial, alpha).unwrap();
        prop_assert!((bin - lin / 4.0).abs() < 1e-14);
        for link in [LinkFunction::Logistic, LinkFunction::Probit, LinkFunction::Uniform] {
            let b = rho_star(BoundaryFamily::Binary(link), alpha).unwrap();
            prop_assert!((b * link.derivative_at_zero().powi(2) - bin).abs() < 1e-12);
            let mb = rho_star(BoundaryFamily::MaxBinary(link), alpha).unwrap();
            if alpha >= 0.75 {
                prop_assert!((mb - b).abs() < 1e-14);
            } else {
                prop_assert!(mb > b);
            }
        }
    }

    #[test]
    fn signal_round_trip(t in 0.0f64..10.0, p in 2usize..100_000, r in 1u64..100_000) {
        let a = signal_from_t(t, p, r).unwrap();
        let back = t_from_signal(a, p, r).unwrap();
        prop_assert!((back - t).abs() < 1e-9 * (1.0 + t));
    }

    #[test]
    fn design_round_trip(
        rows in prop::collection::vec(prop::collection::btree_set(0u32..12, 1..5), 1..20)
    ) {
        let rows: Vec<Vec<u32>> = rows.into_iter().map(|s| s.into_iter().collect()).collect();
        let design = BinaryDesign::from_rows(12, rows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for format in [DesignFormat::DenseCsv, DesignFormat::SparseTriplet] {
            let path = dir.path().join("d.txt");
            save_design(&design, &path, format).unwrap();
            let back = load_design(&path, format).unwrap();
            prop_assert_eq!(back.n(), design.n());
            prop_assert_eq!(back.p(), design.p());
            let a: Vec<Vec<u32>> = design.rows().map(|r| r.to_vec()).collect();
            let b: Vec<Vec<u32>> = back.rows().map(|r| r.to_vec()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn derived_design_quantities_consistent(
        rows in prop::collection::vec(prop::collection::btree_set(0u32..9, 1..4), 1..25)
    ) {
        let rows: Vec<Vec<u32>>  = rows.into_iter().map(|s| s.into_iter().collect()).collect();
        let design = BinaryDesign::from_rows(9, rows.clone()).unwrap();
        let mut r = vec![0u64; 9];
        let mut q = 0usize;
        for row in &rows {
            if row.len() == 1 {
                r[row[0] as usize] += 1;
            }
            q = q.max(row.len());
        }
        prop_assert_eq!(design.singleton_counts(), r.clone());
        prop_assert_eq!(design.max_row_support(), q);
        let n_star: u64 = r.iter().sum();
        prop_assert_eq!(design.singleton_rows(), n_star);
        prop_assert_eq!(design.residual_rows(), rows.len() as u64 - n_star);
    }
}
