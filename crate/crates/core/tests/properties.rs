use proptest::prelude::*;

use rctsub::diagnostics::{bootstrap_ci, coverage, odds_ratio};
use rctsub::estimators::{exact_backdoor_binary, parametric_backdoor, DiffInMeans};
use rctsub::sampler::{estimate_m_bound, rct_rejection_sample, selection_sample, ACCEPTANCE_SLACK};
use rctsub::{ConfoundingFunction, Monomial, SeededRng, SparseBinaryMatrix, TabularDataset};

/// Rows of (c, t, y) with both arms present.
fn small_rct() -> impl Strategy<Value = TabularDataset> {
    prop::collection::vec((0u8..2, 0u8..2, -5.0f64..5.0), 4..60).prop_map(|mut rows| {
        rows[0].1 = 0;
        rows[1].1 = 1;
        let c = rows.iter().map(|r| r.0 as f64).collect();
        let t = rows.iter().map(|r| r.1).collect();
        let y = rows.iter().map(|r| r.2).collect();
        TabularDataset::try_new(vec!["C".into()], vec![c], t, y).unwrap()
    })
}

fn piecewise() -> impl Strategy<Value = ConfoundingFunction> {
    (0.01f64..0.99, 0.01f64..0.99).prop_map(|(z0, z1)| ConfoundingFunction::piecewise("C", z0, z1))
}

proptest! {
    #[test]
    fn acceptance_never_exceeds_one(d in small_rct(), f in piecewise(), seed in any::<u64>()) {
        // M need not reach 1 on a tiny RCT, but it must dominate every
        // observed row's likelihood ratio.
        let m = estimate_m_bound(&d, &f).unwrap();
        let p1 = f.evaluate_column(&d).unwrap();
        let n = d.n_rows() as f64;
        let n1 = d.treatment().iter().filter(|&&t| t == 1).count() as f64;
        for (&t, p) in d.treatment().iter().zip(p1) {
            let ratio = if t == 1 { p / (n1 / n) } else { (1.0 - p) / (1.0 - n1 / n) };
            prop_assert!(ratio <= m * (1.0 + 1e-12));
        }
        match rct_rejection_sample(&d, &f, &mut SeededRng::new(seed)) {
            Ok(report) => {
                prop_assert!(report.acceptance_probabilities.iter().all(|&a| a > 0.0 && a <= 1.0 + ACCEPTANCE_SLACK));
            }
            Err(e) => prop_assert!(matches!(e, rctsub::Error::EmptySample { .. }), "{}", e),
        }
    }

    #[test]
    fn sampled_rows_are_an_ordered_unchanged_subset(d in small_rct(), f in piecewise(), seed in any::<u64>()) {
        for report in [
            rct_rejection_sample(&d, &f, &mut SeededRng::new(seed)),
            selection_sample(&d, &f, &mut SeededRng::new(seed)),
        ]
        .into_iter()
        .flatten()
        {
            prop_assert!(report.retained.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(report.output.n_rows(), report.retained.len());
            for (k, &i) in report.retained.iter().enumerate() {
                prop_assert_eq!(report.output.treatment()[k], d.treatment()[i]);
                prop_assert_eq!(report.output.outcome()[k], d.outcome()[i]);
                prop_assert_eq!(report.output.covariates()[0][k], d.covariates()[0][i]);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic(d in small_rct(), f in piecewise(), seed in any::<u64>()) {
        let a = rct_rejection_sample(&d, &f, &mut SeededRng::new(seed)).map(|r| r.retained);
        let b = rct_rejection_sample(&d, &f, &mut SeededRng::new(seed)).map(|r| r.retained);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn saturated_parametric_equals_exact_backdoor(d in small_rct()) {
        let terms: Vec<Monomial> = vec!["C".parse().unwrap(), "T*C".parse().unwrap()];
        match exact_backdoor_binary(&d, "C") {
            Ok(exact) => {
                let param = parametric_backdoor(&d, &terms).unwrap();
                prop_assert!((exact.point_estimate - param.point_estimate).abs() < 1e-8);
            }
            Err(e) => prop_assert!(matches!(e, rctsub::Error::EmptyCell { .. }), "{}", e),
        }
    }

    #[test]
    fn bootstrap_interval_is_ordered(d in small_rct(), seed in any::<u64>()) {
        let ci = bootstrap_ci(&d, &DiffInMeans, 50, 0.95, &mut SeededRng::new(seed)).unwrap();
        prop_assert!(ci.lo <= ci.hi);
    }

    #[test]
    fn coverage_is_a_fraction(ivs in prop::collection::vec((-3.0f64..3.0, 0.0f64..3.0), 1..40), truth in -3.0f64..3.0) {
        let ivs: Vec<(f64, f64)> = ivs.into_iter().map(|(lo, w)| (lo, lo + w)).collect();
        let r = coverage(&ivs, truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.coverage));
        prop_assert!(r.n_covered <= r.n_seeds);
    }

    #[test]
    fn odds_ratio_is_symmetric(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..100)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let ab = odds_ratio(&a, &b).unwrap().value;
        let ba = odds_ratio(&b, &a).unwrap().value;
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
    }

    #[test]
    fn sparse_rows_are_normalized(rows in prop::collection::vec(prop::collection::vec(0u32..20, 0..10), 0..10)) {
        let m = SparseBinaryMatrix::from_rows(20, rows.clone()).unwrap();
        for (i, raw) in rows.iter().enumerate() {
            let mut expect = raw.clone();
            expect.sort_unstable();
            expect.dedup();
            prop_assert_eq!(m.row(i), &expect[..]);
        }
    }
}
