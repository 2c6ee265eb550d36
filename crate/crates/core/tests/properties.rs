mod common;

use common::random_dataset;
use multibayes::divergence::{
    divergence, min_prior_gap_kl, normal_means_kl, prior_gap_kl, HyperVariance,
    NormalMeansScenario,
};
use multibayes::empirical_bayes::{eb_objective, type2_mle};
use multibayes::marginal::{score_table_with, ModelScoreTable};
use multibayes::posterior::posterior;
use multibayes::priors::log_prior_fixed_p;
use multibayes::regression::{enumerate_r2, enumerate_scores_with};
use multibayes::{r_squared, Backend, Dataset, GPriorSpec, ModelId, PriorSpec};
use proptest::prelude::*;

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1usize..=8, 0usize..30, any::<u64>())
        .prop_map(|(m, extra, seed)| random_dataset(seed, m + 3 + extra, m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn r2_is_monotone_under_nesting(ds in dataset_strategy()) {
        let r2 = enumerate_r2(&ds, Backend::Sequential).unwrap();
        for (bits, &v) in r2.iter().enumerate() {
            for j in 0..ds.m() {
                let sup = bits | 1 << j;
                prop_assert!(v <= r2[sup] + 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_agrees_with_direct_fits(ds in dataset_strategy()) {
        for s in enumerate_scores_with(&ds, Backend::Sequential).unwrap() {
            let direct = r_squared(&ds, s.model).unwrap();
            prop_assert!((s.r2 - direct.r2).abs() < 1e-9);
            prop_assert_eq!(s.k, s.model.size());
        }
    }

    #[test]
    fn backends_produce_identical_r2(ds in dataset_strategy()) {
        let a = enumerate_r2(&ds, Backend::Sequential).unwrap();
        let b = enumerate_r2(&ds, Backend::ParallelWith(3)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn centering_is_idempotent(ds in dataset_strategy()) {
        let again = ds.recentered().unwrap();
        for j in 0..ds.m() {
            for (a, b) in ds.column(j).iter().zip(again.column(j)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
        for (a, b) in ds.y().iter().zip(again.y()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bayes_factors_ignore_column_scale(ds in dataset_strategy(), scale in 1e-3f64..1e3, col in 0usize..8) {
        let col = col % ds.m();
        let mut columns = ds.columns().to_vec();
        columns[col].iter_mut().for_each(|v| *v *= scale);
        let scaled = Dataset::from_columns("y", ds.y().to_vec(), ds.names().to_vec(), columns).unwrap();
        let spec = GPriorSpec::default();
        let a = score_table_with(&ds, spec, Backend::Sequential).unwrap();
        let b = score_table_with(&scaled, spec, Backend::Sequential).unwrap();
        for (x, y) in a.log_ml().iter().zip(b.log_ml()) {
            prop_assert!((x - y).abs() < 1e-8 * x.abs().max(1.0));
        }
    }

    #[test]
    fn eb_estimate_ignores_additive_shift(ds in dataset_strategy(), c in -500.0f64..500.0) {
        let table = score_table_with(&ds, GPriorSpec::default(), Backend::Sequential).unwrap();
        let a = type2_mle(&table);
        let b = type2_mle(&table.shifted(c));
        prop_assert!((a.p_hat - b.p_hat).abs() < 1e-7, "{} {}", a.p_hat, b.p_hat);
        prop_assert_eq!(a.degenerate, b.degenerate);
    }

    #[test]
    fn eb_estimate_beats_a_fine_grid(ds in dataset_strategy()) {
        let table = score_table_with(&ds, GPriorSpec::default(), Backend::Sequential).unwrap();
        let est = type2_mle(&table);
        let best = eb_objective(&est.size_sums, est.p_hat);
        let points = 100_000;
        for i in 0..=points {
            let p = i as f64 / points as f64;
            let v = eb_objective(&est.size_sums, p);
            prop_assert!(best >= v - 1e-12 * v.abs().max(1.0), "p̂={} p={p} {best} < {v}", est.p_hat);
        }
    }

    #[test]
    fn posterior_is_normalized(ds in dataset_strategy(), p in 0.01f64..0.99) {
        let table = score_table_with(&ds, GPriorSpec::default(), Backend::Sequential).unwrap();
        for prior in [PriorSpec::FixedP { p }, PriorSpec::uniform_beta_binomial(), PriorSpec::EmpiricalBayes] {
            let s = posterior(&table, prior).unwrap();
            let total: f64 = s.probabilities().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            for &v in &s.inclusion {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn fixed_p_odds_do_not_depend_on_m(p in 0.01f64..0.99, k1 in 0usize..6, k2 in 0usize..6, m in 6usize..40) {
        let odds = |m: usize| log_prior_fixed_p(k1, m, p) - log_prior_fixed_p(k2, m, p);
        prop_assert!((odds(m) - odds(m + 17)).abs() < 1e-10);
    }

    #[test]
    fn divergences_are_bounded(raw_p in prop::collection::vec(0.0f64..1.0, 2..12), raw_q in prop::collection::vec(0.01f64..1.0, 12)) {
        let n = raw_p.len();
        let sp: f64 = raw_p.iter().sum::<f64>() + 1e-3;
        let p: Vec<f64> = raw_p.iter().enumerate().map(|(i, v)| (v + if i == 0 { 1e-3 } else { 0.0 }) / sp).collect();
        let sq: f64 = raw_q[..n].iter().sum();
        let q: Vec<f64> = raw_q[..n].iter().map(|v| v / sq).collect();
        let d = divergence(&p, &q).unwrap();
        prop_assert!(d.kl >= -1e-12);
        prop_assert!((0.0..=1.0).contains(&d.hellinger_sq));
        prop_assert!(!d.support_violation);
        let same = divergence(&p, &p).unwrap();
        prop_assert!(same.kl.abs() < 1e-14 && same.hellinger_sq.abs() < 1e-14);
    }

    #[test]
    fn normal_means_kl_depends_on_ybar_only(y in prop::collection::vec(-5.0f64..5.0, 1..20), a in 0.1f64..10.0, rot in 0usize..20) {
        let mut rotated = y.clone();
        let len = rotated.len();
        rotated.rotate_left(rot % len);
        rotated.reverse();
        for hyper in [HyperVariance::Finite(a), HyperVariance::Infinite] {
            let s1 = NormalMeansScenario::new(hyper, 0.0, y.clone()).unwrap();
            let s2 = NormalMeansScenario::new(hyper, 0.0, rotated.clone()).unwrap();
            let (k1, k2) = (normal_means_kl(&s1).unwrap(), normal_means_kl(&s2).unwrap());
            prop_assert!((k1 - k2).abs() < 1e-12 * k1.abs().max(1.0));
        }
    }
}

#[test]
fn prior_gap_minimizer_is_one_half() {
    for m in 1..=20 {
        let closed = min_prior_gap_kl(m).unwrap();
        let grid_min = (1..2000)
            .map(|i| prior_gap_kl(m, i as f64 / 2000.0).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((grid_min - closed).abs() < 1e-8, "m={m} {grid_min} {closed}");
    }
}

#[test]
fn prior_gap_strictly_increasing() {
    let g: Vec<f64> = (2..=200).map(|m| min_prior_gap_kl(m).unwrap()).collect();
    assert!(g.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn degenerate_eb_gives_point_mass_and_infinite_gap() {
    let m = 4;
    // null model strictly best
    let mut log_ml = vec![-3.0; 1 << m];
    log_ml[0] = 0.0;
    let table = ModelScoreTable::from_log_ml(m, log_ml).unwrap();
    let eb = posterior(&table, PriorSpec::EmpiricalBayes).unwrap();
    assert_eq!(eb.p_point, 0.0);
    assert_eq!(eb.probability(ModelId::NULL), 1.0);
    let fb = posterior(&table, PriorSpec::uniform_beta_binomial()).unwrap();
    let gap = multibayes::divergence::posterior_gap(&fb, &eb).unwrap();
    assert_eq!(gap.kl, f64::INFINITY);
    assert!(gap.support_violation);
}
