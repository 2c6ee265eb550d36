//! Cross-checks against independent recomputation.

mod common;

use common::{random_dataset, zs_riemann};
use multibayes::divergence::{
    normal_means_kl, normal_means_posteriors, HyperVariance, NormalMeansScenario,
};
use multibayes::empirical_bayes::eb_objective;
use multibayes::marginal::{log_bf_g_full, log_bf_zs_full, log_bf_zs_null, score_table_with};
use multibayes::posterior::posterior;
use multibayes::priors::{log_prior_beta_binomial, log_prior_fixed_p};
use multibayes::regression::enumerate_scores_with;
use multibayes::{Backend, Base, GPriorSpec, ModelId, PriorSpec};
use nalgebra::{DMatrix, DVector};

/// R² by a normal-equations least-squares fit with an explicit intercept on the uncentered data.
fn oracle_r2(raw_cols: &[Vec<f64>], raw_y: &[f64], model: ModelId) -> f64 {
    let n = raw_y.len();
    let vars: Vec<usize> = model.vars().collect();
    let x = DMatrix::from_fn(n, vars.len() + 1, |i, c| {
        if c == 0 {
            1.0
        } else {
            raw_cols[vars[c - 1]][i]
        }
    });
    let y = DVector::from_column_slice(raw_y);
    let xt = x.transpose();
    let beta = (&xt * &x).full_piv_lu().solve(&(&xt * &y)).unwrap();
    let resid = &y - &x * beta;
    let mean = raw_y.iter().sum::<f64>() / n as f64;
    let sst: f64 = raw_y.iter().map(|v| (v - mean) * (v - mean)).sum();
    1.0 - resid.norm_squared() / sst
}

#[test]
fn enumeration_matches_least_squares_with_intercept() {
    for seed in 0..5u64 {
        let (n, m) = (25, 6);
        let ds = random_dataset(seed, n, m);
        // shift every column and the response: the intercept must absorb it
        let raw_cols: Vec<Vec<f64>> = (0..m)
            .map(|j| ds.column(j).iter().map(|v| v + 3.0 * j as f64 - 1.0).collect())
            .collect();
        let raw_y: Vec<f64> = ds.y().iter().map(|v| v + 10.0).collect();
        let scores = enumerate_scores_with(&ds, Backend::Sequential).unwrap();
        for s in &scores {
            let want = oracle_r2(&raw_cols, &raw_y, s.model);
            assert!((s.r2 - want).abs() < 1e-9, "{} {} {}", s.model, s.r2, want);
        }
    }
}

#[test]
fn zs_null_matches_riemann_example() {
    let (n, k, r2) = (20usize, 2usize, 0.6f64);
    let got = log_bf_zs_null(r2, n, k).unwrap();
    let want = zs_riemann((n - k - 1) as f64 / 2.0, (n - 1) as f64 / 2.0, 1.0 - r2, n);
    assert!(((got - want) / want).abs() < 1e-6, "{got} {want}");
}

#[test]
fn zs_full_with_unit_ratio_reduces_to_null_form() {
    // W = 1: ∫ (1+g)^{(n-m-1)/2} (1+g)^{-(n-k-1)/2} π(g) dg = ∫ (1+g)^{-(m-k)/2} π(g) dg
    let (n, m) = (30usize, 5usize);
    let k = m - 1;
    let got = log_bf_zs_full(0.4, 0.4, n, m, k).unwrap();
    let want = zs_riemann(-0.5, 0.0, 1.0, n);
    assert!((got - want).abs() < 1e-7 * want.abs().max(1.0), "{got} {want}");
    assert!(got < 0.0);
}

#[test]
fn full_based_literal_expression() {
    let (n, m, k, g) = (40usize, 6usize, 2usize, 12.5f64);
    let (r2g, r2f) = (0.31, 0.52);
    let w: f64 = (1.0 - r2f) / (1.0 - r2g);
    let literal = ((1.0 + g).powf((n - m - 1) as f64 / 2.0) / (1.0 + g * w).powf((n - k - 1) as f64 / 2.0)).ln();
    let got = log_bf_g_full(r2g, r2f, n, m, k, g).unwrap();
    assert!((got - literal).abs() < 1e-10);
}

/// Posterior by direct per-model products and a plain sum.
fn brute_posterior(log_ml: &[f64], log_prior: impl Fn(usize) -> f64) -> Vec<f64> {
    let w: Vec<f64> = log_ml
        .iter()
        .enumerate()
        .map(|(b, &l)| (l + log_prior((b as u64).count_ones() as usize)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

#[test]
fn posterior_matches_direct_summation() {
    let ds = random_dataset(11, 30, 5);
    let table = score_table_with(&ds, GPriorSpec::fixed_g(30.0, Base::NullBased).unwrap(), Backend::Sequential).unwrap();
    let m = 5;
    let cases: Vec<(PriorSpec, Box<dyn Fn(usize) -> f64>)> = vec![
        (PriorSpec::FixedP { p: 0.3 }, Box::new(move |k| log_prior_fixed_p(k, m, 0.3))),
        (
            PriorSpec::BetaBinomial { a: 2.0, b: 0.5 },
            Box::new(move |k| log_prior_beta_binomial(k, m, 2.0, 0.5)),
        ),
    ];
    for (prior, lp) in cases {
        let s = posterior(&table, prior).unwrap();
        let want = brute_posterior(table.log_ml(), lp);
        for (a, b) in s.probabilities().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        for j in 0..m {
            let incl: f64 = (0..want.len()).filter(|b| b >> j & 1 == 1).map(|b| want[b]).sum();
            assert!((s.inclusion[j] - incl).abs() < 1e-12);
        }
    }
}

#[test]
fn fixed_p_is_the_limit_of_concentrated_beta_binomial() {
    let ds = random_dataset(5, 40, 6);
    let table = score_table_with(&ds, GPriorSpec::default(), Backend::Sequential).unwrap();
    for p in [0.2, 0.5, 0.7] {
        let total = 1e6;
        let (a, b) = (total * p, total * (1.0 - p));
        let fixed = posterior(&table, PriorSpec::FixedP { p }).unwrap();
        let bb = posterior(&table, PriorSpec::BetaBinomial { a, b }).unwrap();
        for (x, y) in fixed.probabilities().iter().zip(bb.probabilities()) {
            assert!((x - y).abs() < 1e-4);
        }
        for (x, y) in fixed.inclusion.iter().zip(&bb.inclusion) {
            assert!((x - y).abs() < 1e-4);
        }
    }
}

#[test]
fn eb_objective_matches_direct_sum() {
    let ds = random_dataset(8, 30, 4);
    let table = score_table_with(&ds, GPriorSpec::default(), Backend::Sequential).unwrap();
    let sums = multibayes::empirical_bayes::size_log_sums(&table);
    for p in [0.01f64, 0.3, 0.77] {
        let direct: f64 = table
            .log_ml()
            .iter()
            .enumerate()
            .map(|(b, &l)| {
                let k = (b as u64).count_ones() as i32;
                l.exp() * p.powi(k) * (1.0 - p).powi(4 - k)
            })
            .sum::<f64>()
            .ln();
        assert!((eb_objective(&sums, p) - direct).abs() < 1e-12);
    }
}

fn gaussian_kl(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu0: &DVector<f64>, s0: &DMatrix<f64>) -> f64 {
    // KL(N1 ∥ N0)
    let k = mu1.len() as f64;
    let s0_inv = s0.clone().try_inverse().unwrap();
    let d = mu0 - mu1;
    0.5 * ((&s0_inv * s1).trace() + (d.transpose() * &s0_inv * &d)[(0, 0)] - k
        + s0.determinant().ln()
        - s1.determinant().ln())
}

/// θ ~ N(0, I + A 11'), y = θ + ε: condition by the Schur complement.
fn conjugate_fb(y: &[f64], a: f64) -> (DVector<f64>, DMatrix<f64>) {
    let m = y.len();
    let ones = DMatrix::from_element(m, m, 1.0);
    let s_theta = DMatrix::identity(m, m) + ones * a;
    let s_y = &s_theta + DMatrix::identity(m, m);
    let s_y_inv = s_y.try_inverse().unwrap();
    let yv = DVector::from_column_slice(y);
    let mean = &s_theta * &s_y_inv * yv;
    let cov = &s_theta - &s_theta * &s_y_inv * &s_theta;
    (mean, cov)
}

#[test]
fn normal_means_matches_conjugate_hierarchy() {
    let y = vec![0.3, -1.2, 2.5, 0.9, -0.4];
    let a = 3.0;
    let scenario = NormalMeansScenario::new(HyperVariance::Finite(a), 0.0, y.clone()).unwrap();
    let (eb, fb) = normal_means_posteriors(&scenario).unwrap();
    let (mean, cov) = conjugate_fb(&y, a);
    let m = y.len();
    for i in 0..m {
        assert!((fb.mean[i] - mean[i]).abs() < 1e-12);
        for j in 0..m {
            let v = if i == j { fb.diag } else { 0.0 } + fb.rank_one;
            assert!((v - cov[(i, j)]).abs() < 1e-12);
        }
    }
    let ybar = y.iter().sum::<f64>() / m as f64;
    let eb_mean = DVector::from_iterator(m, y.iter().map(|v| (v + ybar) / 2.0));
    for i in 0..m {
        assert!((eb.mean[i] - eb_mean[i]).abs() < 1e-12);
    }
    let eb_cov = DMatrix::identity(m, m) * 0.5;
    let want = gaussian_kl(&mean, &cov, &eb_mean, &eb_cov);
    let got = normal_means_kl(&scenario).unwrap();
    assert!((got - want).abs() < 1e-10, "{got} {want}");
}

/// Within one model size both bases are increasing in R², so their orderings agree.
/// Across sizes the R² coefficients differ (`n-1` against `n-k-1`), so the global
/// orderings can differ in a few adjacent pairs.
#[test]
fn null_and_full_bases_rank_models_alike_within_each_size() {
    let (n, m) = (60, 8);
    let ds = random_dataset(21, n, m);
    let null = score_table_with(&ds, GPriorSpec::fixed_g(n as f64, Base::NullBased).unwrap(), Backend::Sequential).unwrap();
    let full = score_table_with(&ds, GPriorSpec::fixed_g(n as f64, Base::FullBased).unwrap(), Backend::Sequential).unwrap();
    let prior = PriorSpec::uniform_beta_binomial();
    let a = posterior(&null, prior).unwrap().probabilities();
    let b = posterior(&full, prior).unwrap().probabilities();
    for k in 0..=m {
        let mut idx: Vec<usize> = (0..a.len()).filter(|b| b.count_ones() as usize == k).collect();
        let mut by_a = idx.clone();
        by_a.sort_by(|&i, &j| a[j].total_cmp(&a[i]));
        idx.sort_by(|&i, &j| b[j].total_cmp(&b[i]));
        assert_eq!(by_a, idx, "size {k}");
    }
    let top = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap();
    assert_eq!(top(&a), top(&b));
}
