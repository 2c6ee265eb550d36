//! Prior probabilities over model space.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_beta, ln_choose, xlogy_pair};

/// How the model prior `p(M_γ)` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Independent inclusion with known probability `p`.
    FixedP { p: f64 },
    /// `p` integrated out under `Beta(a, b)`.
    BetaBinomial {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    /// `p` replaced by its Type-II maximum-likelihood estimate.
    EmpiricalBayes,
}

fn one() -> f64 {
    1.0
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::uniform_beta_binomial()
    }
}

impl PriorSpec {
    pub fn fixed_p(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!(
                "fixed inclusion probability must lie in (0, 1), got {p}"
            )));
        }
        Ok(PriorSpec::FixedP { p })
    }

    pub fn beta_binomial(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!(
                "beta-binomial parameters must be positive, got ({a}, {b})"
            )));
        }
        Ok(PriorSpec::BetaBinomial { a, b })
    }

    pub fn uniform_beta_binomial() -> Self {
        PriorSpec::BetaBinomial { a: 1.0, b: 1.0 }
    }

    /// Reject user-supplied values outside the open domains.
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorSpec::FixedP { p } => Self::fixed_p(p).map(|_| ()),
            PriorSpec::BetaBinomial { a, b } => Self::beta_binomial(a, b).map(|_| ()),
            PriorSpec::EmpiricalBayes => Ok(()),
        }
    }

    /// Short label used in output column names.
    pub fn label(&self) -> String {
        match *self {
            PriorSpec::FixedP { p } if p == 0.5 => "uncorrected".to_owned(),
            PriorSpec::FixedP { p } => format!("fixed_{p}"),
            PriorSpec::BetaBinomial { a, b } if a == 1.0 && b == 1.0 => "fb".to_owned(),
            PriorSpec::BetaBinomial { a, b } => format!("fb_{a}_{b}"),
            PriorSpec::EmpiricalBayes => "eb".to_owned(),
        }
    }
}

/// `log p(M_γ)` for a model of size `k` under independent inclusion with probability `p`.
///
/// `p` may be 0 or 1 here (the degenerate empirical-Bayes outcomes); models that are
/// impossible then get `-inf`.
pub fn log_prior_fixed_p(k: usize, m: usize, p: f64) -> f64 {
    debug_assert!(k <= m);
    xlogy_pair(k as f64, (m - k) as f64, p)
}

/// `log β(a+k, b+m-k) - log β(a, b)`.
pub fn log_prior_beta_binomial(k: usize, m: usize, a: f64, b: f64) -> f64 {
    debug_assert!(k <= m);
    if a == 1.0 && b == 1.0 {
        return -((m + 1) as f64).ln() - ln_choose(m, k);
    }
    ln_beta(a + k as f64, b + (m - k) as f64) - ln_beta(a, b)
}

/// Laplace approximation to the uniform beta-binomial model prior.
///
/// Valid for model sizes with `k/m` away from the boundary; `[0.05, 0.95]` is enforced.
pub fn log_prior_laplace(k: usize, m: usize) -> Result<f64> {
    if m == 0 || k > m {
        return Err(Error::Regime(format!("k = {k}, m = {m}")));
    }
    let q = k as f64 / m as f64;
    if !(0.05..=0.95).contains(&q) {
        return Err(Error::Regime(format!(
            "k/m = {q} outside [0.05, 0.95]"
        )));
    }
    let mf = m as f64;
    let hyper_density = 1.0;
    Ok(xlogy_pair(k as f64, mf - k as f64, q)
        + 0.5 * (2.0 * std::f64::consts::PI * q * (1.0 - q) * hyper_density / mf).ln())
}

/// Per-size log prior of a single model under `BetaBinomial(1, 1)`, for `k = 0..=m`.
pub fn penalty_curve(m: usize) -> Result<Vec<(usize, f64)>> {
    if m == 0 {
        return Err(Error::invalid("penalty curve needs m >= 1"));
    }
    Ok((0..=m)
        .map(|k| (k, log_prior_beta_binomial(k, m, 1.0, 1.0)))
        .collect())
}

pub fn write_penalty_csv<W: Write>(m: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "log_prior"])?;
    for (k, v) in penalty_curve(m)? {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::log_sum_exp;

    #[test]
    fn half_is_flat() {
        for m in [1usize, 5, 17] {
            for k in 0..=m {
                let v = log_prior_fixed_p(k, m, 0.5);
                assert!((v + m as f64 * 2f64.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_p_direct_substitution() {
        let v = log_prior_fixed_p(0, 10, 0.1);
        assert!((v - 10.0 * 0.9f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_fixed_p() {
        assert_eq!(log_prior_fixed_p(0, 5, 0.0), 0.0);
        assert_eq!(log_prior_fixed_p(1, 5, 0.0), f64::NEG_INFINITY);
        assert_eq!(log_prior_fixed_p(5, 5, 1.0), 0.0);
    }

    #[test]
    fn priors_normalize_over_model_space() {
        for m in 1..=12usize {
            let fixed: Vec<f64> = (0..1u64 << m)
                .map(|b| log_prior_fixed_p(b.count_ones() as usize, m, 0.3))
                .collect();
            let bb: Vec<f64> = (0..1u64 << m)
                .map(|b| log_prior_beta_binomial(b.count_ones() as usize, m, 1.0, 1.0))
                .collect();
            let bb2: Vec<f64> = (0..1u64 << m)
                .map(|b| log_prior_beta_binomial(b.count_ones() as usize, m, 2.5, 0.7))
                .collect();
            for lp in [fixed, bb, bb2] {
                assert!(log_sum_exp(&lp).abs() < 1e-10, "m = {m}");
            }
        }
    }

    #[test]
    fn uniform_beta_binomial_marginal_inclusion_is_half() {
        for m in 1..=12usize {
            let incl: f64 = (0..1u64 << m)
                .filter(|b| b & 1 == 1)
                .map(|b| log_prior_beta_binomial(b.count_ones() as usize, m, 1.0, 1.0).exp())
                .sum();
            assert!((incl - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn fixed_p_odds_ignore_m() {
        // {x1} vs {} under p = 0.2
        let odds = |m: usize| log_prior_fixed_p(1, m, 0.2) - log_prior_fixed_p(0, m, 0.2);
        for m in [2usize, 10, 50, 500] {
            assert!((odds(m) - odds(1)).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_odds_at_thirty() {
        let r01 = (log_prior_beta_binomial(0, 30, 1.0, 1.0)
            - log_prior_beta_binomial(1, 30, 1.0, 1.0))
        .exp();
        assert!((r01 - 30.0).abs() < 1e-9);
        let r910 = (log_prior_beta_binomial(9, 30, 1.0, 1.0)
            - log_prior_beta_binomial(10, 30, 1.0, 1.0))
        .exp();
        // C(30,10) / C(30,9) = 21/10
        assert!((r910 - 2.1).abs() < 1e-9);
    }

    #[test]
    fn penalty_curve_shape() {
        let c = penalty_curve(30).unwrap();
        let argmin = c
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmin, 15);
        assert!((c[0].1 - c[30].1).abs() < 1e-12);
        let c60 = penalty_curve(60).unwrap();
        assert!(((c60[0].1 - c60[1].1).exp() - 60.0).abs() < 1e-8);
    }

    #[test]
    fn laplace_tracks_exact() {
        let ratio = |k, m| {
            (log_prior_laplace(k, m).unwrap() - log_prior_beta_binomial(k, m, 1.0, 1.0)).exp()
        };
        let r100 = ratio(50, 100);
        assert!((0.95..=1.05).contains(&r100), "{r100}");
        let r400 = ratio(200, 400);
        assert!((0.99..=1.01).contains(&r400), "{r400}");
        let expected = -100.0 * 2f64.ln() + 0.5 * (2.0 * std::f64::consts::PI * 0.25 / 100.0).ln();
        assert!((log_prior_laplace(50, 100).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn laplace_regime_guard() {
        assert!(matches!(log_prior_laplace(1, 100), Err(Error::Regime(_))));
        assert!(matches!(log_prior_laplace(99, 100), Err(Error::Regime(_))));
    }

    #[test]
    fn user_fixed_p_rejects_boundary() {
        assert!(PriorSpec::fixed_p(0.0).is_err());
        assert!(PriorSpec::fixed_p(1.0).is_err());
        assert!(PriorSpec::beta_binomial(0.0, 1.0).is_err());
    }
}
