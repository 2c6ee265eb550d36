//! Divergences between fully Bayes and empirical-Bayes distributions.
//!
//! Covers discrete KL and squared Hellinger distance on model space, the closed-form
//! prior information gaps between the uniform beta-binomial prior and a Bernoulli(p̂)
//! prior, the prior-probability ratio near the true model size, and the orthogonal
//! normal-means example where the same comparison is available in closed form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::PosteriorSummary;
use crate::priors::{log_prior_beta_binomial, log_prior_fixed_p};
use crate::special::{ln_choose, xlogy_pair, LogSumExp};

const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// `KL(P ∥ Q)`, `+inf` when P puts mass where Q has none.
    pub kl: f64,
    pub hellinger_sq: f64,
    pub support_violation: bool,
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("probabilities must be finite and non-negative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::invalid(format!(
            "probability vector sums to {total}, not 1"
        )));
    }
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    check_distribution(p)?;
    check_distribution(q)
}

/// `Σ P_i log(P_i / Q_i)` with `0 log(0/q) = 0`.
pub fn kl_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(divergence(p, q)?.kl)
}

/// `½ Σ (√P_i - √Q_i)²`.
pub fn hellinger_sq_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(divergence(p, q)?.hellinger_sq)
}

pub fn divergence(p: &[f64], q: &[f64]) -> Result<DivergenceReport> {
    check_pair(p, q)?;
    let mut kl = 0.0;
    let mut support_violation = false;
    let mut h = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi == 0.0 {
                support_violation = true;
            } else {
                kl += pi * (pi / qi).ln();
            }
        }
        let d = pi.sqrt() - qi.sqrt();
        h += d * d;
    }
    Ok(DivergenceReport {
        kl: if support_violation {
            f64::INFINITY
        } else {
            kl.max(0.0)
        },
        hellinger_sq: (0.5 * h).clamp(0.0, 1.0),
        support_violation,
    })
}

/// Same as [`divergence`] on log-probabilities; avoids spurious zeros from underflow.
pub fn divergence_from_logs(log_p: &[f64], log_q: &[f64]) -> Result<DivergenceReport> {
    if log_p.len() != log_q.len() {
        return Err(Error::DimensionMismatch {
            left: log_p.len(),
            right: log_q.len(),
        });
    }
    let mut kl = 0.0;
    let mut h = 0.0;
    let mut support_violation = false;
    for (&lp, &lq) in log_p.iter().zip(log_q) {
        if lp > f64::NEG_INFINITY {
            if lq == f64::NEG_INFINITY {
                support_violation = true;
            } else {
                kl += lp.exp() * (lp - lq);
            }
        }
        let d = (0.5 * lp).exp() - (0.5 * lq).exp();
        h += d * d;
    }
    Ok(DivergenceReport {
        kl: if support_violation {
            f64::INFINITY
        } else {
            kl.max(0.0)
        },
        hellinger_sq: (0.5 * h).clamp(0.0, 1.0),
        support_violation,
    })
}

/// Model-space divergence of the fully Bayes posterior from the empirical-Bayes one.
pub fn posterior_gap(fb: &PosteriorSummary, eb: &PosteriorSummary) -> Result<DivergenceReport> {
    if fb.m != eb.m {
        return Err(Error::DimensionMismatch {
            left: fb.m,
            right: eb.m,
        });
    }
    divergence_from_logs(&fb.log_posterior, &eb.log_posterior)
}

fn check_p_hat(p_hat: f64) -> Result<()> {
    if !(p_hat > 0.0 && p_hat < 1.0) {
        return Err(Error::invalid(format!("p̂ must lie in (0, 1), got {p_hat}")));
    }
    Ok(())
}

/// `KL(p_F ∥ p_E)` between the uniform beta-binomial model prior and Bernoulli(p̂).
///
/// Both priors depend on a model only through its size, so the `2^m` sum collapses to
/// `m + 1` terms, each with weight `1/(m+1)`.
pub fn prior_gap_kl(m: usize, p_hat: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    check_p_hat(p_hat)?;
    let mp1 = (m + 1) as f64;
    let inner: f64 = (0..=m)
        .map(|k| ln_choose(m, k) + xlogy_pair(k as f64, (m - k) as f64, p_hat))
        .sum();
    Ok(-mp1.ln() - inner / mp1)
}

/// The information gap at its minimizer `p̂ = 1/2`.
pub fn min_prior_gap_kl(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    let mp1 = (m + 1) as f64;
    let mean_log_choose = (0..=m).map(|k| ln_choose(m, k)).sum::<f64>() / mp1;
    Ok((m as f64 * std::f64::consts::LN_2 - mp1.ln() - mean_log_choose).max(0.0))
}

/// `H²(p_F ∥ p_E) = 1 - (m+1)^(-1/2) Σ_k √(C(m,k) p̂^k (1-p̂)^(m-k))`.
pub fn prior_gap_hellinger(m: usize, p_hat: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    check_p_hat(p_hat)?;
    let mut acc = LogSumExp::default();
    for k in 0..=m {
        acc.push(0.5 * (ln_choose(m, k) + xlogy_pair(k as f64, (m - k) as f64, p_hat)));
    }
    let bc = (acc.value() - 0.5 * ((m + 1) as f64).ln()).exp();
    Ok((1.0 - bc).clamp(0.0, 1.0))
}

pub fn min_prior_gap_hellinger(m: usize) -> Result<f64> {
    prior_gap_hellinger(m, 0.5)
}

/// `√m · p_F(M_γ) / p_E(M_γ)` for a model of size `k` when the empirical-Bayes
/// estimate equals the true inclusion probability `p_t`.
///
/// Restricted to sizes within `3√m` of `p_t · m`.
pub fn prior_ratio_check(m: usize, p_t: f64, k: usize) -> Result<f64> {
    if m == 0 || k > m {
        return Err(Error::Regime(format!("k = {k}, m = {m}")));
    }
    if !(p_t > 0.0 && p_t < 1.0) {
        return Err(Error::Regime(format!("p_T = {p_t} outside (0, 1)")));
    }
    let center = (p_t * m as f64).round();
    let window = 3.0 * (m as f64).sqrt();
    if (k as f64 - center).abs() > window {
        return Err(Error::Regime(format!(
            "|k - round(p_T m)| = {} exceeds 3√m = {window}",
            (k as f64 - center).abs()
        )));
    }
    let log_fb = log_prior_beta_binomial(k, m, 1.0, 1.0);
    let log_eb = log_prior_fixed_p(k, m, p_t);
    Ok((m as f64).sqrt() * (log_fb - log_eb).exp())
}

/// Prior variance `A` of the normal-means hyperparameter; `Infinite` is the flat prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperVariance {
    Finite(f64),
    Infinite,
}

impl HyperVariance {
    /// `mA / (mA + 2)`.
    fn shrink_ratio(self, m: f64) -> f64 {
        match self {
            HyperVariance::Finite(a) => m * a / (m * a + 2.0),
            HyperVariance::Infinite => 1.0,
        }
    }

    /// `1 / (mA + 2)`.
    fn mean_shift(self, m: f64) -> f64 {
        match self {
            HyperVariance::Finite(a) => 1.0 / (m * a + 2.0),
            HyperVariance::Infinite => 0.0,
        }
    }

    /// `A / (2(mA + 2))`, the coefficient of `11ᵗ` in the fully Bayes covariance.
    fn rank_one(self, m: f64) -> f64 {
        match self {
            HyperVariance::Finite(a) => a / (2.0 * (m * a + 2.0)),
            HyperVariance::Infinite => 1.0 / (2.0 * m),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            HyperVariance::Finite(a) if !(a > 0.0 && a.is_finite()) => Err(Error::invalid(
                format!("hyperprior variance must be positive, got {a}"),
            )),
            _ => Ok(()),
        }
    }
}

/// `y_i ~ N(θ_i, 1)`, `θ_i ~ N(μ, 1)`; EB plugs in `μ̂ = ȳ`, FB puts `μ ~ N(0, A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalMeansScenario {
    pub m: usize,
    pub a: HyperVariance,
    pub mu_true: f64,
    pub y: Vec<f64>,
}

impl NormalMeansScenario {
    pub fn new(a: HyperVariance, mu_true: f64, y: Vec<f64>) -> Result<Self> {
        let s = Self {
            m: y.len(),
            a,
            mu_true,
            y,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.y.len() != self.m {
            return Err(Error::invalid("normal-means scenario needs m = len(y) >= 1"));
        }
        self.a.validate()
    }

    pub fn y_bar(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.m as f64
    }
}

/// `N(mean, diag·I + rank_one·11ᵗ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub diag: f64,
    pub rank_one: f64,
}

/// Empirical-Bayes and fully Bayes posteriors of `θ`.
pub fn normal_means_posteriors(
    s: &NormalMeansScenario,
) -> Result<(GaussianPosterior, GaussianPosterior)> {
    s.validate()?;
    let m = s.m as f64;
    let y_bar = s.y_bar();
    let eb_mean: Vec<f64> = s.y.iter().map(|y| 0.5 * (y + y_bar)).collect();
    let shift = s.a.mean_shift(m) * y_bar;
    let fb_mean = eb_mean.iter().map(|v| v - shift).collect();
    Ok((
        GaussianPosterior {
            mean: eb_mean,
            diag: 0.5,
            rank_one: 0.0,
        },
        GaussianPosterior {
            mean: fb_mean,
            diag: 0.5,
            rank_one: s.a.rank_one(m),
        },
    ))
}

/// `KL(π_F ∥ π_E)` for the whole mean vector.
pub fn normal_means_kl(s: &NormalMeansScenario) -> Result<f64> {
    s.validate()?;
    Ok(kl_vector(s.m, s.a, s.y_bar()))
}

/// `KL(π_F ∥ π_E)` for the marginal of `θ_1` only.
pub fn normal_means_kl_single(s: &NormalMeansScenario) -> Result<f64> {
    s.validate()?;
    Ok(kl_single(s.m, s.a, s.y_bar()))
}

pub fn kl_vector(m: usize, a: HyperVariance, y_bar: f64) -> f64 {
    let mf = m as f64;
    let r = a.shrink_ratio(mf);
    let c = a.mean_shift(mf);
    0.5 * (-r.ln_1p() + r + 2.0 * mf * c * c * y_bar * y_bar)
}

pub fn kl_single(m: usize, a: HyperVariance, y_bar: f64) -> f64 {
    let mf = m as f64;
    // variance ratio σ_F²/σ_E² = 1 + x
    let x = 2.0 * a.rank_one(mf);
    let diff = a.mean_shift(mf) * y_bar;
    0.5 * (x - x.ln_1p() + 2.0 * diff * diff)
}

/// Information-gap curves for plotting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapCurve {
    Kl,
    Hellinger,
}

pub fn write_gap_curve_csv<W: Write>(curve: GapCurve, m_max: usize, out: W) -> Result<()> {
    if m_max == 0 {
        return Err(Error::invalid("m_max must be at least 1"));
    }
    let mut w = csv::Writer::from_writer(out);
    let name = match curve {
        GapCurve::Kl => "kl_gap",
        GapCurve::Hellinger => "hellinger_gap",
    };
    w.write_record(["m", name])?;
    for m in 1..=m_max {
        let v = match curve {
            GapCurve::Kl => min_prior_gap_kl(m)?,
            GapCurve::Hellinger => min_prior_gap_hellinger(m)?,
        };
        w.write_record([m.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })
}
