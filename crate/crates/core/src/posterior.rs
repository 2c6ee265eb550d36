//! Posterior model probabilities and the summaries derived from them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::empirical_bayes::{type2_mle, EbEstimate};
use crate::error::{Error, Result};
use crate::marginal::ModelScoreTable;
use crate::priors::{log_prior_beta_binomial, log_prior_fixed_p, PriorSpec};
use crate::regression::ModelId;
use crate::special::LogSumExp;

pub const DEFAULT_TOP_MODELS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub m: usize,
    /// Normalized log posterior, indexed by bitmask. `-inf` marks zero probability.
    pub log_posterior: Vec<f64>,
    pub inclusion: Vec<f64>,
    pub median_model: ModelId,
    pub top_models: Vec<(ModelId, f64)>,
    /// `p̂` for empirical Bayes, `E[p | Y]` for beta-binomial, `p` for a fixed prior.
    pub p_point: f64,
    pub degenerate: bool,
    pub prior: PriorSpec,
    pub eb: Option<EbEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub bits: u64,
    pub probability: f64,
}

/// Wire form of a summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryJson {
    pub p_point: f64,
    pub degenerate: bool,
    pub inclusion: Vec<f64>,
    pub median_model_bits: u64,
    pub top_models: Vec<RankedModel>,
}

impl PosteriorSummary {
    pub fn probabilities(&self) -> Vec<f64> {
        self.log_posterior.iter().map(|v| v.exp()).collect()
    }

    pub fn probability(&self, model: ModelId) -> f64 {
        self.log_posterior[model.0 as usize].exp()
    }

    pub fn to_json(&self) -> SummaryJson {
        SummaryJson {
            p_point: self.p_point,
            degenerate: self.degenerate,
            inclusion: self.inclusion.clone(),
            median_model_bits: self.median_model.0,
            top_models: self
                .top_models
                .iter()
                .map(|&(id, probability)| RankedModel {
                    bits: id.0,
                    probability,
                })
                .collect(),
        }
    }

    /// CSV `variable,inclusion`; `names` falls back to `x<j>` when absent.
    pub fn write_inclusion_csv<W: Write>(&self, names: Option<&[String]>, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variable", "inclusion"])?;
        for (j, p) in self.inclusion.iter().enumerate() {
            let name = names
                .and_then(|n| n.get(j).cloned())
                .unwrap_or_else(|| format!("x{j}"));
            w.write_record([name, p.to_string()])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv>".into(),
            source,
        })
    }
}

pub fn posterior(table: &ModelScoreTable, prior: PriorSpec) -> Result<PosteriorSummary> {
    posterior_with(table, prior, DEFAULT_TOP_MODELS)
}

/// Combine marginal likelihoods with a model prior.
///
/// An empirical-Bayes prior runs the Type-II MLE first; when it lands on 0 or 1 the
/// result is an exact point mass on the null or full model and `degenerate` is set.
pub fn posterior_with(
    table: &ModelScoreTable,
    prior: PriorSpec,
    top_n: usize,
) -> Result<PosteriorSummary> {
    // p in {0, 1} is reserved for the degenerate empirical-Bayes outcome
    prior.validate()?;
    let m = table.m();
    let (size_prior, eb): (Vec<f64>, Option<EbEstimate>) = match prior {
        PriorSpec::FixedP { p } => ((0..=m).map(|k| log_prior_fixed_p(k, m, p)).collect(), None),
        PriorSpec::BetaBinomial { a, b } => (
            (0..=m)
                .map(|k| log_prior_beta_binomial(k, m, a, b))
                .collect(),
            None,
        ),
        PriorSpec::EmpiricalBayes => {
            let est = type2_mle(table);
            let p = est.p_hat;
            ((0..=m).map(|k| log_prior_fixed_p(k, m, p)).collect(), Some(est))
        }
    };

    let mut log_post: Vec<f64> = table
        .log_ml()
        .iter()
        .enumerate()
        .map(|(bits, &l)| size_prior[bits.count_ones() as usize] + l)
        .collect();
    let mut acc = LogSumExp::default();
    log_post.iter().for_each(|&v| acc.push(v));
    let norm = acc.value();
    log_post.iter_mut().for_each(|v| *v -= norm);

    let probs: Vec<f64> = log_post.iter().map(|v| v.exp()).collect();
    let inclusion = inclusion_from_probs(m, &probs);
    let median_model = median_from_inclusion(&inclusion);
    let top_models = top_models(&probs, top_n);

    let (p_point, degenerate) = match prior {
        PriorSpec::FixedP { p } => (p, false),
        PriorSpec::BetaBinomial { a, b } => {
            let mut mass = vec![0.0; m + 1];
            for (bits, &p) in probs.iter().enumerate() {
                mass[bits.count_ones() as usize] += p;
            }
            let denom = a + b + m as f64;
            let mean = mass
                .iter()
                .enumerate()
                .map(|(k, &w)| w * (a + k as f64) / denom)
                .sum();
            (mean, false)
        }
        PriorSpec::EmpiricalBayes => {
            let est = eb.as_ref().expect("estimate present");
            (est.p_hat, est.degenerate)
        }
    };

    Ok(PosteriorSummary {
        m,
        log_posterior: log_post,
        inclusion,
        median_model,
        top_models,
        p_point,
        degenerate,
        prior,
        eb,
    })
}

/// `Σ_{γ ∋ i} p(γ)`: masks containing bit `i` form runs of length `2^i`.
fn inclusion_from_probs(m: usize, probs: &[f64]) -> Vec<f64> {
    (0..m)
        .map(|i| {
            let run = 1usize << i;
            probs
                .chunks_exact(2 * run)
                .map(|block| block[run..].iter().sum::<f64>())
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect()
}

fn median_from_inclusion(inclusion: &[f64]) -> ModelId {
    ModelId::from_vars(
        inclusion
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= 0.5)
            .map(|(i, _)| i),
    )
}

fn top_models(probs: &[f64], top_n: usize) -> Vec<(ModelId, f64)> {
    let cmp = |a: &usize, b: &usize| {
        probs[*b]
            .partial_cmp(&probs[*a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    };
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    let keep = top_n.min(idx.len());
    if keep == 0 {
        return Vec::new();
    }
    if keep < idx.len() {
        idx.select_nth_unstable_by(keep - 1, cmp);
        idx.truncate(keep);
    }
    idx.sort_unstable_by(cmp);
    idx.into_iter()
        .map(|i| (ModelId(i as u64), probs[i]))
        .collect()
}

/// Variables with posterior inclusion probability at least one half.
pub fn median_probability_model(summary: &PosteriorSummary) -> ModelId {
    median_from_inclusion(&summary.inclusion)
}

/// Posterior under the generating inclusion probability.
pub fn oracle_posterior(table: &ModelScoreTable, p_true: f64) -> Result<PosteriorSummary> {
    posterior(table, PriorSpec::fixed_p(p_true)?)
}

/// `Σ_j |a_j - b_j|` over inclusion probabilities.
pub fn l1_oracle_distance(a: &PosteriorSummary, oracle: &PosteriorSummary) -> Result<f64> {
    l1_distance(&a.inclusion, &oracle.inclusion)
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// Variables with inclusion above one half whose true coefficient is zero.
pub fn false_positive_count(summary: &PosteriorSummary, true_model: ModelId) -> usize {
    summary
        .inclusion
        .iter()
        .enumerate()
        .filter(|&(j, &p)| p > 0.5 && !true_model.contains(j))
        .count()
}
