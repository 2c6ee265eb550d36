//! Bayesian and empirical-Bayes variable selection for linear regression.
//!
//! All `2^m` subsets of `m ≤ 25` candidate regressors are enumerated. Each model is
//! scored by a g-prior or Zellner–Siow Bayes factor against the null or full model,
//! combined with a fixed, beta-binomial, or estimated (Type-II MLE) model prior, and
//! summarized by inclusion probabilities. Divergence tools compare the fully Bayes and
//! empirical-Bayes answers, and [`sim`] runs seeded Monte Carlo studies of both.

pub mod divergence;
pub mod empirical_bayes;
pub mod error;
pub mod marginal;
pub mod parallel;
pub mod posterior;
pub mod priors;
pub mod quadrature;
pub mod regression;
pub mod sim;
pub mod special;

pub use empirical_bayes::{type2_mle, EbEstimate};
pub use error::{Error, Result};
pub use marginal::{score_table, Base, GFamily, GPriorSpec, ModelScoreTable, Scorer};
pub use parallel::Backend;
pub use posterior::{posterior, PosteriorSummary};
pub use priors::PriorSpec;
pub use regression::{enumerate_scores, load_csv, r_squared, Dataset, ModelId};
