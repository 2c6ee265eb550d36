use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::GPriorSpec;
use crate::priors::PriorSpec;
use crate::regression::ENUMERATION_CAP;

/// Largest allowed `reps · 2^m`.
pub const COST_LIMIT: u128 = 1_000_000_000;

/// Nonzero coefficients of the signal-plus-noise experiment.
pub const TABLE_ONE_SIGNAL: [f64; 10] = [-1.08, -0.84, -0.74, 0.63, -0.51, 0.41, 0.35, -0.30, 0.18, 0.07];

/// Law of the true inclusion probability (or a fixed design for the signal-plus-noise run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PLaw {
    Uniform,
    Beta {
        a: f64,
        b: f64,
    },
    BetaMixture {
        w: f64,
        a1: f64,
        b1: f64,
        a2: f64,
        b2: f64,
    },
    Fixed {
        p: f64,
    },
    /// Fixed coefficients followed by `n_noise` zero coefficients.
    TableOne {
        #[serde(default = "default_signal")]
        signal_betas: Vec<f64>,
        n_noise: usize,
    },
}

fn default_signal() -> Vec<f64> {
    TABLE_ONE_SIGNAL.to_vec()
}

fn default_priors() -> Vec<PriorSpec> {
    vec![
        PriorSpec::EmpiricalBayes,
        PriorSpec::uniform_beta_binomial(),
        PriorSpec::FixedP { p: 0.5 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub m: usize,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub p_law: PLaw,
    #[serde(default = "default_priors")]
    pub prior_under_test: Vec<PriorSpec>,
    #[serde(default)]
    pub g_spec: GPriorSpec,
}

impl ScenarioConfig {
    /// Desk-scale defaults: uniform `p`, `m = 10`, `n = 60`, 2000 replicates.
    pub fn desk_default(seed: u64) -> Self {
        Self {
            m: 10,
            n: 60,
            reps: 2000,
            seed,
            p_law: PLaw::Uniform,
            prior_under_test: default_priors(),
            g_spec: GPriorSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.m == 0 || self.m > ENUMERATION_CAP {
            return Err(Error::EnumerationCap {
                m: self.m,
                cap: ENUMERATION_CAP,
            });
        }
        if self.n <= self.m + 1 {
            return Err(Error::InsufficientDof {
                n: self.n,
                k: self.m,
            });
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match &self.p_law {
            PLaw::Uniform => {}
            PLaw::Beta { a, b } if !(positive(*a) && positive(*b)) => {
                return Err(Error::invalid("beta law needs positive parameters"))
            }
            PLaw::BetaMixture { w, a1, b1, a2, b2 }
                if !((0.0..=1.0).contains(w) && [*a1, *b1, *a2, *b2].into_iter().all(positive)) =>
            {
                return Err(Error::invalid("beta mixture needs w in [0,1] and positive shapes"))
            }
            PLaw::Fixed { p } if !(0.0..=1.0).contains(p) => {
                return Err(Error::invalid("fixed p must lie in [0, 1]"))
            }
            PLaw::TableOne {
                signal_betas,
                n_noise,
            } => {
                let total = signal_betas.len() + n_noise;
                if total > ENUMERATION_CAP {
                    return Err(Error::EnumerationCap {
                        m: total,
                        cap: ENUMERATION_CAP,
                    });
                }
                if total != self.m {
                    return Err(Error::invalid(format!(
                        "m = {} but signal ({}) + noise ({n_noise}) = {total}",
                        self.m,
                        signal_betas.len()
                    )));
                }
            }
            _ => {}
        }
        for p in &self.prior_under_test {
            p.validate()?;
        }
        let has_eb = self
            .prior_under_test
            .iter()
            .any(|p| matches!(p, PriorSpec::EmpiricalBayes));
        let has_fb = self
            .prior_under_test
            .iter()
            .any(|p| matches!(p, PriorSpec::BetaBinomial { .. }));
        if !(has_eb && has_fb) {
            return Err(Error::invalid(
                "prior_under_test must contain empirical_bayes and a beta_binomial prior",
            ));
        }
        let mut labels: Vec<String> = self.prior_under_test.iter().map(PriorSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("prior_under_test contains duplicate priors"));
        }
        if let Some(g) = self.g_spec.g_for(self.n) {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid("g must be positive"));
            }
        }
        Ok(())
    }

    /// `reps · 2^m`, checked against [`COST_LIMIT`].
    pub fn check_cost(&self) -> Result<u128> {
        let cost = self.reps as u128 * (1u128 << self.m.min(100));
        if cost > COST_LIMIT {
            return Err(Error::CostGuard {
                reps: self.reps,
                m: self.m,
                cost,
                limit: COST_LIMIT,
            });
        }
        Ok(cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_config() {
        let cfg: ScenarioConfig = serde_json::from_str(
            r#"{"m": 8, "n": 40, "reps": 10, "seed": 3, "p_law": {"kind": "uniform"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.prior_under_test.len(), 3);
        assert_eq!(cfg.g_spec, GPriorSpec::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn parse_table_one() {
        let cfg: ScenarioConfig = serde_json::from_str(
            r#"{"m": 15, "n": 60, "reps": 1, "seed": 3,
                "p_law": {"kind": "table_one", "n_noise": 5}}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let bad = ScenarioConfig { m: 14, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: std::result::Result<ScenarioConfig, _> = serde_json::from_str(
            r#"{"m": 8, "n": 40, "reps": 10, "seed": 3, "p_law": {"kind": "uniform"}, "extra": 1}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn cost_guard() {
        let mut cfg = ScenarioConfig::desk_default(1);
        cfg.m = 25;
        cfg.n = 100;
        cfg.reps = 30;
        assert!(matches!(cfg.check_cost(), Err(Error::CostGuard { .. })));
        cfg.reps = 29;
        assert!(cfg.check_cost().is_ok());
    }
}
