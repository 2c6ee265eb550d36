use rand_distr::{Beta, Distribution};

use super::config::{PLaw, ScenarioConfig};
use super::rng::{Purpose, Substream};
use crate::error::{Error, Result};
use crate::regression::{Dataset, ModelId};

/// Fresh designs tried before giving up on a singular `X_γ'X_γ`.
pub const MAX_REDRAWS: u8 = 10;

#[derive(Debug, Clone)]
pub struct Replicate {
    pub dataset: Dataset,
    pub true_model: ModelId,
    pub beta: Vec<f64>,
    pub p_true: f64,
    pub redraws: u8,
}

fn beta_draw(s: &mut Substream, a: f64, b: f64) -> Result<f64> {
    let law = Beta::new(a, b).map_err(|e| Error::invalid(format!("beta law: {e}")))?;
    Ok(law.sample(s.rng()))
}

fn draw_p(cfg: &ScenarioConfig, rep: u64) -> Result<f64> {
    let mut s = Substream::new(cfg.seed, rep, Purpose::InclusionProbability, 0);
    match &cfg.p_law {
        PLaw::Uniform => Ok(s.uniform()),
        PLaw::Beta { a, b } => beta_draw(&mut s, *a, *b),
        PLaw::BetaMixture { w, a1, b1, a2, b2 } => {
            if s.uniform() < *w {
                beta_draw(&mut s, *a1, *b1)
            } else {
                beta_draw(&mut s, *a2, *b2)
            }
        }
        PLaw::Fixed { p } => Ok(*p),
        PLaw::TableOne { signal_betas, .. } => {
            let nonzero = signal_betas.iter().filter(|b| **b != 0.0).count();
            Ok(nonzero as f64 / cfg.m as f64)
        }
    }
}

/// Lower Cholesky factor of a dense symmetric matrix, `None` when not positive definite.
fn cholesky(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (0..j).map(|t| l[i * k + t] * l[j * k + t]).sum();
            if i == j {
                let d = a[i * k + i] - s;
                if !(d > 1e-10 * a[i * k + i]) {
                    return None;
                }
                l[i * k + i] = d.sqrt();
            } else {
                l[i * k + j] = (a[i * k + j] - s) / l[j * k + j];
            }
        }
    }
    Some(l)
}

/// Solve `L' x = z` by back substitution.
fn back_solve_transpose(l: &[f64], k: usize, z: &[f64]) -> Vec<f64> {
    let mut x = z.to_vec();
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|t| l[t * k + i] * x[t]).sum();
        x[i] = (x[i] - s) / l[i * k + i];
    }
    x
}

fn draw_design(cfg: &ScenarioConfig, rep: u64, attempt: u8) -> Vec<Vec<f64>> {
    let mut s = Substream::new(cfg.seed, rep, Purpose::Design, attempt);
    (0..cfg.m)
        .map(|_| (0..cfg.n).map(|_| s.normal()).collect())
        .collect()
}

/// One simulated dataset.
///
/// `X` is `n × m` standard normal. Outside the fixed-signal mode, `p` comes from the
/// configured law, `γ_i ~ Bernoulli(p)`, `g = n / z²` (inverse-gamma with kernel
/// `g^{-3/2} e^{-n/(2g)}`) and `β_γ ~ N(0, g (X_γ'X_γ)⁻¹)`. The noise is standard normal.
pub fn generate_replicate(cfg: &ScenarioConfig, rep: usize) -> Result<Replicate> {
    let rep_id = rep as u64;
    let (m, n) = (cfg.m, cfg.n);
    let p_true = draw_p(cfg, rep_id)?;

    let (true_model, fixed_beta) = match &cfg.p_law {
        PLaw::TableOne { signal_betas, .. } => {
            let mut beta = signal_betas.clone();
            beta.resize(m, 0.0);
            let model = ModelId::from_vars((0..m).filter(|&j| beta[j] != 0.0));
            (model, Some(beta))
        }
        _ => {
            let mut s = Substream::new(cfg.seed, rep_id, Purpose::Indicators, 0);
            let model = ModelId::from_vars((0..m).filter(|_| s.uniform() < p_true));
            (model, None)
        }
    };
    let vars: Vec<usize> = true_model.vars().collect();
    let k = vars.len();

    let mut attempt = 0u8;
    let (columns, beta) = loop {
        let columns = draw_design(cfg, rep_id, attempt);
        if let Some(beta) = &fixed_beta {
            break (columns, beta.clone());
        }
        // the intercept is integrated out, so the prior scale uses the centered design
        let centered: Vec<Vec<f64>> = vars
            .iter()
            .map(|&j| {
                let mean = columns[j].iter().sum::<f64>() / n as f64;
                columns[j].iter().map(|x| x - mean).collect()
            })
            .collect();
        let mut gram = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..=a {
                let v: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
                gram[a * k + b] = v;
                gram[b * k + a] = v;
            }
        }
        match cholesky(&gram, k) {
            Some(l) => {
                let mut gs = Substream::new(cfg.seed, rep_id, Purpose::GScale, attempt);
                let z = gs.normal();
                let g = n as f64 / (z * z);
                let mut cs = Substream::new(cfg.seed, rep_id, Purpose::Coefficients, attempt);
                let z: Vec<f64> = (0..k).map(|_| cs.normal()).collect();
                let sub = back_solve_transpose(&l, k, &z);
                let mut beta = vec![0.0; m];
                for (a, &j) in vars.iter().enumerate() {
                    beta[j] = g.sqrt() * sub[a];
                }
                break (columns, beta);
            }
            None if attempt + 1 < MAX_REDRAWS => attempt += 1,
            None => {
                return Err(Error::RankDeficient {
                    bits: true_model.bits(),
                })
            }
        }
    };

    let mut ns = Substream::new(cfg.seed, rep_id, Purpose::Noise, 0);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let signal: f64 = vars.iter().map(|&j| columns[j][i] * beta[j]).sum();
            signal + ns.normal()
        })
        .collect();
    let names = (0..m).map(|j| format!("x{j}")).collect();
    let dataset = Dataset::from_columns("y", y, names, columns)?;
    Ok(Replicate {
        dataset,
        true_model,
        beta,
        p_true,
        redraws: attempt,
    })
}
