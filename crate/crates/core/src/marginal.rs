//! Bayes factors under fixed-g and Zellner–Siow priors, and per-model score tables.
//!
//! All marginal likelihoods are expressed relative to a base model: the null model
//! (intercept only) or the full model. Entries of a [`ModelScoreTable`] are
//! `log f(Y | M_γ) - log f(Y | M_base)`, so the base entry is exactly zero.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::parallel::{self, Backend};
use crate::quadrature::adaptive_simpson;
use crate::regression::{self, full_mask, Dataset};
use crate::special::softplus;

/// Upper clamp applied to R² before any logarithm of `1 - R²` is taken.
pub const R2_CEILING: f64 = 1.0 - 1e-15;

/// Relative tolerance requested from the Zellner–Siow quadrature.
pub const ZS_REL_TOL: f64 = 1e-10;

const ZS_MAX_EVALS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GFamily {
    /// Fixed g; `None` means the unit-information choice `g = n`.
    FixedG {
        #[serde(default)]
        g: Option<f64>,
    },
    ZellnerSiow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    #[default]
    NullBased,
    FullBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GPriorSpec {
    pub family: GFamily,
    #[serde(default)]
    pub base: Base,
}

impl Default for GPriorSpec {
    fn default() -> Self {
        Self {
            family: GFamily::ZellnerSiow,
            base: Base::NullBased,
        }
    }
}

impl GPriorSpec {
    pub fn fixed_g(g: f64, base: Base) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::invalid(format!("g must be positive, got {g}")));
        }
        Ok(Self {
            family: GFamily::FixedG { g: Some(g) },
            base,
        })
    }

    pub fn zellner_siow(base: Base) -> Self {
        Self {
            family: GFamily::ZellnerSiow,
            base,
        }
    }

    /// The g used for a dataset of `n` observations (fixed-g families only).
    pub fn g_for(&self, n: usize) -> Option<f64> {
        match self.family {
            GFamily::FixedG { g } => Some(g.unwrap_or(n as f64)),
            GFamily::ZellnerSiow => None,
        }
    }
}

fn check_dof(n: usize, k: usize) -> Result<()> {
    if n <= k + 1 {
        Err(Error::InsufficientDof { n, k })
    } else {
        Ok(())
    }
}

fn check_r2(r2: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r2) {
        return Err(Error::invalid(format!("R² must lie in [0, 1], got {r2}")));
    }
    Ok(())
}

fn check_g(g: f64) -> Result<()> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::invalid(format!("g must be positive, got {g}")));
    }
    Ok(())
}

/// `log BF(M_γ : M_0)` under a fixed-g null-based g-prior.
pub fn log_bf_g_null(r2: f64, n: usize, k: usize, g: f64) -> Result<f64> {
    check_dof(n, k)?;
    check_r2(r2)?;
    check_g(g)?;
    let a = (n - k - 1) as f64 / 2.0;
    let b = (n - 1) as f64 / 2.0;
    Ok(a * g.ln_1p() - b * ((1.0 - r2) * g).ln_1p())
}

/// `W = (1 - R²_F) / (1 - R²_γ)` with both R² clamped below one.
fn full_ratio(r2_gamma: f64, r2_full: f64) -> Result<f64> {
    check_r2(r2_gamma)?;
    check_r2(r2_full)?;
    if r2_gamma > r2_full + 1e-12 {
        return Err(Error::NestingViolated { r2_gamma, r2_full });
    }
    let rg = r2_gamma.min(R2_CEILING);
    let rf = r2_full.min(R2_CEILING).max(rg);
    Ok((1.0 - rf) / (1.0 - rg))
}

/// `log BF(M_F : M_γ)` under a fixed-g full-based g-prior.
pub fn log_bf_g_full(
    r2_gamma: f64,
    r2_full: f64,
    n: usize,
    m: usize,
    k: usize,
    g: f64,
) -> Result<f64> {
    check_dof(n, m)?;
    check_g(g)?;
    if k > m {
        return Err(Error::invalid(format!("k = {k} exceeds m = {m}")));
    }
    let w = full_ratio(r2_gamma, r2_full)?;
    let a = (n - m - 1) as f64 / 2.0;
    let b = (n - k - 1) as f64 / 2.0;
    Ok(a * g.ln_1p() - b * (g * w).ln_1p())
}

/// `log ∫ (1+g)^a (1+w g)^(-b) π(g) dg` with `π` the normalized inverse-gamma density
/// whose kernel is `g^(-3/2) exp(-n/(2g))`.
///
/// Integrated on `t = log g`. The integrand is unimodal in `t`; its mode is bracketed
/// on a coarse grid and the integration range is extended on each side until the
/// integrand has fallen by `e^-60` relative to the peak.
pub fn zs_log_integral(a: f64, b: f64, w: f64, n: usize) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::invalid(format!("w must be positive, got {w}")));
    }
    let nf = n as f64;
    let log_w = w.ln();
    let log_norm = 0.5 * (nf / 2.0).ln() - ln_gamma(0.5);
    let h = |t: f64| {
        a * softplus(t) - b * softplus(t + log_w) + log_norm - 0.5 * t - 0.5 * nf * (-t).exp()
    };

    // coarse bracket of the mode
    let (mut best_t, mut best_h) = (f64::NAN, f64::NEG_INFINITY);
    let mut t = -40.0;
    while t <= 120.0 {
        let v = h(t);
        if v > best_h {
            best_h = v;
            best_t = t;
        }
        t += 0.25;
    }
    let (mut lo, mut hi) = (best_t - 0.25, best_t + 0.25);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let x1 = hi - inv_phi * (hi - lo);
        let x2 = lo + inv_phi * (hi - lo);
        if h(x1) >= h(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let mode = 0.5 * (lo + hi);
    let peak = h(mode).max(best_h);

    const DROP: f64 = 60.0;
    let mut left = mode;
    while left > -200.0 && h(left) > peak - DROP {
        left -= 0.5;
    }
    let mut right = mode;
    while right < 400.0 && h(right) > peak - DROP {
        right += 0.5;
    }

    let r = adaptive_simpson(|t| (h(t) - peak).exp(), left, right, ZS_REL_TOL, ZS_MAX_EVALS);
    if !r.converged || !(r.value > 0.0) {
        return Err(Error::Quadrature {
            estimate: r.value,
            error: r.error,
        });
    }
    Ok(peak + r.value.ln())
}

/// `log BF(M_γ : M_0)` under the Zellner–Siow prior.
pub fn log_bf_zs_null(r2: f64, n: usize, k: usize) -> Result<f64> {
    check_dof(n, k)?;
    check_r2(r2)?;
    if r2 >= 1.0 {
        return Err(Error::invalid("Zellner–Siow Bayes factor diverges at R² = 1"));
    }
    let a = (n - k - 1) as f64 / 2.0;
    let b = (n - 1) as f64 / 2.0;
    zs_log_integral(a, b, 1.0 - r2, n)
}

/// `log BF(M_F : M_γ)` under the Zellner–Siow prior.
pub fn log_bf_zs_full(r2_gamma: f64, r2_full: f64, n: usize, m: usize, k: usize) -> Result<f64> {
    check_dof(n, m)?;
    if k > m {
        return Err(Error::invalid(format!("k = {k} exceeds m = {m}")));
    }
    let w = full_ratio(r2_gamma, r2_full)?;
    let a = (n - m - 1) as f64 / 2.0;
    let b = (n - k - 1) as f64 / 2.0;
    zs_log_integral(a, b, w, n)
}

/// Log marginal likelihoods, relative to the base model, for every model of a dataset.
///
/// Stored column-wise and indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelScoreTable {
    m: usize,
    base: Base,
    r2: Vec<f64>,
    log_ml: Vec<f64>,
    clamped: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub bits: u64,
    pub k: usize,
    pub r2: f64,
    pub log_ml: f64,
    /// R² was lowered to [`R2_CEILING`] before scoring.
    pub clamped: bool,
}

impl ModelScoreTable {
    /// A table from precomputed log marginal likelihoods (R² unknown, recorded as NaN).
    pub fn from_log_ml(m: usize, log_ml: Vec<f64>) -> Result<Self> {
        Self::from_parts(m, Base::NullBased, vec![f64::NAN; log_ml.len()], log_ml)
    }

    pub fn from_parts(m: usize, base: Base, r2: Vec<f64>, log_ml: Vec<f64>) -> Result<Self> {
        if m > regression::ENUMERATION_CAP {
            return Err(Error::EnumerationCap {
                m,
                cap: regression::ENUMERATION_CAP,
            });
        }
        let len = 1usize << m;
        if log_ml.len() != len || r2.len() != len {
            return Err(Error::DimensionMismatch {
                left: log_ml.len(),
                right: len,
            });
        }
        if let Some(i) = log_ml.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "log marginal likelihood of model {i:#b} is not finite"
            )));
        }
        let clamped = r2.iter().map(|&v| v > R2_CEILING).collect();
        Ok(Self {
            m,
            base,
            r2,
            log_ml,
            clamped,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.log_ml.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_ml.is_empty()
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn log_ml(&self) -> &[f64] {
        &self.log_ml
    }

    pub fn r2(&self) -> &[f64] {
        &self.r2
    }

    pub fn entry(&self, bits: u64) -> ScoreEntry {
        let i = bits as usize;
        ScoreEntry {
            bits,
            k: bits.count_ones() as usize,
            r2: self.r2[i],
            log_ml: self.log_ml[i],
            clamped: self.clamped[i],
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = ScoreEntry> + '_ {
        (0..self.len() as u64).map(|b| self.entry(b))
    }

    /// Same table with `c` added to every log marginal likelihood.
    pub fn shifted(&self, c: f64) -> Self {
        let mut t = self.clone();
        t.log_ml.iter_mut().for_each(|v| *v += c);
        t
    }

    /// CSV with columns `bits,k,r2,log_ml`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bits", "k", "r2", "log_ml"])?;
        for e in self.entries() {
            w.write_record([
                e.bits.to_string(),
                e.k.to_string(),
                e.r2.to_string(),
                e.log_ml.to_string(),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Evaluates `log f(Y|M_γ) - log f(Y|M_base)` from `(k, R²)`.
///
/// [`Scorer::exact`] runs the quadrature per call. [`Scorer::tabulated`] precomputes, for
/// each model size, the Zellner–Siow log integral on a fine grid of `u = -log w` and
/// interpolates with a six-point Lagrange stencil; used for repeated scoring of many
/// datasets sharing `n` and `m`.
#[derive(Debug, Clone)]
pub struct Scorer {
    spec: GPriorSpec,
    n: usize,
    m: usize,
    table: Option<ZsTable>,
}

impl Scorer {
    pub fn exact(spec: GPriorSpec, n: usize, m: usize) -> Result<Self> {
        Self::check(spec, n, m)?;
        Ok(Self {
            spec,
            n,
            m,
            table: None,
        })
    }

    pub fn tabulated(spec: GPriorSpec, n: usize, m: usize) -> Result<Self> {
        Self::check(spec, n, m)?;
        let table = match spec.family {
            GFamily::ZellnerSiow => Some(ZsTable::build(spec.base, n, m)?),
            GFamily::FixedG { .. } => None,
        };
        Ok(Self { spec, n, m, table })
    }

    /// [`Scorer::tabulated`] when `evaluations` outnumber the table nodes, else exact.
    pub fn for_workload(spec: GPriorSpec, n: usize, m: usize, evaluations: u128) -> Result<Self> {
        if evaluations > 4 * ZsTable::cost(m) {
            Self::tabulated(spec, n, m)
        } else {
            Self::exact(spec, n, m)
        }
    }

    fn check(spec: GPriorSpec, n: usize, m: usize) -> Result<()> {
        match spec.base {
            Base::NullBased => check_dof(n, 0),
            Base::FullBased => check_dof(n, m),
        }?;
        if let Some(g) = spec.g_for(n) {
            check_g(g)?;
        }
        Ok(())
    }

    pub fn spec(&self) -> GPriorSpec {
        self.spec
    }

    /// Score one model given its size, R² and the full model's R².
    pub fn log_ml(&self, k: usize, r2: f64, r2_full: f64) -> Result<f64> {
        let (n, m) = (self.n, self.m);
        let r2c = r2.clamp(0.0, R2_CEILING);
        match (self.spec.family, self.spec.base) {
            (GFamily::FixedG { .. }, Base::NullBased) => {
                log_bf_g_null(r2c, n, k, self.spec.g_for(n).unwrap_or(n as f64))
            }
            (GFamily::FixedG { .. }, Base::FullBased) => Ok(-log_bf_g_full(
                r2c,
                r2_full,
                n,
                m,
                k,
                self.spec.g_for(n).unwrap_or(n as f64),
            )?),
            (GFamily::ZellnerSiow, Base::NullBased) => match &self.table {
                Some(t) => {
                    check_dof(n, k)?;
                    Ok(t.eval(k, -(-r2c).ln_1p()))
                }
                None => log_bf_zs_null(r2c, n, k),
            },
            (GFamily::ZellnerSiow, Base::FullBased) => match &self.table {
                Some(t) => {
                    let w = full_ratio(r2c, r2_full)?;
                    Ok(-t.eval(k, -w.ln()))
                }
                None => Ok(-log_bf_zs_full(r2c, r2_full, n, m, k)?),
            },
        }
    }

    /// Score a whole R² vector (indexed by bitmask). The base entry is set to exactly 0.
    pub fn score_r2(&self, r2: Vec<f64>, backend: Backend) -> Result<ModelScoreTable> {
        let m = self.m;
        if r2.len() != 1usize << m {
            return Err(Error::DimensionMismatch {
                left: r2.len(),
                right: 1usize << m,
            });
        }
        let full = full_mask(m) as usize;
        let r2_full = r2[full];
        let base_bits = match self.spec.base {
            Base::NullBased => 0,
            Base::FullBased => full,
        };
        let scores = parallel::map_indexed(backend, r2.len(), |bits| {
            if bits == base_bits {
                Ok(0.0)
            } else {
                self.log_ml(bits.count_ones() as usize, r2[bits], r2_full)
            }
        });
        let log_ml = scores.into_iter().collect::<Result<Vec<_>>>()?;
        ModelScoreTable::from_parts(m, self.spec.base, r2, log_ml)
    }
}

/// Zellner–Siow log integrals tabulated over `u = -log w` for each model size.
#[derive(Debug, Clone)]
struct ZsTable {
    // values[k * nodes + j] = log integral at u = j * STEP
    values: Vec<f64>,
    nodes: usize,
}

impl ZsTable {
    const STEP: f64 = 1.0 / 64.0;
    // -log(1 - R2_CEILING) ≈ 34.54, plus room for the stencil
    const U_MAX: f64 = 36.0;

    fn build(base: Base, n: usize, m: usize) -> Result<Self> {
        let nodes = (Self::U_MAX / Self::STEP) as usize + 1;
        let nf = n as f64;
        let sizes: Vec<usize> = (0..=m).filter(|&k| n > k + 1).collect();
        let mut values = vec![f64::NAN; (m + 1) * nodes];
        for (k, chunk) in values.chunks_mut(nodes).enumerate() {
            if !sizes.contains(&k) {
                continue;
            }
            let (a, b) = match base {
                Base::NullBased => ((nf - k as f64 - 1.0) / 2.0, (nf - 1.0) / 2.0),
                Base::FullBased => ((nf - m as f64 - 1.0) / 2.0, (nf - k as f64 - 1.0) / 2.0),
            };
            for (j, slot) in chunk.iter_mut().enumerate() {
                let u = j as f64 * Self::STEP;
                *slot = zs_log_integral(a, b, (-u).exp(), n)?;
            }
        }
        Ok(Self { values, nodes })
    }

    fn eval(&self, k: usize, u: f64) -> f64 {
        let row = &self.values[k * self.nodes..(k + 1) * self.nodes];
        let x = (u / Self::STEP).clamp(0.0, (self.nodes - 1) as f64);
        let j0 = (x.floor() as isize - 2).clamp(0, self.nodes as isize - 6) as usize;
        let s = x - j0 as f64;
        // prod_{j != i} (i - j) for nodes 0..6
        const DENOM: [f64; 6] = [-120.0, 24.0, -12.0, 12.0, -24.0, 120.0];
        let d: [f64; 6] = std::array::from_fn(|j| s - j as f64);
        let mut prefix = [1.0; 6];
        for i in 1..6 {
            prefix[i] = prefix[i - 1] * d[i - 1];
        }
        let mut acc = 0.0;
        let mut suffix = 1.0;
        for i in (0..6).rev() {
            acc += prefix[i] * suffix / DENOM[i] * row[j0 + i];
            suffix *= d[i];
        }
        acc
    }

    fn cost(m: usize) -> u128 {
        (m as u128 + 1) * ((Self::U_MAX / Self::STEP) as u128 + 1)
    }
}

/// Score every model of `ds` under `spec`.
pub fn score_table(ds: &Dataset, spec: GPriorSpec) -> Result<ModelScoreTable> {
    score_table_with(ds, spec, Backend::default())
}

pub fn score_table_with(ds: &Dataset, spec: GPriorSpec, backend: Backend) -> Result<ModelScoreTable> {
    if spec.base == Base::FullBased && ds.low_dof() {
        return Err(Error::InsufficientDof {
            n: ds.n(),
            k: ds.m(),
        });
    }
    let r2 = regression::enumerate_r2(ds, backend)?;
    Scorer::exact(spec, ds.n(), ds.m())?.score_r2(r2, backend)
}
