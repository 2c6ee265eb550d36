//! Type-II maximum likelihood estimate of the common inclusion probability.
//!
//! The objective `ℓ(p) = log Σ_γ p^k (1-p)^(m-k) f(Y|M_γ)` depends on the table only
//! through the per-size sums `S_k = Σ_{|γ|=k} f(Y|M_γ)`, which makes a dense global
//! scan over `[0, 1]` cheap. The maximum may sit on the boundary, so the endpoints are
//! always compared explicitly.

use serde::{Deserialize, Serialize};

use crate::marginal::ModelScoreTable;
use crate::regression::full_mask;
use crate::special::{xlogy_pair, LogSumExp};

/// Grid resolution of the initial scan.
pub const DEFAULT_GRID_POINTS: usize = 2001;

const GOLDEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbEstimate {
    pub p_hat: f64,
    pub degenerate: bool,
    pub log_marginal_at_phat: f64,
    /// `log S_k` for `k = 0..=m`.
    pub size_sums: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    NullDominant,
    FullDominant,
    Neither,
}

/// `log S_k` via log-sum-exp over the models of each size.
pub fn size_log_sums(table: &ModelScoreTable) -> Vec<f64> {
    let m = table.m();
    let mut acc = vec![LogSumExp::default(); m + 1];
    for (bits, &v) in table.log_ml().iter().enumerate() {
        acc[bits.count_ones() as usize].push(v);
    }
    acc.iter().map(LogSumExp::value).collect()
}

/// `ℓ(p)` from the per-size sums, with `ℓ(0) = log S_0` and `ℓ(1) = log S_m`.
pub fn eb_objective(size_sums: &[f64], p: f64) -> f64 {
    let m = size_sums.len() - 1;
    if p <= 0.0 {
        return size_sums[0];
    }
    if p >= 1.0 {
        return size_sums[m];
    }
    let mut acc = LogSumExp::default();
    for (k, &s) in size_sums.iter().enumerate() {
        acc.push(xlogy_pair(k as f64, (m - k) as f64, p) + s);
    }
    acc.value()
}

/// Whether the null or the full model has the strictly largest marginal likelihood.
pub fn check_degenerate(table: &ModelScoreTable) -> Dominance {
    let log_ml = table.log_ml();
    let full = full_mask(table.m()) as usize;
    let strictly_max = |idx: usize| {
        let v = log_ml[idx];
        log_ml
            .iter()
            .enumerate()
            .all(|(i, &x)| i == idx || x < v)
    };
    if table.m() == 0 {
        return Dominance::Neither;
    }
    if strictly_max(0) {
        Dominance::NullDominant
    } else if strictly_max(full) {
        Dominance::FullDominant
    } else {
        Dominance::Neither
    }
}

pub fn type2_mle(table: &ModelScoreTable) -> EbEstimate {
    type2_mle_with_grid(table, DEFAULT_GRID_POINTS)
}

/// Grid scan, golden-section refinement of the best interior cell, then comparison
/// against both endpoints. Ties go to the interior point, then to 0.
pub fn type2_mle_with_grid(table: &ModelScoreTable, grid_points: usize) -> EbEstimate {
    let size_sums = size_log_sums(table);
    let finish = |p_hat: f64, size_sums: Vec<f64>| {
        let log_marginal_at_phat = eb_objective(&size_sums, p_hat);
        EbEstimate {
            p_hat,
            degenerate: p_hat == 0.0 || p_hat == 1.0,
            log_marginal_at_phat,
            size_sums,
        }
    };

    // A strictly dominant boundary model pins the maximizer to that boundary exactly.
    match check_degenerate(table) {
        Dominance::NullDominant => return finish(0.0, size_sums),
        Dominance::FullDominant => return finish(1.0, size_sums),
        Dominance::Neither => {}
    }

    let grid_points = grid_points.max(3);
    let steps = (grid_points - 1) as f64;
    // searching on the max-shifted sums keeps the objective O(1), so rounding does not
    // depend on the scale of the marginal likelihoods
    let top = size_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = size_sums.iter().map(|s| s - top).collect();
    let objective = |p: f64| eb_objective(&shifted, p);
    let mut best_i = 1;
    let mut best_v = f64::NEG_INFINITY;
    for i in 1..grid_points - 1 {
        let v = objective(i as f64 / steps);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = ((best_i - 1) as f64 / steps, (best_i + 1) as f64 / steps);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let mut interior = (mid, objective(mid));
    for cand in [(x1, f1), (x2, f2), (best_i as f64 / steps, best_v)] {
        if cand.1 > interior.1 && cand.0 > 0.0 && cand.0 < 1.0 {
            interior = cand;
        }
    }
    // Function values only locate a flat maximum to about sqrt(eps). Polish with bisection
    // on the sign of the score near the golden-section point.
    if let Some(root) = score_root(&shifted, interior.0 - 1e-6, interior.0 + 1e-6) {
        interior = (root, objective(root));
    }

    let at0 = shifted[0];
    let at1 = shifted[table.m()];
    let p_hat = if interior.1 >= at0 && interior.1 >= at1 {
        interior.0
    } else if at0 >= at1 {
        0.0
    } else {
        1.0
    };
    finish(p_hat, size_sums)
}

/// `dℓ/dp · p(1-p)` up to a positive factor: the posterior-weighted mean of `k - m p`.
fn score_sign(shifted: &[f64], p: f64) -> f64 {
    let m = (shifted.len() - 1) as f64;
    let logs: Vec<f64> = shifted
        .iter()
        .enumerate()
        .map(|(k, &s)| xlogy_pair(k as f64, m - k as f64, p) + s)
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logs.iter()
        .enumerate()
        .map(|(k, &l)| (l - top).exp() * (k as f64 - m * p))
        .sum()
}

/// Root of the score in `[lo, hi]` when it changes sign from positive to negative there.
fn score_root(shifted: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let (mut lo, mut hi) = (lo.max(f64::MIN_POSITIVE), hi.min(1.0 - f64::EPSILON));
    if !(score_sign(shifted, lo) > 0.0 && score_sign(shifted, hi) < 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if score_sign(shifted, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
