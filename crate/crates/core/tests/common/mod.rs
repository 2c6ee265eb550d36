#![allow(dead_code)]

use multibayes::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian-ish design with a sparse signal; Box–Muller so the oracle side has no
/// dependence on the crate's own normal generator.
pub fn random_dataset(seed: u64, n: usize, m: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let columns: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| normal()).collect()).collect();
    let beta: Vec<f64> = (0..m).map(|j| if j % 3 == 0 { 0.6 } else { 0.0 }).collect();
    let y = (0..n)
        .map(|i| (0..m).map(|j| beta[j] * columns[j][i]).sum::<f64>() + normal())
        .collect();
    let names = (0..m).map(|j| format!("x{j}")).collect();
    Dataset::from_columns("y", y, names, columns).unwrap()
}

/// Trapezoid rule on `t = log g` with `nodes` points over `[lo, hi]`, in log space.
pub fn riemann_log_integral(
    lo: f64,
    hi: f64,
    nodes: usize,
    log_integrand: impl Fn(f64) -> f64,
) -> f64 {
    let h = (hi - lo) / (nodes - 1) as f64;
    let vals: Vec<f64> = (0..nodes)
        .map(|i| {
            let w: f64 = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
            log_integrand(lo + i as f64 * h) + w.ln()
        })
        .collect();
    let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + vals.iter().map(|v| (v - mx).exp()).sum::<f64>().ln() + h.ln()
}

/// Log of the integrand in `t`: `(1+g)^a (1+gw)^{-b}` times the inverse-gamma density
/// `sqrt(n/2)/Γ(1/2) g^{-3/2} e^{-n/(2g)}` times the Jacobian `g`.
pub fn zs_log_integrand(a: f64, b: f64, w: f64, n: f64, t: f64) -> f64 {
    let g = t.exp();
    a * g.ln_1p() - b * (g * w).ln_1p() + 0.5 * (n / 2.0).ln()
        - 0.5 * std::f64::consts::PI.ln()
        - 0.5 * t
        - n / (2.0 * g)
}

pub fn zs_riemann(a: f64, b: f64, w: f64, n: usize) -> f64 {
    riemann_log_integral(-60.0, 80.0, 200_001, |t| zs_log_integrand(a, b, w, n as f64, t))
}
