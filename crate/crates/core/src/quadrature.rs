//! Adaptive Simpson quadrature.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Accumulated local error estimate.
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

const INITIAL_PANELS: usize = 16;
const MAX_DEPTH: u32 = 48;

/// Integrate `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// The interval is first cut into equal panels; each panel is refined recursively until
/// the Richardson difference of the two halves is below its share of the tolerance.
/// `converged` is false when the evaluation budget or the depth limit ran out first.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Integral {
    let mut state = State {
        f: &f,
        evals: 0,
        max_evals,
        error: 0.0,
        converged: true,
    };
    let width = (b - a) / INITIAL_PANELS as f64;
    let mut panels = Vec::with_capacity(INITIAL_PANELS);
    let mut rough = 0.0;
    for i in 0..INITIAL_PANELS {
        let lo = a + width * i as f64;
        let hi = if i + 1 == INITIAL_PANELS { b } else { lo + width };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (state.eval(lo), state.eval(mid), state.eval(hi));
        let s = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        rough += s.abs();
        panels.push((lo, hi, flo, fmid, fhi, s));
    }
    let abs_tol = (rel_tol * rough).max(f64::MIN_POSITIVE);
    let mut value = 0.0;
    for (lo, hi, flo, fmid, fhi, s) in panels {
        let eps = abs_tol * (hi - lo) / (b - a);
        value += state.refine(lo, hi, flo, fmid, fhi, s, eps, MAX_DEPTH);
    }
    Integral {
        value,
        error: state.error,
        evals: state.evals,
        converged: state.converged,
    }
}

struct State<'a, F> {
    f: &'a F,
    evals: usize,
    max_evals: usize,
    error: f64,
    converged: bool,
}

impl<F: Fn(f64) -> f64> State<'_, F> {
    fn eval(&mut self, x: f64) -> f64 {
        self.evals += 1;
        (self.f)(x)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &mut self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm);
        let frm = self.eval(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * eps {
            self.error += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        if depth == 0 || self.evals >= self.max_evals {
            self.converged = false;
            self.error += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        self.refine(a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + self.refine(m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12, 10_000);
        assert!(r.converged);
        assert!((r.value - 0.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_bump() {
        let r = adaptive_simpson(|x| (-0.5 * x * x).exp(), -30.0, 30.0, 1e-11, 1_000_000);
        let exact = (2.0 * std::f64::consts::PI).sqrt();
        assert!(r.converged);
        assert!((r.value / exact - 1.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let r = adaptive_simpson(|x| (50.0 * x).sin().abs(), 0.0, 10.0, 1e-14, 200);
        assert!(!r.converged);
    }
}
