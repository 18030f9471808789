//! Cauchy principal values PV ∫ n(y)/(y − p) dy by excising a small symmetric
//! neighbourhood of the pole and replacing it with its leading Taylor term.

use crate::error::{Error, Result};
use crate::quad::Adaptive;

/// A principal-value integral over `[lower, upper]` with a pole at `pole`.
pub struct PvProblem<N, D> {
    pub numerator: N,
    /// n′, needed for the excised-interval term 2a·n′(p).
    pub numerator_deriv: D,
    pub pole: f64,
    pub inner_halfwidth: f64,
    pub lower: f64,
    pub upper: f64,
    /// Optional feature points of the numerator (kinks in smoothness, peaks).
    pub breaks: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvValue {
    pub value: f64,
    /// Size of the first omitted Taylor term, (a³/9)·|n‴(p)|.
    pub truncation_estimate: f64,
}

impl<N: Fn(f64) -> f64, D: Fn(f64) -> f64> PvProblem<N, D> {
    pub fn new(numerator: N, numerator_deriv: D, pole: f64, inner_halfwidth: f64, lower: f64, upper: f64) -> Self {
        Self {
            numerator,
            numerator_deriv,
            pole,
            inner_halfwidth,
            lower,
            upper,
            breaks: Vec::new(),
        }
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    fn check(&self) -> Result<()> {
        let (p, a) = (self.pole, self.inner_halfwidth);
        if !(a > 0.0) || !(self.lower < p - a) || !(p + a < self.upper) {
            return Err(Error::InvalidGeometry(format!(
                "need lower < pole - a and pole + a < upper, got [{}, {}], pole {}, a {}",
                self.lower, self.upper, p, a
            )));
        }
        Ok(())
    }
}

/// Outer integrals plus 2a·n′(p), see [`pv_integral_detailed`].
pub fn pv_integral<N, D>(problem: &PvProblem<N, D>, tol: f64) -> Result<f64>
where
    N: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    pv_integral_detailed(problem, tol).map(|v| v.value)
}

pub fn pv_integral_detailed<N, D>(problem: &PvProblem<N, D>, tol: f64) -> Result<PvValue>
where
    N: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    problem.check()?;
    let n = &problem.numerator;
    let dn = &problem.numerator_deriv;
    let (p, a) = (problem.pole, problem.inner_halfwidth);
    let (left, right) = (p - problem.lower, problem.upper - p);
    let d = left.min(right);
    let q = Adaptive::new(tol, 1e-13).with_max_panels(20_000);

    // The two outer pieces folded onto the common range u ∈ [a, d].
    let folded_breaks: Vec<f64> = problem.breaks.iter().map(|b| (b - p).abs()).collect();
    let folded = q.integrate_with_breaks(|u| (n(p + u) - n(p - u)) / u, a, d, &folded_breaks)?;
    let tail = if right > left {
        q.integrate_with_breaks(|y| n(y) / (y - p), p + d, problem.upper, &problem.breaks)?
    } else if left > right {
        q.integrate_with_breaks(|y| n(y) / (y - p), problem.lower, p - d, &problem.breaks)?
    } else {
        0.0
    };

    let h = (a * 0.5).max(1e-4 * a.max(1e-300));
    let third = (dn(p + h) - 2.0 * dn(p) + dn(p - h)) / (h * h);
    Ok(PvValue {
        value: folded + tail + 2.0 * a * dn(p),
        truncation_estimate: a.powi(3) / 9.0 * third.abs(),
    })
}

/// a = (9·tol / bound)^{1/3}, clamped to a tenth of the pole's distance to the
/// nearer outer bound.
pub fn choose_inner_radius(third_deriv_bound: f64, tol: f64, distance_to_bound: f64) -> f64 {
    let a = (9.0 * tol / third_deriv_bound).cbrt();
    a.min(0.1 * distance_to_bound)
}
