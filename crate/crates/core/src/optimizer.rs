//! Multistart Nelder–Mead search over Bob's smearing parameters that makes the
//! energy integrated over a spatial window as negative as possible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field1d::{Field1d, ProtocolConfig};
use crate::fieldnd::Field3d;
use crate::quad::trapezoid;

/// A tunable quantity. Bob-side parameters act on Bob's first component,
/// amplitudes on the first component of each detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    /// Center in 1+1 D, shell radius in 3+1 D.
    BobPosition,
    BobDelta,
    BobSigma,
    AliceAmplitude,
    BobAmplitude,
}

impl Parameter {
    fn get(self, cfg: &ProtocolConfig) -> f64 {
        match self {
            Parameter::BobPosition if cfg.dimension == 2 => cfg.bob.parts[0].center,
            Parameter::BobPosition => cfg.bob.parts[0].shell_radius,
            Parameter::BobDelta => cfg.bob.parts[0].delta,
            Parameter::BobSigma => cfg.bob.parts[0].sigma,
            Parameter::AliceAmplitude => cfg.alice.parts[0].amplitude,
            Parameter::BobAmplitude => cfg.bob.parts[0].amplitude,
        }
    }

    fn set(self, cfg: &mut ProtocolConfig, v: f64) {
        match self {
            Parameter::BobPosition if cfg.dimension == 2 => cfg.bob.parts[0].center = v,
            Parameter::BobPosition => cfg.bob.parts[0].shell_radius = v,
            Parameter::BobDelta => cfg.bob.parts[0].delta = v,
            Parameter::BobSigma => cfg.bob.parts[0].sigma = v,
            Parameter::AliceAmplitude => cfg.alice.parts[0].amplitude = v,
            Parameter::BobAmplitude => cfg.bob.parts[0].amplitude = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationProblem {
    pub base_config: ProtocolConfig,
    pub window: (f64, f64),
    pub free_params: Vec<Parameter>,
    pub bounds: Vec<(f64, f64)>,
    pub eval_time: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Objective evaluations allowed per restart.
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
    /// Stop once the simplex values agree to this relative tolerance.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Trapezoid nodes across the window.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_restarts() -> usize {
    4
}
fn default_max_evaluations() -> usize {
    400
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_points() -> usize {
    201
}

/// Alice's outgoing pulse position at `time`, ± δ_A/4.
pub fn default_window(cfg: &ProtocolConfig, time: f64) -> Result<(f64, f64)> {
    let a = cfg.alice.parts.first().ok_or_else(|| Error::Config("Alice has no smearing component".into()))?;
    let c = if cfg.dimension == 2 { a.center } else { a.shell_radius } + time;
    Ok((c - 0.25 * a.delta, c + 0.25 * a.delta))
}

/// Time after Bob's kick for his counter-propagating packet to clear a window
/// of width δ_A/2.
pub fn default_delay(cfg: &ProtocolConfig) -> f64 {
    let width = cfg.alice.parts.first().map_or(0.0, |a| 0.5 * a.delta);
    width + 2.0 * cfg.bob.characteristic_halfwidth()
}

impl OptimizationProblem {
    /// Problem with the default window and evaluation time; bounds must be
    /// given per free parameter.
    pub fn new(base_config: ProtocolConfig, free_params: Vec<Parameter>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let eval_time = base_config.interaction_time + default_delay(&base_config);
        let window = default_window(&base_config, eval_time)?;
        Ok(Self {
            base_config,
            window,
            free_params,
            bounds,
            eval_time,
            restarts: default_restarts(),
            seed: 0,
            max_evaluations: default_max_evaluations(),
            tolerance: default_tolerance(),
            points: default_points(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.base_config.validate()?;
        if self.base_config.alice.parts.is_empty() || self.base_config.bob.parts.is_empty() {
            return Err(Error::Config("both detectors need at least one smearing component".into()));
        }
        if self.free_params.is_empty() || self.free_params.len() != self.bounds.len() {
            return Err(Error::Config(format!(
                "{} free parameters but {} bounds",
                self.free_params.len(),
                self.bounds.len()
            )));
        }
        for (p, &(lo, hi)) in self.free_params.iter().zip(&self.bounds) {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!("empty bounds [{lo}, {hi}] for {p:?}")));
            }
            if *p == Parameter::BobSigma && self.base_config.bob.parts[0].family != crate::smearing::Family::Bump {
                return Err(Error::Config("bob_sigma is only meaningful for a bump smearing".into()));
            }
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        if self.points < 200 {
            return Err(Error::Config(format!("points must be >= 200, got {}", self.points)));
        }
        if !(self.window.0 < self.window.1) {
            return Err(Error::Config(format!("empty window [{}, {}]", self.window.0, self.window.1)));
        }
        if !(self.eval_time > self.base_config.interaction_time) {
            return Err(Error::Config("eval_time must exceed the interaction time".into()));
        }
        Ok(())
    }

    pub fn config_at(&self, x: &[f64]) -> ProtocolConfig {
        let mut cfg = self.base_config.clone();
        for (p, &v) in self.free_params.iter().zip(x) {
            p.set(&mut cfg, v);
        }
        cfg
    }

    fn start_point(&self) -> Vec<f64> {
        self.free_params.iter().map(|p| p.get(&self.base_config)).collect()
    }

    fn in_bounds(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bounds).all(|(v, &(lo, hi))| *v >= lo && *v <= hi)
    }

    /// Objective at a parameter vector; +∞ outside the bounds, for acausal or
    /// invalid candidates, and where the density evaluation fails.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        if !self.in_bounds(x) {
            return f64::INFINITY;
        }
        let cfg = self.config_at(x);
        if cfg.validate().is_err() || !cfg.is_causal() {
            return f64::INFINITY;
        }
        match objective_with(&cfg, self.window, self.eval_time, self.points) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }

    fn feasible(&self, x: &[f64]) -> bool {
        let cfg = self.config_at(x);
        cfg.validate().is_ok() && cfg.is_causal()
    }
}

/// ∫_window total density dx (radially weighted by 4πr² in 3+1 D).
pub fn objective(cfg: &ProtocolConfig, window: (f64, f64), time: f64) -> Result<f64> {
    objective_with(cfg, window, time, default_points())
}

pub fn objective_with(cfg: &ProtocolConfig, window: (f64, f64), time: f64, points: usize) -> Result<f64> {
    let points = points.max(200);
    let h = (window.1 - window.0) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| window.0 + h * i as f64).collect();
    match cfg.dimension {
        2 => {
            let p = Field1d::new(cfg)?.profile(&grid, time)?;
            Ok(trapezoid(&p.grid, &p.total))
        }
        4 => {
            let p = Field3d::new(cfg)?.profile(&grid, time - cfg.interaction_time)?;
            let w: Vec<f64> = p
                .grid
                .iter()
                .zip(&p.total)
                .map(|(r, d)| 4.0 * std::f64::consts::PI * r * r * d)
                .collect();
            Ok(trapezoid(&p.grid, &w))
        }
        n => Err(Error::DimensionUnsupported(n, "only n = 2 and n = 4 are implemented".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub start: Vec<f64>,
    /// Best objective after each simplex iteration.
    pub best: Vec<f64>,
    pub evaluations: usize,
    pub best_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_config: ProtocolConfig,
    pub best_objective: f64,
    pub best_params: Vec<f64>,
    pub best_restart: usize,
    pub trace: Vec<RestartTrace>,
}

const START_ATTEMPTS: usize = 256;

/// Restart 0 starts from the base configuration when it is feasible; every
/// other start is drawn uniformly within the bounds from a generator seeded by
/// `seed + restart`.
fn sample_start(problem: &OptimizationProblem, restart: usize) -> Option<Vec<f64>> {
    if restart == 0 {
        let x0 = problem.start_point();
        if problem.in_bounds(&x0) && problem.feasible(&x0) {
            return Some(x0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed.wrapping_add(restart as u64));
    (0..START_ATTEMPTS)
        .map(|_| {
            problem
                .bounds
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect::<Vec<f64>>()
        })
        .find(|x| problem.feasible(x))
}

fn nelder_mead(problem: &OptimizationProblem, restart: usize, start: Vec<f64>) -> RestartTrace {
    let n = start.len();
    let evaluations = std::cell::Cell::new(0usize);
    let f = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        problem.evaluate(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.clone(), f(&start)));
    for i in 0..n {
        let (lo, hi) = problem.bounds[i];
        let step = 0.1 * (hi - lo);
        let mut x = start.clone();
        x[i] = if x[i] + step <= hi { x[i] + step } else { x[i] - step };
        if step == 0.0 {
            x[i] += 1e-3 * x[i].abs().max(1.0);
        }
        let mut v = f(&x);
        if v == f64::INFINITY && step > 0.0 {
            let mut y = start.clone();
            y[i] = if start[i] - step >= lo { start[i] - step } else { start[i] + 0.5 * step };
            let w = f(&y);
            if w < v {
                (x, v) = (y, w);
            }
        }
        simplex.push((x, v));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);
    let mut best = vec![simplex[0].1];

    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };

    while evaluations.get() < problem.max_evaluations {
        let fb = simplex[0].1;
        let fw = simplex[n].1;
        if fb.is_finite() && fw.is_finite() && (fw - fb).abs() <= problem.tolerance * (fb.abs() + fw.abs()) + 1e-300 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let xr = combine(&centroid, &worst, -1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = combine(&centroid, &worst, -2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = combine(&centroid, &xr, 0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = combine(&centroid, &worst, 0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = combine(&x0, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
        order(&mut simplex);
        best.push(simplex[0].1.min(*best.last().unwrap()));
        if simplex.iter().all(|s| s.1 == f64::INFINITY) {
            break;
        }
    }

    RestartTrace {
        restart,
        start,
        best,
        evaluations: evaluations.get(),
        best_params: simplex[0].0.clone(),
    }
}

pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let starts: Vec<(usize, Vec<f64>)> = (0..problem.restarts)
        .into_par_iter()
        .filter_map(|r| sample_start(problem, r).map(|x| (r, x)))
        .collect();
    if starts.is_empty() {
        return Err(Error::NoFeasiblePoint);
    }
    let trace: Vec<RestartTrace> = starts
        .into_par_iter()
        .map(|(r, x)| nelder_mead(problem, r, x))
        .collect();
    let winner = trace
        .iter()
        .min_by(|a, b| {
            let fa = *a.best.last().unwrap();
            let fb = *b.best.last().unwrap();
            fa.total_cmp(&fb).then(a.restart.cmp(&b.restart))
        })
        .unwrap();
    let best_objective = *winner.best.last().unwrap();
    if !best_objective.is_finite() {
        return Err(Error::NoFeasiblePoint);
    }
    Ok(OptimizationResult {
        best_config: problem.config_at(&winner.best_params),
        best_objective,
        best_params: winner.best_params.clone(),
        best_restart: winner.restart,
        trace,
    })
}

/// Objective with Bob switched off.
pub fn baseline_objective(problem: &OptimizationProblem) -> Result<f64> {
    let mut cfg = problem.base_config.clone();
    for p in cfg.bob.parts.iter_mut() {
        p.amplitude = 0.0;
    }
    objective_with(&cfg, problem.window, problem.eval_time, problem.points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::DetectorState;
    use crate::smearing::SmearingSpec;

    fn gaussian_problem() -> OptimizationProblem {
        let cfg = ProtocolConfig::new(
            2,
            SmearingSpec::gaussian(1.0, 1.0, 0.0),
            SmearingSpec::gaussian(1.0, 1.0, 6.0),
            6.0,
        );
        let mut p = OptimizationProblem::new(cfg, vec![Parameter::BobPosition, Parameter::BobAmplitude], vec![(3.0, 9.0), (0.0, 3.0)]).unwrap();
        p.restarts = 2;
        p.max_evaluations = 120;
        p
    }

    #[test]
    fn zero_bob_objective_is_alice_energy() {
        let p = gaussian_problem();
        let b = baseline_objective(&p).unwrap();
        assert!(b >= 0.0);
    }

    #[test]
    fn unpolarized_detector_gives_nonnegative_objective() {
        let mut p = gaussian_problem();
        p.base_config = p.base_config.with_detector(DetectorState::sigma_x_plus());
        let v = objective(&p.base_config, p.window, p.eval_time).unwrap();
        assert!(v >= 0.0);
    }

    #[test]
    fn traces_are_monotone_and_beat_baseline() {
        let p = gaussian_problem();
        let r = optimize(&p).unwrap();
        for t in &r.trace {
            assert!(t.best.windows(2).all(|w| w[1] <= w[0]));
        }
        assert!(r.best_objective <= baseline_objective(&p).unwrap());
        assert!(r.best_objective < 0.0);
        assert!((problem_value(&p, &r.best_params) - r.best_objective).abs() == 0.0);
    }

    fn problem_value(p: &OptimizationProblem, x: &[f64]) -> f64 {
        p.evaluate(x)
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let mut p = gaussian_problem();
        p.restarts = 1;
        p.seed = 7;
        let a = optimize(&p).unwrap();
        let b = optimize(&p).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn acausal_bounds_have_no_feasible_point() {
        let mut p = gaussian_problem();
        p.free_params = vec![Parameter::BobPosition];
        p.bounds = vec![(40.0, 50.0)];
        p.base_config.bob.parts[0].center = 45.0;
        assert!(matches!(optimize(&p), Err(Error::NoFeasiblePoint)));
    }

    #[test]
    fn rejects_mismatched_bounds() {
        let mut p = gaussian_problem();
        p.bounds.pop();
        assert!(matches!(optimize(&p), Err(Error::Config(_))));
        let mut p = gaussian_problem();
        p.free_params = vec![Parameter::BobSigma, Parameter::BobAmplitude];
        assert!(matches!(optimize(&p), Err(Error::Config(_))));
    }
}
