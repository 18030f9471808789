//! 1+1 D energy density of the field before and after Bob's interaction.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{sigma_y_expectation, DetectorState, FieldPieces};
use crate::pvquad::{choose_inner_radius, pv_integral, PvProblem};
use crate::quad::{trapezoid, Adaptive};
use crate::smearing::Smearing;

/// Amplitude threshold defining effective supports of non-compact profiles.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
const PV_SUPPORT_THRESHOLD: f64 = 1e-16;
const PV_TOL: f64 = 1e-10;

/// A complete protocol scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub dimension: usize,
    pub alice: Smearing,
    pub bob: Smearing,
    pub interaction_time: f64,
    pub detector: DetectorState,
    #[serde(default)]
    pub uv_cutoff: f64,
}

impl ProtocolConfig {
    pub fn new(dimension: usize, alice: impl Into<Smearing>, bob: impl Into<Smearing>, interaction_time: f64) -> Self {
        Self {
            dimension,
            alice: alice.into(),
            bob: bob.into(),
            interaction_time,
            detector: DetectorState::sigma_y_eigenstate(1.0),
            uv_cutoff: 0.0,
        }
    }

    pub fn with_detector(mut self, detector: DetectorState) -> Self {
        self.detector = detector;
        self
    }

    /// Parameter checks, without causality.
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::Config(format!("dimension must be >= 2, got {}", self.dimension)));
        }
        if !(self.interaction_time > 0.0) || !self.interaction_time.is_finite() {
            return Err(Error::Config(format!("interaction_time must be positive, got {}", self.interaction_time)));
        }
        if !(self.uv_cutoff >= 0.0) {
            return Err(Error::Config(format!("uv_cutoff must be >= 0, got {}", self.uv_cutoff)));
        }
        self.alice.validate()?;
        self.bob.validate()?;
        self.detector.validate()?;
        if self.dimension == 4 {
            for p in self.alice.parts.iter().chain(&self.bob.parts) {
                if p.center != 0.0 {
                    return Err(Error::DimensionUnsupported(
                        4,
                        "3+1 D smearings must be concentric about the origin (center = 0)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Largest distance from a point of Bob's effective support to Alice's
    /// effective support (radial supports in 3+1 D).
    pub fn causal_gap(&self) -> f64 {
        let supports = |s: &Smearing| -> Vec<(f64, f64)> {
            if self.dimension == 2 {
                s.component_supports(SUPPORT_THRESHOLD)
            } else {
                s.parts
                    .iter()
                    .filter(|p| p.amplitude != 0.0)
                    .map(|p| p.radial_support(SUPPORT_THRESHOLD))
                    .collect()
            }
        };
        let bob = supports(&self.bob);
        let alice = supports(&self.alice);
        if bob.is_empty() || alice.is_empty() {
            return 0.0;
        }
        let dist = |x: f64| {
            alice
                .iter()
                .map(|&(lo, hi)| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 })
                .fold(f64::INFINITY, f64::min)
        };
        // The distance to a union of intervals is piecewise linear, so its
        // maximum over an interval sits at an endpoint or a midpoint between
        // neighbouring Alice intervals.
        let mut candidates: Vec<f64> = Vec::new();
        for &(lo, hi) in &alice {
            candidates.push(lo);
            candidates.push(hi);
        }
        let mut worst: f64 = 0.0;
        for &(blo, bhi) in &bob {
            worst = worst.max(dist(blo)).max(dist(bhi));
            for (i, &c1) in candidates.iter().enumerate() {
                for &c2 in &candidates[i + 1..] {
                    let m = 0.5 * (c1 + c2);
                    if m > blo && m < bhi {
                        worst = worst.max(dist(m));
                    }
                }
            }
        }
        worst
    }

    pub fn is_causal(&self) -> bool {
        self.causal_gap() <= self.interaction_time
    }
}

/// Alice / Bob / QET parts of the energy density at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub alice: f64,
    pub bob: f64,
    pub qet: f64,
}

impl Components {
    pub fn total(&self) -> f64 {
        self.alice + self.bob + self.qet
    }
}

/// Sampled energy density at fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub grid: Vec<f64>,
    pub time: f64,
    pub total: Vec<f64>,
    pub alice_part: Vec<f64>,
    pub bob_part: Vec<f64>,
    pub qet_part: Vec<f64>,
}

impl DensityProfile {
    pub fn from_components(grid: Vec<f64>, time: f64, comps: &[Components]) -> Self {
        Self {
            time,
            total: comps.iter().map(Components::total).collect(),
            alice_part: comps.iter().map(|c| c.alice).collect(),
            bob_part: comps.iter().map(|c| c.bob).collect(),
            qet_part: comps.iter().map(|c| c.qet).collect(),
            grid,
        }
    }
}

/// (1/4π) ∫ |k| |λ̃(k)|² dk.
pub fn alpha_norm_1d(alice: &Smearing) -> Result<f64> {
    if alice.is_zero() {
        return Ok(0.0);
    }
    let delta = alice.smallest_length().unwrap_or(1.0);
    let q = Adaptive::new(0.0, 1e-12).with_max_panels(20_000);
    let integrand = |k: f64| -> f64 { k * alice.fourier1d(k).map(|c| c.norm_sqr()).unwrap_or(f64::NAN) };
    let mut hi = 10.0 / delta;
    let mut total = q.integrate(integrand, 0.0, hi)?;
    for _ in 0..30 {
        let piece = Adaptive::new(1e-16 * total.abs(), 1e-12)
            .with_max_panels(20_000)
            .integrate(integrand, hi, 2.0 * hi)?;
        total += piece;
        hi *= 2.0;
        if piece.abs() <= 1e-15 * total.abs() {
            return Ok(total / (2.0 * PI));
        }
    }
    Err(Error::NonConvergence {
        lower: 0.0,
        upper: hi,
        estimate: total,
        tolerance: 1e-15,
    })
}

/// ¼ λ′(x−t)² + ¼ λ′(x+t)².
pub fn alice_density(cfg: &ProtocolConfig, x: f64, t: f64) -> f64 {
    let a = cfg.alice.deriv(x - t, 1);
    let b = cfg.alice.deriv(x + t, 1);
    0.25 * (a * a + b * b)
}

/// Evaluator with the per-configuration quantities (‖α‖, ⟨σ_y⟩, principal-value
/// geometry) computed once.
#[derive(Debug, Clone)]
pub struct Field1d<'a> {
    cfg: &'a ProtocolConfig,
    alpha_norm: f64,
    sigma_y: f64,
    pv_support: Option<(f64, f64)>,
    pv_scale: f64,
    fourth_bound: f64,
    breaks: Vec<f64>,
    min_len: f64,
}

impl<'a> Field1d<'a> {
    pub fn new(cfg: &'a ProtocolConfig) -> Result<Self> {
        if cfg.dimension != 2 {
            return Err(Error::DimensionUnsupported(cfg.dimension, "1+1 D evaluator requires n = 2".into()));
        }
        cfg.alice.validate()?;
        cfg.bob.validate()?;
        let sigma_y = sigma_y_expectation(&cfg.detector)?;
        let alpha_norm = alpha_norm_1d(&cfg.alice)?;
        let pv_scale = cfg
            .alice
            .parts
            .iter()
            .map(|p| p.amplitude.abs() / p.delta)
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        Ok(Self {
            cfg,
            alpha_norm,
            sigma_y,
            pv_support: cfg.alice.deriv_support(PV_SUPPORT_THRESHOLD),
            pv_scale,
            fourth_bound: cfg.alice.fourth_deriv_bound(),
            breaks: cfg.alice.feature_points(),
            min_len: cfg.alice.smallest_length().unwrap_or(1.0),
        })
    }

    pub fn alpha_norm(&self) -> f64 {
        self.alpha_norm
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_y
    }

    pub fn config(&self) -> &ProtocolConfig {
        self.cfg
    }

    /// PV ∫ λ′(y)/(y − p) dy.
    pub fn principal_value(&self, p: f64) -> Result<f64> {
        let Some((lo, hi)) = self.pv_support else {
            return Ok(0.0);
        };
        let lower = lo.min(p - self.min_len);
        let upper = hi.max(p + self.min_len);
        let tol = PV_TOL * self.pv_scale;
        let a = choose_inner_radius(self.fourth_bound.max(f64::MIN_POSITIVE), tol, (p - lower).min(upper - p));
        let alice = &self.cfg.alice;
        let problem = PvProblem::new(|y| alice.deriv(y, 1), |y| alice.deriv(y, 2), p, a, lower, upper)
            .with_breaks(self.breaks.clone());
        pv_integral(&problem, 1e-2 * tol)
    }

    /// Field data at (x, t). The conjugate-quadrature pieces are only needed
    /// where Bob's kick is nonzero unless `full` is set.
    pub fn pieces(&self, x: f64, t: f64, full: bool) -> Result<FieldPieces> {
        let alice = &self.cfg.alice;
        let (lp, lm) = (alice.deriv(x + t, 1), alice.deriv(x - t, 1));
        let mut out = FieldPieces {
            pi_a: 0.5 * (lp - lm),
            g_a: 0.5 * (lp + lm),
            ..FieldPieces::default()
        };
        let tau = t - self.cfg.interaction_time;
        let (mp, mm) = if tau >= 0.0 {
            (self.cfg.bob.eval(x + tau), self.cfg.bob.eval(x - tau))
        } else {
            (0.0, 0.0)
        };
        out.pi_b = -0.5 * (mp + mm);
        out.g_b = -0.5 * (mp - mm);
        // H′(p) = −PV∫λ′(y)/(y−p) dy / π is the spatial derivative of the
        // Hilbert-transformed profile.
        let hp = if full || mp != 0.0 { -self.principal_value(x + t)? / PI } else { 0.0 };
        let hm = if full || mm != 0.0 { -self.principal_value(x - t)? / PI } else { 0.0 };
        out.pi_c = -0.5 * (hp + hm);
        out.g_c = -0.5 * (hp - hm);
        Ok(out)
    }

    pub fn density(&self, x: f64, t: f64) -> Result<Components> {
        Ok(self.pieces(x, t, false)?.loqc(self.sigma_y, self.alpha_norm))
    }

    pub fn profile(&self, grid: &[f64], t: f64) -> Result<DensityProfile> {
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        let comps: Vec<Components> = grid.par_iter().map(|&x| self.density(x, t)).collect::<Result<_>>()?;
        Ok(DensityProfile::from_components(grid.to_vec(), t, &comps))
    }
}

/// (alice, bob, qet) at (x, t).
pub fn density1d(cfg: &ProtocolConfig, x: f64, t: f64) -> Result<Components> {
    Field1d::new(cfg)?.density(x, t)
}

pub fn profile1d(cfg: &ProtocolConfig, grid: &[f64], t: f64) -> Result<DensityProfile> {
    Field1d::new(cfg)?.profile(grid, t)
}

/// Characterization of the negative-energy well containing the window minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellMetrics {
    pub depth: f64,
    pub width: f64,
    pub integrated_negative: f64,
    pub peak_separation: f64,
    pub well_center: f64,
    pub minimum_position: f64,
    pub left_peak: Option<(f64, f64)>,
    pub right_peak: Option<(f64, f64)>,
}

impl WellMetrics {
    /// depth divided by the taller of the adjacent positive peaks.
    pub fn depth_to_peak_ratio(&self) -> f64 {
        let tallest = [self.left_peak, self.right_peak]
            .iter()
            .flatten()
            .map(|p| p.1)
            .fold(0.0, f64::max);
        if tallest > 0.0 {
            self.depth / tallest
        } else {
            f64::INFINITY
        }
    }

    pub fn flanked(&self) -> bool {
        self.left_peak.is_some() && self.right_peak.is_some()
    }
}

fn zero_crossing(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    x0 + (x1 - x0) * y0 / (y0 - y1)
}

/// Metrics of the negative well whose minimum lies in `window`.
pub fn well_metrics(profile: &DensityProfile, window: (f64, f64)) -> Result<WellMetrics> {
    let (x, y) = (&profile.grid, &profile.total);
    let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= window.0 && x[i] <= window.1).collect();
    let imin = idx
        .iter()
        .copied()
        .min_by(|&a, &b| y[a].total_cmp(&y[b]))
        .ok_or(Error::NoNegativeRegion(window.0, window.1))?;
    if !(y[imin] < 0.0) {
        return Err(Error::NoNegativeRegion(window.0, window.1));
    }
    let mut lo = imin;
    while lo > 0 && y[lo - 1] < 0.0 {
        lo -= 1;
    }
    let mut hi = imin;
    while hi + 1 < x.len() && y[hi + 1] < 0.0 {
        hi += 1;
    }
    let left_edge = if lo > 0 { zero_crossing(x[lo - 1], y[lo - 1], x[lo], y[lo]) } else { x[lo] };
    let right_edge = if hi + 1 < x.len() { zero_crossing(x[hi], y[hi], x[hi + 1], y[hi + 1]) } else { x[hi] };

    let mut xs = vec![left_edge];
    let mut ys = vec![if lo > 0 { 0.0 } else { y[lo] }];
    for i in lo..=hi {
        if x[i] > left_edge && x[i] < right_edge {
            xs.push(x[i]);
            ys.push(y[i]);
        }
    }
    xs.push(right_edge);
    ys.push(if hi + 1 < x.len() { 0.0 } else { y[hi] });
    let integrated = trapezoid(&xs, &ys).min(0.0);

    let center = 0.5 * (left_edge + right_edge);
    let peak_in = |range: Box<dyn Iterator<Item = usize>>| -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for i in range {
            if y[i] < 0.0 {
                break;
            }
            if best.map_or(true, |b| y[i] > b.1) {
                best = Some((x[i], y[i]));
            }
        }
        best.filter(|b| b.1 > 0.0)
    };
    let left_peak = if lo > 0 { peak_in(Box::new((0..lo).rev())) } else { None };
    let right_peak = peak_in(Box::new(hi + 1..x.len()));
    let peak_separation = [left_peak, right_peak]
        .iter()
        .flatten()
        .map(|p| (p.0 - center).abs())
        .fold(f64::INFINITY, f64::min);

    Ok(WellMetrics {
        depth: -y[imin],
        width: right_edge - left_edge,
        integrated_negative: integrated,
        peak_separation,
        well_center: center,
        minimum_position: x[imin],
        left_peak,
        right_peak,
    })
}

/// Integrated energy of a sampled profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub value: f64,
    /// Set when the density at either grid end is not negligible, i.e. the
    /// grid may cut off part of the support.
    pub truncated: bool,
}

pub fn total_energy(profile: &DensityProfile) -> EnergyEstimate {
    let value = trapezoid(&profile.grid, &profile.total);
    let peak = profile.total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ends = [profile.total.first(), profile.total.last()];
    let truncated = ends.iter().flatten().any(|v| v.abs() > 1e-12 * peak);
    EnergyEstimate { value, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smearing::SmearingSpec;

    fn gauss_cfg() -> ProtocolConfig {
        ProtocolConfig::new(
            2,
            SmearingSpec::gaussian(1.0, 1.0, 0.0),
            SmearingSpec::gaussian(0.5, 0.6, 4.0),
            5.0,
        )
    }

    #[test]
    fn alpha_norm_closed_forms() {
        let g: Smearing = SmearingSpec::gaussian(1.7, 0.3, 2.0).into();
        assert!((alpha_norm_1d(&g).unwrap() - 1.7 * 1.7 / (4.0 * PI)).abs() < 1e-12);
        let l: Smearing = SmearingSpec::lorentzian(1.0, 1.0, 0.0).into();
        assert!((alpha_norm_1d(&l).unwrap() - 1.0 / (8.0 * PI)).abs() < 1e-12);
        assert_eq!(alpha_norm_1d(&Smearing::zero()).unwrap(), 0.0);
    }

    #[test]
    fn alice_density_at_unit_offset() {
        let cfg = gauss_cfg();
        let v = alice_density(&cfg, 3.0 + 1.0, 3.0);
        assert!((v - (-1.0f64).exp() / (8.0 * PI)).abs() < 1e-6 * v);
    }

    #[test]
    fn bob_and_qet_vanish_before_interaction() {
        let cfg = gauss_cfg();
        let c = density1d(&cfg, 3.9, 4.9).unwrap();
        assert_eq!((c.bob, c.qet), (0.0, 0.0));
    }

    #[test]
    fn well_metrics_of_a_rectangle() {
        let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 * 0.0075).collect();
        let total: Vec<f64> = grid.iter().map(|&x| if (0.0..=1.0).contains(&x) { -1.0 } else { 1.0 }).collect();
        let p = DensityProfile {
            alice_part: total.clone(),
            bob_part: vec![0.0; grid.len()],
            qet_part: vec![0.0; grid.len()],
            grid,
            time: 0.0,
            total,
        };
        let m = well_metrics(&p, (0.2, 0.8)).unwrap();
        assert_eq!(m.depth, 1.0);
        assert!((m.width - 1.0).abs() < 0.01);
        assert!((m.integrated_negative + 1.0).abs() < 0.01);
        let positive = DensityProfile {
            total: vec![1.0; p.grid.len()],
            ..p
        };
        assert!(matches!(well_metrics(&positive, (0.2, 0.8)), Err(Error::NoNegativeRegion(..))));
    }

    #[test]
    fn causality_gap() {
        let cfg = gauss_cfg();
        let gap = cfg.causal_gap();
        assert!(gap > 0.0 && gap < 5.0);
        let mut far = cfg.clone();
        far.bob.parts[0].center = 40.0;
        assert!(!far.is_causal());
    }
}
