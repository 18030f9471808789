//! Υ-rescaling of whole protocols. With Alice's amplitude ×Υ^{(n−2)/2}, Bob's
//! ×Υ^{n/2}, every length ×1/Υ and T → T/Υ, the energy density obeys
//! D_scaled(x, t) = Υⁿ D(Υx, Υt) exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field1d::{alpha_norm_1d, profile1d, well_metrics, DensityProfile, ProtocolConfig, WellMetrics};
use crate::fieldnd::{alpha_norm_nd, radial_profile_nd};
use crate::smearing::Smearing;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingTransform {
    pub upsilon: f64,
    /// Exponent of Bob's amplitude factor.
    pub xi: f64,
    pub n: usize,
}

impl ScalingTransform {
    pub fn new(upsilon: f64, n: usize) -> Result<Self> {
        if !(upsilon > 0.0) || !upsilon.is_finite() {
            return Err(Error::Config(format!("upsilon must be positive and finite, got {upsilon}")));
        }
        Ok(Self {
            upsilon,
            xi: 0.5 * n as f64,
            n,
        })
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }
}

fn rescale_lengths(s: &Smearing, upsilon: f64, amplitude_factor: f64) -> Smearing {
    let mut out = s.clone();
    for p in &mut out.parts {
        p.amplitude *= amplitude_factor;
        p.delta /= upsilon;
        p.sigma /= upsilon;
        p.center /= upsilon;
        p.shell_radius /= upsilon;
    }
    out
}

pub fn rescale_config(cfg: &ProtocolConfig, t: &ScalingTransform) -> ProtocolConfig {
    let u = t.upsilon;
    let n = t.n as f64;
    ProtocolConfig {
        dimension: cfg.dimension,
        alice: rescale_lengths(&cfg.alice, u, u.powf(0.5 * (n - 2.0))),
        bob: rescale_lengths(&cfg.bob, u, u.powf(t.xi)),
        interaction_time: cfg.interaction_time / u,
        detector: cfg.detector,
        uv_cutoff: cfg.uv_cutoff / u,
    }
}

/// Profile at time `t` on `grid` (radial for n = 4).
pub fn density_profile(cfg: &ProtocolConfig, grid: &[f64], t: f64) -> Result<DensityProfile> {
    match cfg.dimension {
        2 => profile1d(cfg, grid, t),
        4 => radial_profile_nd(cfg, grid, t - cfg.interaction_time),
        n => Err(Error::DimensionUnsupported(n, "profiles exist for n = 2 and n = 4".into())),
    }
}

/// max |D_scaled(x, τ) − Υⁿ D(Υx, Υτ)| / max |Υⁿ D(Υx, Υτ)| over `grid`, where
/// `time` = τ is measured in the scaled frame.
pub fn verify_scaling(cfg: &ProtocolConfig, t: &ScalingTransform, grid: &[f64], time: f64) -> Result<f64> {
    if t.n != cfg.dimension {
        return Err(Error::Config(format!(
            "transform is for n = {} but the configuration has n = {}",
            t.n, cfg.dimension
        )));
    }
    if (t.xi - 0.5 * t.n as f64).abs() > 1e-15 {
        return Err(Error::Config("the exact scaling law requires xi = n/2".into()));
    }
    let scaled = rescale_config(cfg, t);
    let u = t.upsilon;
    let mine = density_profile(&scaled, grid, time)?;
    let stretched: Vec<f64> = grid.iter().map(|&x| u * x).collect();
    let original = density_profile(cfg, &stretched, u * time)?;
    let factor = u.powi(t.n as i32);
    let reference: Vec<f64> = original.total.iter().map(|v| factor * v).collect();
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = reference
        .iter()
        .zip(&mine.total)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Ordinary least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: x.len().min(y.len()),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData { needed: 2, got: 1 });
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

fn alpha_norm_n(alice: &Smearing, n: usize) -> Result<f64> {
    match n {
        2 => alpha_norm_1d(alice),
        _ => alpha_norm_nd(alice, n, 0.0),
    }
}

/// Log-log slope of ‖α‖ under λ(x) → λ(Υx) at fixed amplitude.
pub fn alpha_norm_scaling_check(alice: &Smearing, n: usize, upsilons: &[f64]) -> Result<f64> {
    let mut distinct = upsilons.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: distinct.len(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &u in &distinct {
        ScalingTransform::new(u, n)?;
        let a = alpha_norm_n(&rescale_lengths(alice, u, 1.0), n)?;
        xs.push(u.ln());
        ys.push(a.ln());
    }
    fit_slope(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumInterestSample {
    pub upsilon: f64,
    pub metrics: WellMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumInterestReport {
    /// Slope of log(width) against log|integrated negative energy|.
    pub width_vs_energy: f64,
    /// Slope of log(peak separation) against log|integrated negative energy|.
    pub separation_vs_energy: f64,
    pub width_vs_upsilon: f64,
    pub depth_vs_upsilon: f64,
    pub energy_vs_upsilon: f64,
    pub samples: Vec<QuantumInterestSample>,
}

/// Rescales a configuration that already has a negative well in `window` at
/// time `time` and fits the well's size against its energy.
pub fn quantum_interest_exponents(
    cfg: &ProtocolConfig,
    upsilons: &[f64],
    grid: &[f64],
    time: f64,
    window: (f64, f64),
) -> Result<QuantumInterestReport> {
    if upsilons.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: upsilons.len(),
        });
    }
    let mut samples = Vec::with_capacity(upsilons.len());
    for &u in upsilons {
        let t = ScalingTransform::new(u, cfg.dimension)?;
        let scaled = rescale_config(cfg, &t);
        let g: Vec<f64> = grid.iter().map(|x| x / u).collect();
        let profile = density_profile(&scaled, &g, time / u)?;
        let metrics = match well_metrics(&profile, (window.0 / u, window.1 / u)) {
            Ok(m) => m,
            Err(Error::NoNegativeRegion(..)) => return Err(Error::InsufficientWells(u)),
            Err(e) => return Err(e),
        };
        samples.push(QuantumInterestSample { upsilon: u, metrics });
    }
    let log = |f: &dyn Fn(&WellMetrics) -> f64| -> Vec<f64> { samples.iter().map(|s| f(&s.metrics).ln()).collect() };
    let lu: Vec<f64> = samples.iter().map(|s| s.upsilon.ln()).collect();
    let le = log(&|m| m.integrated_negative.abs());
    let lw = log(&|m| m.width);
    let ls = log(&|m| m.peak_separation);
    let ld = log(&|m| m.depth);
    Ok(QuantumInterestReport {
        width_vs_energy: fit_slope(&le, &lw)?,
        separation_vs_energy: fit_slope(&le, &ls)?,
        width_vs_upsilon: fit_slope(&lu, &lw)?,
        depth_vs_upsilon: fit_slope(&lu, &ld)?,
        energy_vs_upsilon: fit_slope(&lu, &le)?,
        samples,
    })
}
