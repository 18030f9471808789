//! Brute-force 1+1 D cross-check: the field in a periodic box of length L is
//! expanded in momentum modes k_m = 2πm/L, Alice's and Bob's kicks become
//! finite displacement vectors, and ⟨:T₀₀:⟩ is evaluated from the
//! four-branch coherent-state superposition with explicit overlaps and
//! displacement (Weyl) phases.
//!
//! Mode sums run over m = −N/2..N/2 including m = 0, whose summand is the
//! k → 0 limit of the continuum integrand. With that term every mode sum is a
//! trapezoid rule for the continuum k-integral, i.e. the periodised field.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field1d::ProtocolConfig;
use crate::protocol::DetectorState;
use crate::smearing::{Family, Smearing};

const RESEED: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub box_length: f64,
    pub mode_count: usize,
    pub config: ProtocolConfig,
}

/// Largest length scale of the configuration: widths, plateau lengths and
/// distances of every component from the origin.
fn largest_length(cfg: &ProtocolConfig) -> f64 {
    cfg.alice
        .parts
        .iter()
        .chain(&cfg.bob.parts)
        .filter(|p| p.amplitude != 0.0)
        .map(|p| p.delta.max(p.sigma).max(p.center.abs() + p.characteristic_halfwidth()))
        .fold(0.0, f64::max)
}

/// Wavenumber scale beyond which a component's transform is negligible,
/// and the cutoff at which it is below round-off.
fn wavenumbers(s: &Smearing) -> (f64, f64) {
    s.parts
        .iter()
        .filter(|p| p.amplitude != 0.0)
        .map(|p| match p.family {
            Family::Gaussian => (1.0 / p.delta, 9.5 / p.delta),
            Family::Lorentzian => (1.0 / p.delta, 40.0 / p.delta),
            Family::Bump => (5.0 / p.delta, 200.0 / p.delta),
        })
        .fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

fn tail_length(s: &Smearing) -> f64 {
    s.parts
        .iter()
        .filter(|p| p.amplitude != 0.0)
        .map(|p| p.delta.max(p.sigma))
        .fold(0.0, f64::max)
}

/// Width of the hull of all components' characteristic supports.
fn support_extent(cfg: &ProtocolConfig) -> f64 {
    let (lo, hi) = cfg
        .alice
        .parts
        .iter()
        .chain(&cfg.bob.parts)
        .filter(|p| p.amplitude != 0.0)
        .map(|p| (p.center - p.characteristic_halfwidth(), p.center + p.characteristic_halfwidth()))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    if hi > lo {
        hi - lo
    } else {
        0.0
    }
}

impl LatticeSpec {
    pub fn new(config: ProtocolConfig, box_length: f64, mode_count: usize) -> Result<Self> {
        let spec = Self {
            box_length,
            mode_count,
            config,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Box of 10⁴ tail lengths (algebraic Hilbert-transform tails then fold
    /// back at the 1e-8 level) with enough modes to reach round-off in every
    /// transform.
    pub fn auto(config: ProtocolConfig, t_max: f64) -> Result<Self> {
        let l = Self::auto_length(&config, t_max);
        let n = Self::auto_modes(&config, l);
        Self::new(config, l, n)
    }

    /// Like [`LatticeSpec::auto`], with L a multiple of the spacing of the
    /// uniform grid `lo..=hi` so whole profiles can be summed by FFT.
    pub fn for_grid(config: ProtocolConfig, t_max: f64, lo: f64, hi: f64, points: usize) -> Result<Self> {
        let mut l = Self::auto_length(&config, t_max);
        if points >= 2 && hi > lo {
            let h = (hi - lo) / (points - 1) as f64;
            l = (l / h).ceil().max(points as f64) * h;
        }
        let n = Self::auto_modes(&config, l);
        Self::new(config, l, n)
    }

    fn auto_length(cfg: &ProtocolConfig, t_max: f64) -> f64 {
        let tails = tail_length(&cfg.alice).max(tail_length(&cfg.bob));
        let extent = support_extent(cfg);
        (1e4 * tails).max(20.0 * largest_length(cfg)).max(2.0 * t_max + 2.0 * extent).max(1.0)
    }

    fn auto_modes(cfg: &ProtocolConfig, l: f64) -> usize {
        let (sa, ca) = wavenumbers(&cfg.alice);
        let (sb, cb) = wavenumbers(&cfg.bob);
        let density = (10.0 * sa.max(sb)).max(ca.max(cb) / PI);
        let n = (density * l).ceil().max(2.0) as usize;
        n + n % 2
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.config.dimension != 2 {
            return Err(Error::DimensionUnsupported(self.config.dimension, "the lattice oracle is 1+1 D only".into()));
        }
        let l = self.box_length;
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Resolution(format!("box length must be positive, got {l}")));
        }
        if self.mode_count < 2 || self.mode_count % 2 != 0 {
            return Err(Error::Resolution(format!("mode count must be even and >= 2, got {}", self.mode_count)));
        }
        let scale = largest_length(&self.config);
        if l < 10.0 * scale {
            return Err(Error::Resolution(format!(
                "box length {l} is below 10x the largest length scale {scale}"
            )));
        }
        let k_sig = wavenumbers(&self.config.alice).0.max(wavenumbers(&self.config.bob).0);
        let per_length = self.mode_count as f64 / l;
        if per_length < 10.0 * k_sig {
            return Err(Error::Resolution(format!(
                "N/L = {per_length} is below 10x the largest significant wavenumber {k_sig}"
            )));
        }
        Ok(())
    }

    pub fn delta_k(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Periodic images of the outgoing pulses have re-entered the region.
    pub fn boundary_echo(&self, t: f64) -> bool {
        t > 0.5 * (self.box_length - support_extent(&self.config))
    }

    fn wavenumber(&self, i: usize) -> f64 {
        (i as f64 - (self.mode_count / 2) as f64) * self.delta_k()
    }
}

/// Transforms λ̃(k_m) for all lattice modes. Bump parts are sampled and summed
/// with the trapezoid rule by FFT (spectrally accurate for smooth compactly
/// supported profiles); the other families use closed forms.
fn lattice_transform(spec: &LatticeSpec, s: &Smearing) -> Result<Vec<Complex64>> {
    let n_modes = spec.mode_count + 1;
    let mut out: Vec<Complex64> = (0..n_modes)
        .map(|i| {
            let k = spec.wavenumber(i);
            s.parts
                .iter()
                .filter(|p| p.family != Family::Bump && p.amplitude != 0.0)
                .try_fold(Complex64::new(0.0, 0.0), |acc, p| Ok(acc + p.fourier1d(k)?))
        })
        .collect::<Result<_>>()?;
    let bumps: Vec<_> = s.parts.iter().filter(|p| p.family == Family::Bump && p.amplitude != 0.0).collect();
    if bumps.is_empty() {
        return Ok(out);
    }
    let lo = bumps.iter().map(|p| p.support(0.0).0).fold(f64::INFINITY, f64::min);
    let hi = bumps.iter().map(|p| p.support(0.0).1).fold(f64::NEG_INFINITY, f64::max);
    let d = bumps.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min);
    let l = spec.box_length;
    let m = next_smooth(((64.0 * l / d).ceil() as usize).max(n_modes + 1));
    let h = l / m as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let samples = (((hi - lo) / h).ceil() as usize + 1).min(m);
    for (j, v) in buf.iter_mut().enumerate().take(samples) {
        let x = lo + j as f64 * h;
        *v = Complex64::new(bumps.iter().map(|p| p.eval(x)).sum(), 0.0);
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    for (i, o) in out.iter_mut().enumerate() {
        let idx = i as i64 - (spec.mode_count / 2) as i64;
        let r = idx.rem_euclid(m as i64) as usize;
        let k = spec.wavenumber(i);
        *o += h * Complex64::from_polar(1.0, -k * lo) * buf[r];
    }
    Ok(out)
}

fn next_smooth(n: usize) -> usize {
    let mut c = n.max(1);
    loop {
        let mut r = c;
        for f in [2, 3, 5] {
            while r % f == 0 {
                r /= f;
            }
        }
        if r == 1 {
            return c;
        }
        c += 1;
    }
}

/// Σ_m c_m e^{i k_m x} at every x.
fn mode_sums(spec: &LatticeSpec, coeffs: &[Vec<Complex64>], xs: &[f64]) -> Vec<Vec<Complex64>> {
    if let Some((x0, m)) = commensurate_grid(spec, xs) {
        return coeffs.iter().map(|c| fft_sum(spec, c, x0, m, xs.len())).collect();
    }
    let dk = spec.delta_k();
    let k0 = spec.wavenumber(0);
    let mut out = vec![Vec::with_capacity(xs.len()); coeffs.len()];
    for &x in xs {
        let step = Complex64::from_polar(1.0, dk * x);
        let mut acc = vec![Complex64::new(0.0, 0.0); coeffs.len()];
        let mut ph = Complex64::new(1.0, 0.0);
        for i in 0..coeffs[0].len() {
            if i % RESEED == 0 {
                ph = Complex64::from_polar(1.0, (k0 + i as f64 * dk) * x);
            }
            for (a, c) in acc.iter_mut().zip(coeffs) {
                *a += c[i] * ph;
            }
            ph *= step;
        }
        for (o, a) in out.iter_mut().zip(acc) {
            o.push(a);
        }
    }
    out
}

fn commensurate_grid(spec: &LatticeSpec, xs: &[f64]) -> Option<(f64, usize)> {
    if xs.len() < 16 {
        return None;
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    if !(h > 0.0) {
        return None;
    }
    let scale = xs[0].abs().max(xs[xs.len() - 1].abs()).max(h);
    if xs.iter().enumerate().any(|(j, &x)| (x - xs[0] - j as f64 * h).abs() > 1e-12 * scale) {
        return None;
    }
    let m = (spec.box_length / h).round();
    if (m * h - spec.box_length).abs() > 1e-10 * spec.box_length || (m as usize) < xs.len() {
        return None;
    }
    Some((xs[0], m as usize))
}

fn fft_sum(spec: &LatticeSpec, c: &[Complex64], x0: f64, m: usize, points: usize) -> Vec<Complex64> {
    let mut bins = vec![Complex64::new(0.0, 0.0); m];
    for (i, &ci) in c.iter().enumerate() {
        let idx = i as i64 - (spec.mode_count / 2) as i64;
        bins[idx.rem_euclid(m as i64) as usize] += ci * Complex64::from_polar(1.0, spec.wavenumber(i) * x0);
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut bins);
    bins.truncate(points);
    bins
}

/// Displacement data of one configuration on one lattice.
struct Lattice<'a> {
    spec: &'a LatticeSpec,
    lambda: Vec<Complex64>,
    mu: Vec<Complex64>,
    /// Σ Δk |α_k|².
    alpha_sq: f64,
    /// Σ Δk conj(α_k(T)) β_k / z.
    w: Complex64,
}

fn sign(k: f64) -> f64 {
    if k > 0.0 {
        1.0
    } else if k < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// ⟨z|s⟩⟨s|A₀⟩ with |±⟩ = (|g⟩ ± |e⟩)/√2 and z = +1 ↔ e.
fn branch_amplitude(d: &DetectorState, s: f64, z: f64) -> Complex64 {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let amp = if s > 0.0 { d.amplitude_plus } else { d.amplitude_minus };
    let proj = if z > 0.0 && s < 0.0 { -r } else { r };
    amp * proj
}

impl<'a> Lattice<'a> {
    fn new(spec: &'a LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let cfg = &spec.config;
        let lambda = lattice_transform(spec, &cfg.alice)?;
        let mu = lattice_transform(spec, &cfg.bob)?;
        let dk = spec.delta_k();
        let t_b = cfg.interaction_time;
        let mut alpha_sq = 0.0;
        let mut w = Complex64::new(0.0, 0.0);
        for i in 0..lambda.len() {
            let k = spec.wavenumber(i);
            alpha_sq += dk * k.abs() * lambda[i].norm_sqr() / (4.0 * PI);
            let a = lambda[i] * Complex64::from_polar(1.0, -k.abs() * t_b);
            let b = Complex64::new(0.0, -1.0) * mu[i];
            w += dk * a.conj() * b / (4.0 * PI);
        }
        Ok(Self {
            spec,
            lambda,
            mu,
            alpha_sq,
            w,
        })
    }

    fn density(&self, xs: &[f64], t: f64) -> Vec<f64> {
        let spec = self.spec;
        let cfg = &spec.config;
        let dk = spec.delta_k();
        let tau = t - cfg.interaction_time;
        let bob_on = tau >= 0.0;
        let n = self.lambda.len();
        let pref_pi = Complex64::new(0.0, -dk / (4.0 * PI));
        let mut coeffs = vec![Vec::with_capacity(n); if bob_on { 4 } else { 2 }];
        for i in 0..n {
            let k = spec.wavenumber(i);
            let pref_grad = Complex64::new(0.0, dk * sign(k) / (4.0 * PI));
            let a = k.abs() * self.lambda[i] * Complex64::from_polar(1.0, -k.abs() * t);
            coeffs[0].push(pref_pi * a);
            coeffs[1].push(pref_grad * a);
            if bob_on {
                let b = Complex64::new(0.0, -1.0) * self.mu[i] * Complex64::from_polar(1.0, -k.abs() * tau);
                coeffs[2].push(pref_pi * b);
                coeffs[3].push(pref_grad * b);
            }
        }
        let sums = mode_sums(spec, &coeffs, xs);
        if !bob_on {
            return (0..xs.len())
                .map(|j| {
                    let p = 2.0 * sums[0][j].re;
                    let q = 2.0 * sums[1][j].re;
                    0.5 * (p * p + q * q)
                })
                .collect();
        }
        let d = &cfg.detector;
        let mut terms = Vec::new();
        for z in [1.0, -1.0] {
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    let c = branch_amplitude(d, s1, z).conj() * branch_amplitude(d, s2, z);
                    let (w, a2) = (self.w, self.alpha_sq);
                    let overlap = (s1 * s2 - 1.0) * a2 + z * (s1 * w + s2 * w.conj() - (s1 + s2) * w.re);
                    let weyl = Complex64::new(0.0, z * (s2 - s1) * w.im);
                    terms.push((z, s1, s2, c * (overlap + weyl).exp()));
                }
            }
        }
        (0..xs.len())
            .map(|j| {
                let (pa, qa, pb, qb) = (sums[0][j], sums[1][j], sums[2][j], sums[3][j]);
                let mut acc = Complex64::new(0.0, 0.0);
                for &(z, s1, s2, c) in &terms {
                    let p = s2 * pa + z * pb + (s1 * pa + z * pb).conj();
                    let q = s2 * qa + z * qb + (s1 * qa + z * qb).conj();
                    acc += c * 0.5 * (p * p + q * q);
                }
                acc.re
            })
            .collect()
    }

    /// ⟨:H:⟩ from the mode occupations, Σ Δk |k| γ₁*γ₂ per branch pair.
    fn total_energy(&self, t: f64) -> f64 {
        let spec = self.spec;
        let cfg = &spec.config;
        let dk = spec.delta_k();
        let alice: f64 = (0..self.lambda.len())
            .map(|i| {
                let k = spec.wavenumber(i);
                dk * k * k * self.lambda[i].norm_sqr() / (4.0 * PI)
            })
            .sum();
        if t < cfg.interaction_time {
            return alice;
        }
        let bob: f64 = self.mu.iter().map(|m| dk * m.norm_sqr() / (4.0 * PI)).sum();
        // Σ Δk |k| conj(α_k(T)) β_k / z.
        let cross: Complex64 = (0..self.lambda.len())
            .map(|i| {
                let k = spec.wavenumber(i);
                let a = self.lambda[i] * Complex64::from_polar(1.0, -k.abs() * cfg.interaction_time);
                dk * k.abs() * a.conj() * Complex64::new(0.0, -1.0) * self.mu[i] / (4.0 * PI)
            })
            .sum();
        let d = &cfg.detector;
        let mut acc = Complex64::new(0.0, 0.0);
        for z in [1.0, -1.0] {
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    let c = branch_amplitude(d, s1, z).conj() * branch_amplitude(d, s2, z);
                    let (w, a2) = (self.w, self.alpha_sq);
                    let overlap = (s1 * s2 - 1.0) * a2 + z * (s1 * w + s2 * w.conj() - (s1 + s2) * w.re);
                    let weyl = Complex64::new(0.0, z * (s2 - s1) * w.im);
                    let h = s1 * s2 * alice + bob + z * (s1 * cross + s2 * cross.conj());
                    acc += c * (overlap + weyl).exp() * h;
                }
            }
        }
        acc.re
    }
}

/// ⟨:T₀₀(x, t):⟩ from the mode sums.
pub fn oracle_density(spec: &LatticeSpec, x: f64, t: f64) -> Result<f64> {
    Ok(oracle_profile(spec, &[x], t)?[0])
}

pub fn oracle_profile(spec: &LatticeSpec, grid: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!("oracle time must be >= 0, got {t}")));
    }
    Ok(Lattice::new(spec)?.density(grid, t))
}

/// Field energy in the box.
pub fn oracle_total_energy(spec: &LatticeSpec, t: f64) -> Result<f64> {
    Ok(Lattice::new(spec)?.total_energy(t))
}

/// max |candidate − reference| / max |reference|.
pub fn relative_deviation(reference: &[f64], candidate: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = reference.iter().zip(candidate).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Refinement {
    /// Double N at fixed L: raises the wavenumber cutoff.
    Modes,
    /// Double N and L together: halves the mode spacing.
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub mode_count: usize,
    pub box_length: f64,
    pub value: f64,
    pub difference: Option<f64>,
    pub boundary_echo: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// log₂ of the last ratio of successive differences.
    pub observed_order: Option<f64>,
    pub monotone: bool,
}

pub fn convergence_report(
    spec: &LatticeSpec,
    x: f64,
    t: f64,
    refinements: usize,
    refinement: Refinement,
) -> Result<ConvergenceReport> {
    if refinements < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: refinements,
        });
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(refinements);
    let mut current = spec.clone();
    for level in 0..refinements {
        if level > 0 {
            current.mode_count *= 2;
            if refinement == Refinement::Box {
                current.box_length *= 2.0;
            }
        }
        let value = oracle_density(&current, x, t)?;
        let difference = rows.last().map(|r| (value - r.value).abs());
        rows.push(ConvergenceRow {
            mode_count: current.mode_count,
            box_length: current.box_length,
            value,
            difference,
            boundary_echo: current.boundary_echo(t),
        });
    }
    let diffs: Vec<f64> = rows.iter().filter_map(|r| r.difference).collect();
    let monotone = diffs.windows(2).all(|w| w[1] <= w[0]);
    let observed_order = match diffs.as_slice() {
        [.., a, b] if *a > 0.0 && *b > 0.0 => Some((a / b).log2()),
        _ => None,
    };
    Ok(ConvergenceReport {
        rows,
        observed_order,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field1d::alice_density;
    use crate::smearing::SmearingSpec;

    fn qet_config() -> ProtocolConfig {
        ProtocolConfig::new(2, SmearingSpec::gaussian(1.0, 1.0, 0.0), SmearingSpec::gaussian(-0.8, 0.5, 4.0), 5.0)
    }

    #[test]
    fn vacuum_is_zero() {
        let cfg = ProtocolConfig::new(2, Smearing::zero(), Smearing::zero(), 1.0);
        let spec = LatticeSpec::new(cfg, 100.0, 64).unwrap();
        assert_eq!(oracle_profile(&spec, &[-1.0, 0.0, 2.5], 3.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn alice_only_matches_closed_form() {
        let cfg = ProtocolConfig::new(2, SmearingSpec::gaussian(1.3, 0.8, 0.5), Smearing::zero(), 2.0);
        let spec = LatticeSpec::auto(cfg.clone(), 6.0).unwrap();
        let xs: Vec<f64> = (0..41).map(|i| -10.0 + 0.5 * i as f64).collect();
        for t in [0.0, 1.5, 6.0] {
            let o = oracle_profile(&spec, &xs, t).unwrap();
            let r: Vec<f64> = xs.iter().map(|&x| alice_density(&cfg, x, t)).collect();
            assert!(relative_deviation(&r, &o) < 1e-8, "t={t}");
        }
    }

    #[test]
    fn uniform_grid_fft_matches_direct_sum() {
        let cfg = qet_config();
        let spec = LatticeSpec::for_grid(cfg, 7.0, -10.0, 10.0, 201).unwrap();
        let xs: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * i as f64).collect();
        let fast = oracle_profile(&spec, &xs, 7.0).unwrap();
        for j in [0, 37, 120, 200] {
            let direct = oracle_density(&spec, xs[j], 7.0).unwrap();
            assert!((direct - fast[j]).abs() < 1e-13, "{direct} {}", fast[j]);
        }
    }

    #[test]
    fn bump_transform_matches_quadrature() {
        let s = SmearingSpec::bump(0.7, 0.6, 1.1, -2.0);
        let cfg = ProtocolConfig::new(2, s, Smearing::zero(), 1.0);
        let spec = LatticeSpec::new(cfg.clone(), 200.0, 40_000).unwrap();
        let t = lattice_transform(&spec, &cfg.alice).unwrap();
        for i in [20_000, 20_001, 20_050, 20_700, 19_000] {
            let k = spec.wavenumber(i);
            let q = s.fourier1d(k).unwrap();
            assert!((t[i] - q).norm() < 1e-12, "k={k}: {} vs {}", t[i], q);
        }
    }

    #[test]
    fn box_integral_equals_mode_energy() {
        let cfg = qet_config().with_detector(DetectorState::from_bloch(0.9, 1.2));
        let spec = LatticeSpec::new(cfg, 400.0, 8000).unwrap();
        let m = 8000;
        let h = spec.box_length / m as f64;
        let xs: Vec<f64> = (0..m).map(|j| -200.0 + j as f64 * h).collect();
        for t in [3.0, 7.0, 11.0] {
            let d = oracle_profile(&spec, &xs, t).unwrap();
            let e = oracle_total_energy(&spec, t).unwrap();
            assert!(e > 0.0);
            assert!((d.iter().sum::<f64>() * h - e).abs() < 1e-12 * e, "t={t}");
        }
        let e7 = oracle_total_energy(&spec, 7.0).unwrap();
        let e11 = oracle_total_energy(&spec, 11.0).unwrap();
        assert!((e7 - e11).abs() < 1e-14);
    }

    #[test]
    fn resolution_checks() {
        let cfg = qet_config();
        assert!(matches!(LatticeSpec::new(cfg.clone(), 20.0, 4000), Err(Error::Resolution(_))));
        assert!(matches!(LatticeSpec::new(cfg.clone(), 400.0, 400), Err(Error::Resolution(_))));
        assert!(matches!(LatticeSpec::new(cfg, 400.0, 8001), Err(Error::Resolution(_))));
    }

    #[test]
    fn boundary_echo_flag() {
        let spec = LatticeSpec::new(qet_config(), 100.0, 2000).unwrap();
        assert!(!spec.boundary_echo(30.0));
        assert!(spec.boundary_echo(60.0));
        let r = convergence_report(&spec, 1.0, 60.0, 2, Refinement::Modes).unwrap();
        assert!(r.rows.iter().all(|row| row.boundary_echo));
    }

    #[test]
    fn converged_spec_is_stable_under_refinement() {
        let spec = LatticeSpec::auto(qet_config(), 7.0).unwrap();
        let r = convergence_report(&spec, 2.0, 7.0, 3, Refinement::Modes).unwrap();
        assert!(r.rows.iter().skip(1).all(|row| row.difference.unwrap() < 1e-10));
    }

    #[test]
    fn small_box_converges_with_growing_box() {
        let spec = LatticeSpec::new(qet_config(), 60.0, 1200).unwrap();
        let r = convergence_report(&spec, 2.0, 7.0, 5, Refinement::Box).unwrap();
        assert!(r.monotone, "{r:?}");
        assert!(r.observed_order.unwrap() >= 1.0, "{r:?}");
        assert!(convergence_report(&spec, 2.0, 7.0, 1, Refinement::Box).is_err());
    }
}
