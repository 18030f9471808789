//! 3+1 D energy density for concentric, spherically symmetric smearings.
//!
//! Every field quantity is a single k-integral of a radial transform against
//! spherical Bessel kernels, damped by e^{−2εk}; the cutoff is removed by
//! extrapolating ε → 0.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field1d::{Components, DensityProfile, ProtocolConfig};
use crate::protocol::{sigma_y_expectation, Branch, FieldPieces};
use crate::quad::{composite_gauss_legendre, extrapolate_to_zero, Adaptive};
use crate::smearing::{Family, Smearing};
use crate::special::{bessel_j0, sph_j0, sph_j1};

const GL_ORDER: usize = 16;
const K_THRESHOLD: f64 = 1e-15;
const REFINE_TOL: f64 = 1e-10;

/// 2-D radial transform 2π ∫ r J0(kr) λ(r) dr.
fn planar_radial_ft(s: &Smearing, k: f64) -> Result<f64> {
    let mut acc = 0.0;
    for p in s.parts.iter().filter(|p| p.amplitude != 0.0) {
        if p.family == Family::Gaussian && p.shell_radius == 0.0 {
            acc += p.amplitude * (2.0 * PI).sqrt() * p.delta * p.delta * (-0.5 * (k * p.delta).powi(2)).exp();
            continue;
        }
        let (lo, hi) = p.radial_support(1e-17);
        let n = ((hi - lo) * k / PI).ceil().min(4000.0) as usize;
        let breaks: Vec<f64> = (1..n.max(1)).map(|i| lo + i as f64 * (hi - lo) / n as f64).collect();
        let q = Adaptive::new(1e-15 * p.amplitude.abs() * hi * hi, 1e-13).with_max_panels(40_000);
        acc += 2.0 * PI * q.integrate_with_breaks(|r| r * bessel_j0(k * r) * p.eval_radial(r), lo, hi, &breaks)?;
    }
    Ok(acc)
}

/// ‖α‖ = (1/(2(2π)^{n−1})) ∫ d^{n−1}k |k| e^{−2ε|k|} |λ̃(k)|².
pub fn alpha_norm_nd(alice: &Smearing, n: usize, eps: f64) -> Result<f64> {
    if alice.is_zero() {
        return Ok(0.0);
    }
    let (weight, transform): (f64, Box<dyn Fn(f64) -> Result<f64> + Sync + '_>) = match n {
        2 => (1.0 / (2.0 * PI), Box::new(|k: f64| Ok(k * alice.fourier1d(k)?.norm_sqr()))),
        3 => (1.0 / (4.0 * PI), Box::new(|k: f64| Ok(k * k * planar_radial_ft(alice, k)?.powi(2)))),
        4 => (1.0 / (4.0 * PI * PI), Box::new(|k: f64| Ok(k.powi(3) * alice.radial_ft(k)?.powi(2)))),
        _ => return Err(Error::DimensionUnsupported(n, "alpha norm implemented for n = 2, 3, 4".into())),
    };
    let failure = Mutex::new(None);
    let f = |k: f64| -> f64 {
        if k == 0.0 {
            return 0.0;
        }
        match transform(k) {
            Ok(v) => v * (-2.0 * eps * k).exp(),
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let scale = alice.smallest_length().unwrap_or(1.0);
    let extent = alice.parts.iter().map(|p| p.shell_radius).fold(0.0, f64::max);
    let mut hi = 10.0 / scale;
    let breaks = |lo: f64, hi: f64| -> Vec<f64> {
        let m = ((hi - lo) * (extent + scale) / PI).ceil().min(2000.0) as usize;
        (1..m.max(1)).map(|i| lo + i as f64 * (hi - lo) / m as f64).collect()
    };
    let q = Adaptive::new(0.0, 1e-12).with_max_panels(40_000);
    let mut total = q.integrate_with_breaks(&f, 0.0, hi, &breaks(0.0, hi));
    for _ in 0..30 {
        if let Some(e) = failure.lock().unwrap().take() {
            return Err(e);
        }
        let t = total?;
        let piece = Adaptive::new(1e-16 * t.abs(), 1e-12)
            .with_max_panels(40_000)
            .integrate_with_breaks(&f, hi, 2.0 * hi, &breaks(hi, 2.0 * hi))?;
        hi *= 2.0;
        total = Ok(t + piece);
        if piece.abs() <= 1e-15 * (t + piece).abs() {
            return Ok(weight * (t + piece));
        }
    }
    Err(Error::NonConvergence {
        lower: 0.0,
        upper: hi,
        estimate: total.unwrap_or(f64::NAN),
        tolerance: 1e-15,
    })
}

/// The I-integrals at one point: time (`i0`) and radial (`ir`) components for
/// indices 1, 2, 3. Index 2 is purely imaginary and holds its imaginary part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralSet {
    pub i0: [f64; 3],
    pub ir: [f64; 3],
    pub eval_point: f64,
    pub delta_t: f64,
    pub cutoff: f64,
}

/// −2(2π)³, the factor between the I-integrals and the classical field pieces.
const I_FACTOR: f64 = -2.0 * 8.0 * PI * PI * PI;

impl IntegralSet {
    fn from_pieces(p: &FieldPieces, x: f64, delta_t: f64, cutoff: f64) -> Self {
        Self {
            i0: [I_FACTOR * p.pi_b, I_FACTOR * p.pi_a, I_FACTOR * p.pi_c],
            ir: [I_FACTOR * p.g_b, I_FACTOR * p.g_a, I_FACTOR * p.g_c],
            eval_point: x,
            delta_t,
            cutoff,
        }
    }

    /// Energy density components from the tensor assembly
    /// T₀₀ ∝ I₀J₀ − ½η₀₀(I₀J₀ − I_rJ_r) with prefactor 1/(4(2π)^{2n−2}), n = 4.
    pub fn assemble(&self, sigma_y: f64, alpha_norm: f64) -> Components {
        let pref = 1.0 / (4.0 * (2.0 * PI).powi(6));
        let t00 = |a0: f64, ar: f64, b0: f64, br: f64| a0 * b0 - 0.5 * (a0 * b0 - ar * br);
        let [b0, a0, c0] = self.i0;
        let [br, ar, cr] = self.ir;
        Components {
            bob: pref * t00(b0, br, b0, br),
            // I² = i·(a0, ar), so its square carries a factor −1.
            alice: -pref * -t00(a0, ar, a0, ar),
            qet: -sigma_y * (-2.0 * alpha_norm).exp() * 2.0 * pref * t00(b0, br, c0, cr),
        }
    }
}

struct KGrid {
    k: Vec<f64>,
    w: Vec<f64>,
    f_alice: Vec<f64>,
    f_bob: Vec<f64>,
}

/// Evaluator holding transforms cached on composite Gauss–Legendre k-grids.
pub struct Field3d<'a> {
    cfg: &'a ProtocolConfig,
    sigma_y: f64,
    eps: Vec<f64>,
    kmax: f64,
    base_extent: f64,
    grids: Mutex<HashMap<usize, Arc<KGrid>>>,
    alpha_norm: f64,
}

fn kmax_for(s: &Smearing, power: i32, min_len: f64) -> Result<f64> {
    if s.is_zero() {
        return Ok(0.0);
    }
    let extent = s.parts.iter().map(|p| p.shell_radius).fold(0.0, f64::max);
    let h = (0.25 * min_len.recip()).min(PI / (4.0 * (extent + min_len)));
    let cap = 2000.0 / min_len;
    let mut peak: f64 = 0.0;
    let mut f_peak: f64 = 0.0;
    let mut last_sig = 0.0;
    let mut k = h;
    let run = (2.0 * PI / (extent + min_len)).max(20.0 * h);
    while k < cap {
        let f = s.radial_ft(k)?.abs();
        let v = k.powi(power) * f;
        peak = peak.max(v);
        f_peak = f_peak.max(f);
        // Numerically evaluated transforms bottom out at a round-off floor.
        if v >= K_THRESHOLD * peak && f >= 1e-13 * f_peak {
            last_sig = k;
        }
        if k > 4.0 / min_len && k > last_sig + run && k > 1.25 * last_sig {
            break;
        }
        k += h;
    }
    Ok((last_sig + run).min(cap))
}

impl<'a> Field3d<'a> {
    pub fn new(cfg: &'a ProtocolConfig) -> Result<Self> {
        if cfg.dimension != 4 {
            return Err(Error::DimensionUnsupported(cfg.dimension, "radial evaluator requires n = 4".into()));
        }
        for p in cfg.alice.parts.iter().chain(&cfg.bob.parts) {
            p.validate()?;
            if p.center != 0.0 {
                return Err(Error::DimensionUnsupported(
                    4,
                    "Alice and Bob must be concentric about the origin".into(),
                ));
            }
        }
        let sigma_y = sigma_y_expectation(&cfg.detector)?;
        let min_len = cfg
            .alice
            .smallest_length()
            .into_iter()
            .chain(cfg.bob.smallest_length())
            .fold(f64::INFINITY, f64::min);
        let min_len = if min_len.is_finite() { min_len } else { 1.0 };
        let eps = if cfg.uv_cutoff > 0.0 {
            vec![cfg.uv_cutoff]
        } else {
            let e0 = 1e-3 * min_len;
            vec![e0, 0.5 * e0, 0.25 * e0]
        };
        let kmax = kmax_for(&cfg.alice, 3, min_len)?.max(kmax_for(&cfg.bob, 2, min_len)?);
        let base_extent = cfg
            .alice
            .parts
            .iter()
            .chain(&cfg.bob.parts)
            .map(|p| p.shell_radius + p.characteristic_halfwidth())
            .fold(min_len, f64::max);
        let mut field = Self {
            cfg,
            sigma_y,
            eps,
            kmax,
            base_extent,
            grids: Mutex::new(HashMap::new()),
            alpha_norm: 0.0,
        };
        field.alpha_norm = field.compute_alpha_norm()?;
        Ok(field)
    }

    pub fn alpha_norm(&self) -> f64 {
        self.alpha_norm
    }

    pub fn cutoffs(&self) -> &[f64] {
        &self.eps
    }

    pub fn config(&self) -> &ProtocolConfig {
        self.cfg
    }

    pub fn kmax(&self) -> f64 {
        self.kmax
    }

    fn grid(&self, panels: usize) -> Result<Arc<KGrid>> {
        if let Some(g) = self.grids.lock().unwrap().get(&panels) {
            return Ok(g.clone());
        }
        let (k, w) = composite_gauss_legendre(0.0, self.kmax, panels, GL_ORDER);
        let f_alice = k.par_iter().map(|&k| self.cfg.alice.radial_ft(k)).collect::<Result<Vec<_>>>()?;
        let f_bob = k.par_iter().map(|&k| self.cfg.bob.radial_ft(k)).collect::<Result<Vec<_>>>()?;
        let g = Arc::new(KGrid { k, w, f_alice, f_bob });
        self.grids.lock().unwrap().insert(panels, g.clone());
        Ok(g)
    }

    fn base_panels(&self, extent: f64) -> usize {
        let periods = self.kmax * (extent + self.base_extent) / (2.0 * PI);
        (periods.ceil() as usize).max(8).next_power_of_two()
    }

    fn compute_alpha_norm(&self) -> Result<f64> {
        if self.cfg.alice.is_zero() {
            return Ok(0.0);
        }
        let eval = |g: &KGrid| -> Vec<f64> {
            self.eps
                .iter()
                .map(|&e| {
                    g.k.iter()
                        .zip(&g.w)
                        .zip(&g.f_alice)
                        .map(|((&k, &w), &f)| w * k.powi(3) * f * f * (-2.0 * e * k).exp())
                        .sum::<f64>()
                        / (4.0 * PI * PI)
                })
                .collect()
        };
        let mut panels = self.base_panels(0.0);
        let mut prev = eval(&*self.grid(panels)?);
        for _ in 0..8 {
            panels *= 2;
            let cur = eval(&*self.grid(panels)?);
            let ok = cur.iter().zip(&prev).all(|(c, p)| (c - p).abs() <= REFINE_TOL * c.abs());
            prev = cur;
            if ok {
                return self.extrapolate(&prev, "alpha norm");
            }
        }
        Err(Error::NonConvergence {
            lower: 0.0,
            upper: self.kmax,
            estimate: prev[0],
            tolerance: REFINE_TOL,
        })
    }

    fn extrapolate(&self, values: &[f64], what: &str) -> Result<f64> {
        if values.len() == 1 {
            return Ok(values[0]);
        }
        let full = extrapolate_to_zero(&self.eps, values);
        let linear = extrapolate_to_zero(&self.eps[1..], &values[1..]);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if (full - linear).abs() > 1e-3 * scale + 1e-300 || !full.is_finite() {
            return Err(Error::ExtrapolationDivergence(format!(
                "{what}: quadratic and linear extrapolants {full:.6e}, {linear:.6e} disagree"
            )));
        }
        Ok(full)
    }

    /// Field pieces at radius `rho`, Alice time `t` and Bob time `tau`, one
    /// set per cutoff, plus the sum of absolute integrand weights.
    fn raw_pieces(&self, g: &KGrid, rho: f64, t: f64, tau: f64) -> (Vec<FieldPieces>, f64) {
        let c = 1.0 / (2.0 * PI * PI);
        let bob_on = tau >= 0.0;
        let mut out = vec![FieldPieces::default(); self.eps.len()];
        let mut l1 = 0.0;
        for i in 0..g.k.len() {
            let (k, w) = (g.k[i], g.w[i]);
            let (j0, j1) = (sph_j0(k * rho), sph_j1(k * rho));
            let (st, ct) = (k * t).sin_cos();
            let a = w * c * k.powi(3) * g.f_alice[i];
            let mut p = FieldPieces {
                pi_a: -a * st * j0,
                g_a: -a * ct * j1,
                pi_c: -a * ct * j0,
                g_c: a * st * j1,
                ..FieldPieces::default()
            };
            l1 += a.abs();
            if bob_on {
                let b = w * c * k * k * g.f_bob[i];
                let (sb, cb) = (k * tau).sin_cos();
                p.pi_b = -b * cb * j0;
                p.g_b = b * sb * j1;
                l1 += b.abs();
            }
            for (o, &e) in out.iter_mut().zip(&self.eps) {
                let d = (-2.0 * e * k).exp();
                o.pi_a += d * p.pi_a;
                o.g_a += d * p.g_a;
                o.pi_c += d * p.pi_c;
                o.g_c += d * p.g_c;
                o.pi_b += d * p.pi_b;
                o.g_b += d * p.g_b;
            }
        }
        (out, l1)
    }

    /// Converged pieces at each cutoff.
    fn pieces_per_cutoff(&self, rho: f64, delta_t: f64) -> Result<Vec<FieldPieces>> {
        let t = self.cfg.interaction_time + delta_t;
        let mut panels = self.base_panels(rho + t.abs().max(delta_t.abs()));
        let (mut prev, _) = self.raw_pieces(&*self.grid(panels)?, rho, t, delta_t);
        for _ in 0..8 {
            panels *= 2;
            let (cur, l1) = self.raw_pieces(&*self.grid(panels)?, rho, t, delta_t);
            let ok = cur.iter().zip(&prev).all(|(c, p)| {
                let cv = pieces_vec(c);
                let pv = pieces_vec(p);
                let mag = cv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                cv.iter()
                    .zip(&pv)
                    .all(|(a, b)| (a - b).abs() <= REFINE_TOL * mag + 1e-14 * l1)
            });
            prev = cur;
            if ok {
                return Ok(prev);
            }
        }
        Err(Error::NonConvergence {
            lower: 0.0,
            upper: self.kmax,
            estimate: f64::NAN,
            tolerance: REFINE_TOL,
        })
    }

    /// Pieces extrapolated to ε → 0 (or at the fixed configured cutoff).
    pub fn pieces(&self, rho: f64, delta_t: f64) -> Result<FieldPieces> {
        let per = self.pieces_per_cutoff(rho, delta_t)?;
        let mut out = [0.0; 6];
        for (j, slot) in out.iter_mut().enumerate() {
            let vals: Vec<f64> = per.iter().map(|p| pieces_vec(p)[j]).collect();
            *slot = self.extrapolate(&vals, "field integrals")?;
        }
        Ok(FieldPieces {
            pi_b: out[0],
            g_b: out[1],
            pi_a: out[2],
            g_a: out[3],
            pi_c: out[4],
            g_c: out[5],
        })
    }

    /// I-integrals at a single cutoff `eps` (no extrapolation).
    pub fn i_integrals_at(&self, rho: f64, delta_t: f64, eps: f64) -> Result<IntegralSet> {
        let single = Field3d {
            cfg: self.cfg,
            sigma_y: self.sigma_y,
            eps: vec![eps],
            kmax: self.kmax,
            base_extent: self.base_extent,
            grids: Mutex::new(HashMap::new()),
            alpha_norm: self.alpha_norm,
        };
        // Reuse cached transforms.
        *single.grids.lock().unwrap() = self.grids.lock().unwrap().clone();
        let p = single.pieces_per_cutoff(rho, delta_t)?[0];
        Ok(IntegralSet::from_pieces(&p, rho, delta_t, eps))
    }

    pub fn stress_energy(&self, rho: f64, delta_t: f64) -> Result<Components> {
        let p = self.pieces(rho, delta_t)?;
        Ok(IntegralSet::from_pieces(&p, rho, delta_t, 0.0).assemble(self.sigma_y, self.alpha_norm))
    }

    pub fn branch_density(&self, branch: Branch, rho: f64, delta_t: f64) -> Result<f64> {
        Ok(self.pieces(rho, delta_t)?.branch(&self.cfg.detector, branch, self.alpha_norm))
    }

    pub fn profile(&self, r_grid: &[f64], delta_t: f64) -> Result<DensityProfile> {
        if r_grid.windows(2).any(|w| !(w[1] > w[0])) || r_grid.iter().any(|&r| r < 0.0) {
            return Err(Error::Config("radial grid must be strictly increasing and non-negative".into()));
        }
        let comps = r_grid
            .par_iter()
            .map(|&r| self.stress_energy(r, delta_t))
            .collect::<Result<Vec<_>>>()?;
        Ok(DensityProfile::from_components(
            r_grid.to_vec(),
            self.cfg.interaction_time + delta_t,
            &comps,
        ))
    }
}

fn pieces_vec(p: &FieldPieces) -> [f64; 6] {
    [p.pi_b, p.g_b, p.pi_a, p.g_a, p.pi_c, p.g_c]
}

fn require_n4(cfg: &ProtocolConfig) -> Result<()> {
    if cfg.dimension != 4 {
        return Err(Error::DimensionUnsupported(cfg.dimension, "I-integrals are defined for n = 4".into()));
    }
    Ok(())
}

pub fn i_integrals(cfg: &ProtocolConfig, x: f64, delta_t: f64, eps: f64) -> Result<IntegralSet> {
    require_n4(cfg)?;
    Field3d::new(cfg)?.i_integrals_at(x, delta_t, eps)
}

/// (alice, bob, qet) at radius `x` and time T + `delta_t`.
pub fn stress_energy_nd(cfg: &ProtocolConfig, x: f64, delta_t: f64) -> Result<Components> {
    require_n4(cfg)?;
    Field3d::new(cfg)?.stress_energy(x, delta_t)
}

pub fn radial_profile_nd(cfg: &ProtocolConfig, r_grid: &[f64], delta_t: f64) -> Result<DensityProfile> {
    require_n4(cfg)?;
    Field3d::new(cfg)?.profile(r_grid, delta_t)
}
