#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;

use qetlab::cli::RunConfig;
use qetlab::quad::composite_gauss_legendre;
use qetlab::{ProtocolConfig, Smearing};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn load(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).unwrap()
}

/// Writes past the test harness's output capture so the line always shows.
pub fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {criterion} [{}] {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Derivatives 1..=4 in u of the unit Gaussian e^{−u²/2}/√(2π).
pub fn gaussian_derivs(u: f64) -> [f64; 4] {
    let g = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
    [
        -u * g,
        (u * u - 1.0) * g,
        -u * (u * u - 3.0) * g,
        (u.powi(4) - 6.0 * u * u + 3.0) * g,
    ]
}

/// Derivatives 1..=4 in u of the unit Lorentzian 1/(π(1+u²)).
pub fn lorentzian_derivs(u: f64) -> [f64; 4] {
    let q = 1.0 / (1.0 + u * u);
    [
        -2.0 * u * q * q / PI,
        2.0 * (3.0 * u * u - 1.0) * q.powi(3) / PI,
        -24.0 * u * (u * u - 1.0) * q.powi(4) / PI,
        24.0 * (5.0 * u.powi(4) - 10.0 * u * u + 1.0) * q.powi(5) / PI,
    ]
}

/// PV ∫_L^U n(y)/(y−p) dy = ∫ (n(y) − n(p))/(y − p) dy + n(p)·ln((U−p)/(p−L)),
/// with the regular integral on Gauss–Legendre panels that meet at p.
pub fn pv_subtraction(n: &dyn Fn(f64) -> f64, p: f64, lower: f64, upper: f64) -> f64 {
    let np = n(p);
    let f = |y: f64| (n(y) - np) / (y - p);
    let side = |a: f64, b: f64| -> f64 {
        let panels = (((b - a) / 0.02).ceil() as usize).max(8);
        let (x, w) = composite_gauss_legendre(a, b, panels, 16);
        x.iter().zip(&w).map(|(&x, &w)| w * f(x)).sum()
    };
    side(lower, p) + side(p, upper) + np * ((upper - p) / (p - lower)).ln()
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// 4π ∫ r² sin(kr)/(kr) λ(r) dr on a fixed Gauss–Legendre grid.
pub fn radial_transform(s: &Smearing, k: f64, rmax: f64) -> f64 {
    let (r, w) = composite_gauss_legendre(0.0, rmax, 400, 16);
    r.iter().zip(&w).map(|(&r, &w)| w * 4.0 * PI * r * r * sinc(k * r) * s.eval_radial(r)).sum()
}

/// The six 3+1 D field pieces [π_b, g_b, π_a, g_a, π_c, g_c] from the
/// unreduced Fourier integral in (|k|, cos θ): each kick field is
/// u(ρ, t) = ∫d³k/(2π)³ G(k, t) e^{ik·x}, and π = ∂ₜu, g = ∂_ρu are taken
/// under the integral. G is F cos(kt) for Alice, −F sin(kt) for the conjugate
/// quadrature and −F sin(kτ)/k for Bob.
pub fn direct_pieces(cfg: &ProtocolConfig, rho: f64, delta_t: f64, eps: f64) -> [f64; 6] {
    let t = cfg.interaction_time + delta_t;
    let tau = delta_t;
    let rmax = 40.0;
    let kmax = 20.0;
    let (ks, kw) = composite_gauss_legendre(0.0, kmax, 600, 16);
    let (us, uw) = composite_gauss_legendre(-1.0, 1.0, 128, 16);
    let norm = 1.0 / (4.0 * PI * PI);
    let mut out = [0.0; 6];
    for (&k, &w) in ks.iter().zip(&kw) {
        let fa = radial_transform(&cfg.alice, k, rmax);
        let fb = radial_transform(&cfg.bob, k, rmax);
        let (c0, s1) = us
            .iter()
            .zip(&uw)
            .fold((0.0, 0.0), |(c, s), (&u, &v)| (c + v * (k * rho * u).cos(), s + v * u * (k * rho * u).sin()));
        let d = w * norm * (-2.0 * eps * k).exp();
        let (st, ct) = (k * t).sin_cos();
        out[2] += d * k * k * (-k * fa * st) * c0;
        out[3] += -d * k * k * k * (fa * ct) * s1;
        out[4] += d * k * k * (-k * fa * ct) * c0;
        out[5] += -d * k * k * k * (-fa * st) * s1;
        if tau >= 0.0 {
            let (sb, cb) = (k * tau).sin_cos();
            out[0] += d * k * k * (-fb * cb) * c0;
            out[1] += -d * k * k * (-fb * sb) * s1;
        }
    }
    out
}

/// Inverse of the fixed factor between I-integrals and field pieces.
pub fn pieces_from_integrals(s: &qetlab::fieldnd::IntegralSet) -> [f64; 6] {
    let f = -2.0 * 8.0 * PI * PI * PI;
    [s.i0[0] / f, s.ir[0] / f, s.i0[1] / f, s.ir[1] / f, s.i0[2] / f, s.ir[2] / f]
}
