//! Detector smearing profiles: the compact bump, the Gaussian and the Lorentzian.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Adaptive;
use crate::special::sph_j0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Bump,
    Gaussian,
    Lorentzian,
}

/// One parametrized smearing profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmearingSpec {
    pub family: Family,
    pub amplitude: f64,
    pub delta: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub shell_radius: f64,
}

/// S(s) = ½(1 − tanh cot s) and its first two derivatives, for s in (0, π).
fn shoulder(s: f64) -> [f64; 3] {
    if s <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    if s >= PI {
        return [1.0, 0.0, 0.0];
    }
    let c = 1.0 / s.tan();
    let value = 1.0 / (1.0 + (2.0 * c).exp());
    if c.abs() > 300.0 {
        return [value, 0.0, 0.0];
    }
    let e = (-2.0 * c.abs()).exp();
    let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
    let t = c.tanh();
    let c1 = -(1.0 + c * c);
    let c2 = 2.0 * (1.0 + c * c) * c;
    [value, -0.5 * sech2 * c1, sech2 * (t * c1 * c1 - 0.5 * c2)]
}

impl SmearingSpec {
    pub fn gaussian(amplitude: f64, delta: f64, center: f64) -> Self {
        Self {
            family: Family::Gaussian,
            amplitude,
            delta,
            sigma: 0.0,
            center,
            shell_radius: 0.0,
        }
    }

    pub fn lorentzian(amplitude: f64, delta: f64, center: f64) -> Self {
        Self {
            family: Family::Lorentzian,
            ..Self::gaussian(amplitude, delta, center)
        }
    }

    pub fn bump(amplitude: f64, delta: f64, sigma: f64, center: f64) -> Self {
        Self {
            family: Family::Bump,
            sigma,
            ..Self::gaussian(amplitude, delta, center)
        }
    }

    pub fn with_shell_radius(mut self, r0: f64) -> Self {
        self.shell_radius = r0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Config(format!("smearing delta must be positive, got {}", self.delta)));
        }
        if !self.amplitude.is_finite() || !self.center.is_finite() {
            return Err(Error::Config("smearing amplitude and center must be finite".into()));
        }
        if self.sigma < 0.0 || (self.sigma != 0.0 && self.family != Family::Bump) {
            return Err(Error::Config(format!(
                "sigma must be 0 unless family is bump and never negative, got {}",
                self.sigma
            )));
        }
        if !(self.shell_radius >= 0.0) || !self.shell_radius.is_finite() {
            return Err(Error::Config(format!("shell_radius must be >= 0, got {}", self.shell_radius)));
        }
        Ok(())
    }

    /// Unit-amplitude profile and its first two derivatives in z.
    fn shape(&self, z: f64) -> [f64; 3] {
        let d = self.delta;
        match self.family {
            Family::Gaussian => {
                let u = z / d;
                let g = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
                [g, -u / d * g, (u * u - 1.0) / (d * d) * g]
            }
            Family::Lorentzian => {
                let u = z / d;
                let q = 1.0 / (1.0 + u * u);
                [q / PI, -2.0 * u * q * q / (PI * d), (6.0 * u * u - 2.0) * q * q * q / (PI * d * d)]
            }
            Family::Bump => {
                let half = 0.5 * self.sigma;
                let edge = half + PI * d;
                let a = z.abs();
                if a <= half {
                    [1.0, 0.0, 0.0]
                } else if a >= edge {
                    [0.0, 0.0, 0.0]
                } else {
                    let [s0, s1, s2] = shoulder((edge - a) / d);
                    let sign = z.signum();
                    [s0, -sign * s1 / d, s2 / (d * d)]
                }
            }
        }
    }

    fn scaled(&self, z: f64) -> [f64; 3] {
        let [f0, f1, f2] = self.shape(z);
        [self.amplitude * f0, self.amplitude * f1, self.amplitude * f2]
    }

    /// Value at a 1-D position.
    pub fn eval(&self, x: f64) -> f64 {
        self.scaled(x - self.center)[0]
    }

    /// First or second derivative at a 1-D position.
    pub fn deriv(&self, x: f64, order: u8) -> f64 {
        assert!(order == 1 || order == 2, "derivative order must be 1 or 2");
        self.scaled(x - self.center)[order as usize]
    }

    /// Value as a function of radius about the center.
    pub fn eval_radial(&self, r: f64) -> f64 {
        self.scaled(r - self.shell_radius)[0]
    }

    pub fn deriv_radial(&self, r: f64, order: u8) -> f64 {
        assert!(order == 1 || order == 2, "derivative order must be 1 or 2");
        self.scaled(r - self.shell_radius)[order as usize]
    }

    /// Half-width in z beyond which |profile| < `threshold`·peak.
    pub fn effective_halfwidth(&self, threshold: f64) -> f64 {
        let d = self.delta;
        match self.family {
            Family::Bump => 0.5 * self.sigma + PI * d,
            Family::Gaussian => d * (2.0 * (1.0 / threshold).ln()).sqrt(),
            Family::Lorentzian => d * (1.0 / threshold - 1.0).max(0.0).sqrt(),
        }
    }

    /// Half-width in z beyond which |profile′| < `threshold`·max|profile′|.
    pub fn deriv_halfwidth(&self, threshold: f64) -> f64 {
        let d = self.delta;
        match self.family {
            Family::Bump => 0.5 * self.sigma + PI * d,
            Family::Gaussian => {
                let target = threshold * (-0.5f64).exp();
                let mut u = (2.0 * (1.0 / threshold).ln()).sqrt();
                for _ in 0..30 {
                    u = (2.0 * (u / target).ln()).sqrt();
                }
                d * u
            }
            Family::Lorentzian => {
                let u_star = 1.0 / 3f64.sqrt();
                let peak = 2.0 * u_star / (1.0 + u_star * u_star).powi(2);
                let c = 2.0 / (threshold * peak);
                let mut u = c.cbrt();
                for _ in 0..30 {
                    u = ((2.0 * u / (threshold * peak)).sqrt() - 1.0).max(0.0).sqrt();
                }
                d * u
            }
        }
    }

    /// Upper bound on |fourth derivative| of the profile.
    pub fn fourth_deriv_bound(&self) -> f64 {
        let d = self.delta;
        let a = self.amplitude.abs();
        match self.family {
            Family::Gaussian => a * 3.0 / ((2.0 * PI).sqrt() * d.powi(4)),
            Family::Lorentzian => a * 24.0 / (PI * d.powi(4)),
            Family::Bump => {
                let half = 0.5 * self.sigma;
                let n = 4000;
                let h = 1e-3 * d;
                let mut m: f64 = 0.0;
                for i in 1..n {
                    let z = half + PI * d * i as f64 / n as f64;
                    let f4 = (self.shape(z + h)[2] - 2.0 * self.shape(z)[2] + self.shape(z - h)[2]) / (h * h);
                    m = m.max(f4.abs());
                }
                1.2 * a * m
            }
        }
    }

    /// Width scale used to size time offsets and windows.
    pub fn characteristic_halfwidth(&self) -> f64 {
        match self.family {
            Family::Bump => 0.5 * self.sigma + PI * self.delta,
            Family::Gaussian => 4.0 * self.delta,
            Family::Lorentzian => 10.0 * self.delta,
        }
    }

    /// Interval outside of which the 1-D profile is below `threshold`·peak.
    pub fn support(&self, threshold: f64) -> (f64, f64) {
        let w = self.effective_halfwidth(threshold);
        (self.center - w, self.center + w)
    }

    /// Radial interval outside of which the profile is below `threshold`·peak.
    pub fn radial_support(&self, threshold: f64) -> (f64, f64) {
        let w = self.effective_halfwidth(threshold);
        ((self.shell_radius - w).max(0.0), self.shell_radius + w)
    }

    /// ∫ λ(x) e^{−ikx} dx.
    pub fn fourier1d(&self, k: f64) -> Result<Complex64> {
        let phase = Complex64::from_polar(1.0, -k * self.center);
        let d = self.delta;
        let magnitude = match self.family {
            Family::Gaussian => self.amplitude * d * (-0.5 * d * d * k * k).exp(),
            Family::Lorentzian => self.amplitude * d * (-d * k.abs()).exp(),
            Family::Bump => {
                let half = 0.5 * self.sigma;
                let edge = half + PI * d;
                let plateau = if k == 0.0 { self.sigma } else { 2.0 * (k * half).sin() / k };
                let q = Adaptive::new(1e-15 * edge, 1e-13)
                    .with_max_panels(20_000);
                let shoulder = q.integrate_with_breaks(
                    |z| self.shape(z)[0] * (k * z).cos(),
                    half,
                    edge,
                    &bump_breaks(half, edge, k),
                )?;
                self.amplitude * (plateau + 2.0 * shoulder)
            }
        };
        Ok(phase * magnitude)
    }

    /// 3-D transform of the radial profile: 4π ∫ r² j0(kr) λ(r) dr.
    pub fn radial_ft(&self, k: f64) -> Result<f64> {
        let k = k.abs();
        let (d, r0, a) = (self.delta, self.shell_radius, self.amplitude);
        if r0 == 0.0 {
            match self.family {
                Family::Gaussian => return Ok(a * 2.0 * PI * d.powi(3) * (-0.5 * d * d * k * k).exp()),
                Family::Lorentzian => {
                    return Ok(if k == 0.0 {
                        f64::INFINITY
                    } else {
                        2.0 * PI * a * d * d * (-k * d).exp() / k
                    })
                }
                Family::Bump => {}
            }
        }
        if self.family == Family::Lorentzian {
            return self.lorentzian_shell_ft(k);
        }
        let (lo, hi) = self.radial_support(1e-17);
        let mut breaks = vec![r0];
        if self.family == Family::Bump {
            breaks.push(r0 - 0.5 * self.sigma);
            breaks.push(r0 + 0.5 * self.sigma);
        }
        if k > 0.0 {
            let step = PI / k;
            let n = ((hi - lo) / step).ceil().min(4000.0) as usize;
            breaks.extend((1..n).map(|i| lo + i as f64 * (hi - lo) / n as f64));
        }
        let peak = a.abs() * hi * hi * (hi - lo);
        let q = Adaptive::new(1e-15 * peak.max(f64::MIN_POSITIVE), 1e-13).with_max_panels(40_000);
        let v = q.integrate_with_breaks(|r| r * r * sph_j0(k * r) * self.eval_radial(r), lo, hi, &breaks)?;
        Ok(4.0 * PI * v)
    }

    /// Shell Lorentzian: the full-line part has a closed form, the reflected
    /// remainder ∫₀^∞ v sin(kv) h(v + r0) dv is summed over half-periods with
    /// Wynn's epsilon acceleration.
    fn lorentzian_shell_ft(&self, k: f64) -> Result<f64> {
        let (a, d, r0) = (self.amplitude, self.delta, self.shell_radius);
        let h = |u: f64| a / PI / (1.0 + (u / d) * (u / d));
        if k == 0.0 {
            return Ok(f64::INFINITY);
        }
        let full = a * d * (-k * d).exp() * (d * (k * r0).cos() + r0 * (k * r0).sin());
        let q = Adaptive::new(1e-16 * a.abs().max(f64::MIN_POSITIVE) * (d + r0), 1e-14).with_max_panels(20_000);
        let f = |v: f64| v * (k * v).sin() * h(v + r0);
        let step = PI / k;
        let head_end = (r0 + 20.0 * d).max(step);
        let head_end = (head_end / step).ceil() * step;
        let nb = ((head_end / step) as usize).min(4000);
        let breaks: Vec<f64> = (1..nb).map(|i| i as f64 * head_end / nb as f64).collect();
        let head = q.integrate_with_breaks(f, 0.0, head_end, &breaks)?;
        let mut partial = Vec::with_capacity(40);
        let mut acc = head;
        let mut lo = head_end;
        for _ in 0..40 {
            acc += q.integrate(f, lo, lo + step)?;
            partial.push(acc);
            lo += step;
        }
        let tail = wynn_epsilon(&partial);
        Ok(4.0 * PI / k * (full - tail))
    }
}

fn bump_breaks(lo: f64, hi: f64, k: f64) -> Vec<f64> {
    if k == 0.0 {
        return Vec::new();
    }
    let n = ((hi - lo) * k.abs() / PI).ceil().min(2000.0) as usize;
    (1..n).map(|i| lo + i as f64 * (hi - lo) / n as f64).collect()
}

/// Wynn's epsilon algorithm; returns the last even-column estimate.
pub(crate) fn wynn_epsilon(s: &[f64]) -> f64 {
    let n = s.len();
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = *s.last().unwrap_or(&0.0);
    for col in 1..n {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 {
                return cur[i + 1];
            }
            next.push(prev[i + 1] + 1.0 / diff);
        }
        if col % 2 == 0 {
            if let Some(&last) = next.last() {
                if last.is_finite() {
                    best = last;
                }
            }
        }
        prev = cur;
        cur = next;
        if cur.len() < 2 {
            break;
        }
    }
    best
}

/// A finite sum of smearing profiles sharing one geometry class. Serialized
/// as a single profile object or a list of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Smearing {
    pub parts: Vec<SmearingSpec>,
}

impl Serialize for Smearing {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.parts.len() == 1 {
            self.parts[0].serialize(s)
        } else {
            self.parts.serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Smearing {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = Smearing;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a smearing object or a list of smearing objects")
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(self, map: A) -> std::result::Result<Smearing, A::Error> {
                let one = SmearingSpec::deserialize(serde::de::value::MapAccessDeserializer::new(map))?;
                Ok(Smearing { parts: vec![one] })
            }

            fn visit_seq<A: serde::de::SeqAccess<'de>>(self, seq: A) -> std::result::Result<Smearing, A::Error> {
                let parts = Vec::<SmearingSpec>::deserialize(serde::de::value::SeqAccessDeserializer::new(seq))?;
                Ok(Smearing { parts })
            }
        }
        d.deserialize_any(V)
    }
}

impl From<SmearingSpec> for Smearing {
    fn from(s: SmearingSpec) -> Self {
        Smearing { parts: vec![s] }
    }
}

impl Smearing {
    pub fn zero() -> Self {
        Smearing { parts: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.parts.iter().all(|p| p.amplitude == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.parts.iter().try_for_each(SmearingSpec::validate)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.parts.iter().map(|p| p.eval(x)).sum()
    }

    pub fn deriv(&self, x: f64, order: u8) -> f64 {
        self.parts.iter().map(|p| p.deriv(x, order)).sum()
    }

    pub fn eval_radial(&self, r: f64) -> f64 {
        self.parts.iter().map(|p| p.eval_radial(r)).sum()
    }

    pub fn deriv_radial(&self, r: f64, order: u8) -> f64 {
        self.parts.iter().map(|p| p.deriv_radial(r, order)).sum()
    }

    pub fn fourier1d(&self, k: f64) -> Result<Complex64> {
        self.parts.iter().try_fold(Complex64::new(0.0, 0.0), |acc, p| Ok(acc + p.fourier1d(k)?))
    }

    pub fn radial_ft(&self, k: f64) -> Result<f64> {
        self.parts.iter().try_fold(0.0, |acc, p| Ok(acc + p.radial_ft(k)?))
    }

    fn active(&self) -> impl Iterator<Item = &SmearingSpec> {
        self.parts.iter().filter(|p| p.amplitude != 0.0)
    }

    /// Union hull of the component 1-D supports at `threshold`.
    pub fn support(&self, threshold: f64) -> Option<(f64, f64)> {
        self.active().map(|p| p.support(threshold)).reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    pub fn radial_support(&self, threshold: f64) -> Option<(f64, f64)> {
        self.active()
            .map(|p| p.radial_support(threshold))
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    /// Individual component supports, for gap-aware causality checks.
    pub fn component_supports(&self, threshold: f64) -> Vec<(f64, f64)> {
        self.active().map(|p| p.support(threshold)).collect()
    }

    /// Union hull of the supports of the first derivative at `threshold`.
    pub fn deriv_support(&self, threshold: f64) -> Option<(f64, f64)> {
        self.active()
            .map(|p| {
                let w = p.deriv_halfwidth(threshold);
                (p.center - w, p.center + w)
            })
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    pub fn fourth_deriv_bound(&self) -> f64 {
        self.active().map(|p| p.fourth_deriv_bound()).sum()
    }

    /// Positions where the profile changes character (centres, plateau and support edges).
    pub fn feature_points(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for p in self.active() {
            v.push(p.center);
            v.extend([p.center - p.delta, p.center + p.delta]);
            if p.family == Family::Bump {
                let h = 0.5 * p.sigma;
                let e = h + PI * p.delta;
                v.extend([p.center - h, p.center + h, p.center - e, p.center + e]);
            }
        }
        v
    }

    pub fn characteristic_halfwidth(&self) -> f64 {
        self.active().map(|p| p.characteristic_halfwidth()).fold(0.0, f64::max)
    }

    /// Smallest smoothness length δ; a bump's plateau adds no short scale.
    pub fn smallest_length(&self) -> Option<f64> {
        self.active().map(|p| p.delta).reduce(f64::min)
    }

    pub fn largest_extent(&self) -> f64 {
        self.active()
            .map(|p| p.shell_radius + p.characteristic_halfwidth() + p.center.abs())
            .fold(0.0, f64::max)
    }
}

/// Sums several Bob smearings into one composite profile. Components must share
/// a geometry class: either all are concentric (possibly shells) or all are
/// plain 1-D translates without a shell radius.
pub fn compose_bobs(bobs: &[Smearing]) -> Result<Smearing> {
    if bobs.is_empty() {
        return Err(Error::GeometryMismatch("empty list of smearings".into()));
    }
    let parts: Vec<SmearingSpec> = bobs.iter().flat_map(|b| b.parts.iter().copied()).collect();
    let shells = parts.iter().any(|p| p.shell_radius > 0.0);
    let offsets = parts.iter().any(|p| p.center != parts[0].center);
    if shells && offsets {
        return Err(Error::GeometryMismatch(
            "shell components require a common center for all components".into(),
        ));
    }
    Ok(Smearing { parts })
}
