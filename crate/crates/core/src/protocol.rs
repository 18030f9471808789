//! Detector-state algebra and the LOQC / LOCC energy densities.
//!
//! Basis conventions: |±⟩ = (|g⟩ ± |e⟩)/√2, σ_z|e⟩ = +|e⟩ and σ_y = i σ_x σ_z.
//! Bob applies the σ_z-branch sign z = +1 for outcome e and z = −1 for g.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field1d::{Components, Field1d, ProtocolConfig};
use crate::fieldnd::Field3d;

/// Alice's initial qubit state, as amplitudes in the σ_x eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorState {
    pub amplitude_plus: Complex64,
    pub amplitude_minus: Complex64,
}

impl DetectorState {
    /// Eigenstate of σ_y with eigenvalue `sign` (±1).
    pub fn sigma_y_eigenstate(sign: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitude_plus: Complex64::new(s, 0.0),
            amplitude_minus: Complex64::new(0.0, sign.signum() * s),
        }
    }

    /// |+⟩, the +1 eigenstate of σ_x.
    pub fn sigma_x_plus() -> Self {
        Self {
            amplitude_plus: Complex64::new(1.0, 0.0),
            amplitude_minus: Complex64::new(0.0, 0.0),
        }
    }

    /// cos(θ/2)|+⟩ + e^{iφ} sin(θ/2)|−⟩; its ⟨σ_y⟩ is sin θ sin φ.
    pub fn from_bloch(theta: f64, phi: f64) -> Self {
        Self {
            amplitude_plus: Complex64::new((0.5 * theta).cos(), 0.0),
            amplitude_minus: Complex64::from_polar((0.5 * theta).sin(), phi),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitude_plus.norm_sqr() + self.amplitude_minus.norm_sqr()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > 1e-12 || !n.is_finite() {
            return Err(Error::Normalization(n));
        }
        Ok(())
    }

    /// conj(⟨+|A₀⟩)·⟨−|A₀⟩.
    pub fn coherence(&self) -> Complex64 {
        self.amplitude_plus.conj() * self.amplitude_minus
    }

    /// |⟨+|A₀⟩|² − |⟨−|A₀⟩|².
    pub fn polarization(&self) -> f64 {
        self.amplitude_plus.norm_sqr() - self.amplitude_minus.norm_sqr()
    }
}

/// ⟨A₀|σ_y|A₀⟩.
pub fn sigma_y_expectation(d: &DetectorState) -> Result<f64> {
    d.validate()?;
    Ok((2.0 * d.coherence().im).clamp(-1.0, 1.0))
}

/// Outcome of Alice's σ_z measurement in the classically communicated protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    E,
    G,
}

/// Classical field data at one spacetime point from which every density is
/// assembled: conjugate momentum π and spatial (radial in 3+1 D) gradient g of
/// Bob's kick (b), Alice's kick (a), and the conjugate-quadrature field of
/// Alice's kick (c).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldPieces {
    pub pi_b: f64,
    pub g_b: f64,
    pub pi_a: f64,
    pub g_a: f64,
    pub pi_c: f64,
    pub g_c: f64,
}

impl FieldPieces {
    pub fn bob(&self) -> f64 {
        0.5 * (self.pi_b * self.pi_b + self.g_b * self.g_b)
    }

    pub fn alice(&self) -> f64 {
        0.5 * (self.pi_a * self.pi_a + self.g_a * self.g_a)
    }

    pub fn conjugate(&self) -> f64 {
        0.5 * (self.pi_c * self.pi_c + self.g_c * self.g_c)
    }

    /// Bob–Alice cross term.
    pub fn cross_ba(&self) -> f64 {
        self.pi_b * self.pi_a + self.g_b * self.g_a
    }

    /// Bob–conjugate cross term.
    pub fn cross_bc(&self) -> f64 {
        self.pi_b * self.pi_c + self.g_b * self.g_c
    }

    pub fn loqc(&self, sigma_y: f64, alpha_norm: f64) -> Components {
        Components {
            alice: self.alice(),
            bob: self.bob(),
            qet: -sigma_y * (-2.0 * alpha_norm).exp() * self.cross_bc(),
        }
    }

    pub fn branch(&self, d: &DetectorState, branch: Branch, alpha_norm: f64) -> f64 {
        let w = d.coherence();
        let damp = 2.0 * (-2.0 * alpha_norm).exp();
        let common = self.bob() + self.alice() - damp * w.im * self.cross_bc();
        let signed = d.polarization() * self.cross_ba() - damp * w.re * (self.bob() - self.conjugate());
        match branch {
            Branch::E => common + signed,
            Branch::G => common - signed,
        }
    }
}

/// Total LOQC energy density; at n = 2 this is exactly `density1d`'s total.
pub fn loqc_density(cfg: &ProtocolConfig, x: f64, t: f64) -> Result<f64> {
    match cfg.dimension {
        2 => Ok(Field1d::new(cfg)?.density(x, t)?.total()),
        4 => Ok(Field3d::new(cfg)?.stress_energy(x, t - cfg.interaction_time)?.total()),
        n => Err(Error::DimensionUnsupported(n, "only n = 2 and n = 4 are implemented".into())),
    }
}

/// Energy density of the field in the branch where Alice's measurement gave `branch`.
pub fn locc_branch_density(cfg: &ProtocolConfig, branch: Branch, x: f64, t: f64) -> Result<f64> {
    match cfg.dimension {
        2 => {
            let f = Field1d::new(cfg)?;
            Ok(f.pieces(x, t, true)?.branch(&cfg.detector, branch, f.alpha_norm()))
        }
        4 => {
            let f = Field3d::new(cfg)?;
            f.branch_density(branch, x, t - cfg.interaction_time)
        }
        n => Err(Error::DimensionUnsupported(n, "only n = 2 and n = 4 are implemented".into())),
    }
}
