mod common;

use common::{direct_pieces, pieces_from_integrals};
use qetlab::fieldnd::{i_integrals, Field3d};
use qetlab::quad::composite_gauss_legendre;
use qetlab::{ProtocolConfig, Smearing, SmearingSpec};

fn shell_config() -> ProtocolConfig {
    ProtocolConfig::new(
        4,
        SmearingSpec::gaussian(1.0, 1.0, 0.0),
        SmearingSpec::gaussian(0.3, 0.7, 0.0).with_shell_radius(18.85),
        18.85,
    )
}

#[test]
fn bessel_reduced_integrals_match_direct_quadrature() {
    let cfg = shell_config();
    let eps = 0.01;
    for (rho, dt) in [(5.0, 0.0), (17.5, 0.0), (18.85, 0.0), (20.0, 0.0), (12.0, 2.5)] {
        let lib = pieces_from_integrals(&i_integrals(&cfg, rho, dt, eps).unwrap());
        let oracle = direct_pieces(&cfg, rho, dt, eps);
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..6 {
            let err = (lib[j] - oracle[j]).abs() / scale;
            assert!(err <= 1e-6, "rho {rho} dt {dt} piece {j}: {} vs {} (rel {err:e})", lib[j], oracle[j]);
        }
    }
}

/// Λ(s) = s·λ(|s|), the odd extension of r·λ(r).
fn odd(s: &Smearing, x: f64) -> f64 {
    x * s.eval_radial(x.abs())
}

fn odd_deriv(s: &Smearing, x: f64) -> f64 {
    s.eval_radial(x.abs()) + x.abs() * s.deriv_radial(x.abs(), 1)
}

/// Radial d'Alembert solutions: ρ·u = ½[Λ(ρ+t) + Λ(ρ−t)] for Alice's kick and
/// ρ·u = −½∫_{ρ−τ}^{ρ+τ} M(s) ds for Bob's.
fn odd_extension_pieces(cfg: &ProtocolConfig, rho: f64, delta_t: f64) -> [f64; 4] {
    let t = cfg.interaction_time + delta_t;
    let tau = delta_t;
    let (a, b) = (&cfg.alice, &cfg.bob);
    let ua = 0.5 * (odd(a, rho + t) + odd(a, rho - t)) / rho;
    let pi_a = 0.5 * (odd_deriv(a, rho + t) - odd_deriv(a, rho - t)) / rho;
    let g_a = 0.5 * (odd_deriv(a, rho + t) + odd_deriv(a, rho - t)) / rho - ua / rho;
    let (s, w) = composite_gauss_legendre(rho - tau, rho + tau, 400, 16);
    let ub = -0.5 * s.iter().zip(&w).map(|(&s, &w)| w * odd(b, s)).sum::<f64>() / rho;
    let pi_b = -0.5 * (odd(b, rho + tau) + odd(b, rho - tau)) / rho;
    let g_b = -0.5 * (odd(b, rho + tau) - odd(b, rho - tau)) / rho - ub / rho;
    [pi_b, g_b, pi_a, g_a]
}

#[test]
fn kick_fields_match_odd_extension() {
    let cfg = ProtocolConfig::new(
        4,
        SmearingSpec::gaussian(1.3, 1.0, 0.0),
        SmearingSpec::gaussian(0.4, 0.8, 0.0).with_shell_radius(6.0),
        5.0,
    );
    let f = Field3d::new(&cfg).unwrap();
    for dt in [0.5, 3.0] {
        let rows: Vec<_> = [0.5, 2.0, 4.5, 6.0, 7.3, 9.0]
            .into_iter()
            .map(|rho| {
                let p = f.pieces(rho, dt).unwrap();
                (rho, [p.pi_b, p.g_b, p.pi_a, p.g_a], odd_extension_pieces(&cfg, rho, dt))
            })
            .collect();
        let scale = rows.iter().flat_map(|r| r.2).fold(0.0f64, |m, v| m.max(v.abs()));
        for (rho, lib, oracle) in rows {
            for j in 0..4 {
                let err = (lib[j] - oracle[j]).abs() / scale;
                assert!(err <= 1e-8, "rho {rho} dt {dt} piece {j}: {} vs {} (rel {err:e})", lib[j], oracle[j]);
            }
        }
    }
}
