use proptest::prelude::*;
use qetlab::cli::TimeToken;
use qetlab::field1d::Field1d;
use qetlab::pvquad::{pv_integral, PvProblem};
use qetlab::scaling::{verify_scaling, ScalingTransform};
use qetlab::{DetectorState, ProtocolConfig, Smearing, SmearingSpec};

fn spec(center: f64) -> impl Strategy<Value = SmearingSpec> {
    (0..3u8, -2.0..2.0f64, 0.3..1.5f64, 0.0..2.0f64).prop_map(move |(f, a, d, s)| match f {
        0 => SmearingSpec::gaussian(a, d, center),
        1 => SmearingSpec::lorentzian(a, d, center),
        _ => SmearingSpec::bump(a, d, s, center),
    })
}

fn config() -> impl Strategy<Value = ProtocolConfig> {
    (3.0..8.0f64, 0.4..1.2f64)
        .prop_flat_map(|(t, frac)| (spec(0.0), spec(t * frac), Just(t)))
        .prop_map(|(a, b, t)| ProtocolConfig::new(2, a, b, t).with_detector(DetectorState::sigma_y_eigenstate(1.0)))
        .prop_filter("valid and causal", |c| c.validate().is_ok())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn smearing_json_round_trips(parts in proptest::collection::vec(spec(1.5), 1..4)) {
        let s = Smearing { parts };
        let text = serde_json::to_string(&s).unwrap();
        let back: Smearing = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn bob_terms_scale_with_his_amplitude(cfg in config(), x in -2.0..14.0f64, dt in 0.1..5.0f64, c in -3.0..3.0f64) {
        let mut scaled = cfg.clone();
        scaled.bob.parts[0].amplitude *= c;
        let t = cfg.interaction_time + dt;
        let d = Field1d::new(&cfg).unwrap().density(x, t).unwrap();
        let e = Field1d::new(&scaled).unwrap().density(x, t).unwrap();
        let tol = 1e-12 * (d.bob.abs() + d.qet.abs() + d.alice.abs()).max(1e-300) * (1.0 + c * c);
        prop_assert!((e.alice - d.alice).abs() <= tol);
        prop_assert!((e.qet - c * d.qet).abs() <= tol);
        prop_assert!((e.bob - c * c * d.bob).abs() <= tol);
    }

    #[test]
    fn qet_is_proportional_to_sigma_y(cfg in config(), theta in 0.0..3.14f64, phi in 0.0..6.28f64, x in 0.0..12.0f64) {
        let t = cfg.interaction_time + 1.0;
        let mut other = cfg.clone();
        other.detector = DetectorState::from_bloch(theta, phi);
        let d = Field1d::new(&cfg).unwrap().density(x, t).unwrap();
        let e = Field1d::new(&other).unwrap().density(x, t).unwrap();
        let s = theta.sin() * phi.sin();
        prop_assert!((e.qet - s * d.qet).abs() <= 1e-12 * d.qet.abs().max(1e-300));
        prop_assert_eq!((e.alice, e.bob), (d.alice, d.bob));
    }

    #[test]
    fn pv_of_a_linear_numerator_is_exact(c0 in -3.0..3.0f64, c1 in -3.0..3.0f64, p in -1.0..1.0f64, lo in 0.5..4.0f64, hi in 0.5..4.0f64) {
        let (lower, upper) = (p - lo, p + hi);
        let v = pv_integral(&PvProblem::new(move |y| c0 + c1 * (y - p), move |_| c1, p, 0.05, lower, upper), 1e-13).unwrap();
        let exact = c0 * (hi / lo).ln() + c1 * (lo + hi);
        prop_assert!((v - exact).abs() <= 1e-11 * (1.0 + exact.abs()), "{} vs {}", v, exact);
    }

    #[test]
    fn one_dimensional_scaling_holds(cfg in config(), u in 0.3..4.0f64) {
        let t = cfg.interaction_time + 2.0;
        let grid: Vec<f64> = (0..25).map(|i| (-2.0 + 0.6 * i as f64) / u).collect();
        let e = verify_scaling(&cfg, &ScalingTransform::new(u, 2).unwrap(), &grid, t / u).unwrap();
        prop_assert!(e <= 1e-8, "{}", e);
    }

    #[test]
    fn time_tokens_round_trip(v in 0.0..100.0f64, side in 0..3u8) {
        let text = match side {
            0 => format!("{v}"),
            1 => format!("{v}-"),
            _ => format!("{v}+"),
        };
        let tok: TimeToken = text.parse().unwrap();
        prop_assert_eq!(tok.value, v);
        let json = serde_json::to_string(&tok).unwrap();
        let back: TimeToken = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, tok);
    }
}
