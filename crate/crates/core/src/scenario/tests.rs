use super::*;

fn minimal() -> &'static str {
    r#"{
        "name": "m",
        "geometry": {"lx": 1.0, "ly": 1.0, "nx": 5, "ny": 5, "clamped": ["left"]},
        "material": {"mu": 1.0},
        "yield": {"alpha0": 1.0, "n": 4, "lambda": 2.0},
        "time": {"T": 1.0, "k": 4}
    }"#
}

#[test]
fn minimal_config_fills_defaults() {
    let c = Config::from_json(minimal()).unwrap();
    assert_eq!(c.gamma, 0.1);
    assert_eq!(c.loads, LoadsConfig::default());
    assert_eq!(c.solver, SolverOptions::default());
    assert_eq!(c.geometry.layers, LayersConfig::Gauss(4));
    assert_eq!(c.ladder.n, vec![4, 8, 16]);
    c.build().unwrap();
}

#[test]
fn round_trip_is_identity() {
    for name in BUILTIN_NAMES {
        let c = builtin_config(name).unwrap();
        let text = c.to_json().unwrap();
        let back = Config::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn rejects_bad_parameters_with_rule_ids() {
    let rule = |text: &str| match Config::from_json(text) {
        Err(Error::Validation { rule, .. }) => rule,
        other => panic!("expected validation error, got {other:?}"),
    };
    let base: serde_json::Value = serde_json::from_str(minimal()).unwrap();
    let with = |path: &[&str], v: serde_json::Value| {
        let mut b = base.clone();
        let mut slot = &mut b;
        for p in &path[..path.len() - 1] {
            slot = slot.get_mut(*p).unwrap();
        }
        slot[path[path.len() - 1]] = v;
        b.to_string()
    };
    assert_eq!(rule(&with(&["yield", "n"], 3.into())), "N>=4");
    assert_eq!(rule(&with(&["yield", "lambda"], 0.0.into())), "lambda>0");
    assert_eq!(rule(&with(&["gamma"], 1.0.into())), "gamma-range");
    assert_eq!(rule(&with(&["geometry", "layers"], serde_json::json!({"nodes": [-0.25, 0.25], "weights": [0.5, 0.5]}))), "moment-exactness");
    assert_eq!(rule(&with(&["geometry", "clamped"], serde_json::json!([]))), "gamma_d-nonempty");
    assert!(matches!(Config::from_json("{\"name\": 1,\n"), Err(Error::Config(m)) if m.contains("line")));
    assert!(matches!(Config::from_json(&with(&["bogus"], 1.into())), Err(Error::Config(_))));
}

#[test]
fn preset_key_merges() {
    let c = Config::from_json(r#"{"preset": "plastic_bend", "yield": {"n": 4}, "name": "pb4"}"#).unwrap();
    assert_eq!(c.yield_.n, 4);
    assert_eq!(c.yield_.alpha0, 1.0);
    assert_eq!(c.name, "pb4");
    assert_eq!(c.geometry.nx, 31);
}

#[test]
fn unsafe_load_is_rejected() {
    let mut c = builtin_config("plastic_bend").unwrap();
    c.loads.g = GPreset::Uniform { g0: 0.5, profile: TimeProfile::Constant };
    match c.build() {
        Err(Error::Validation { rule, .. }) => assert_eq!(rule, "safe-load"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unequilibrated_rho_is_rejected() {
    let mut c = builtin_config("elastic_bend").unwrap();
    c.rho = RhoPreset::Zero;
    match c.build() {
        Err(Error::Validation { rule, .. }) => assert_eq!(rule, "rho-equilibrium"),
        other => panic!("{other:?}"),
    }
    // σ₀ = 0 is not in equilibrium with a load applied at t = 0
    let mut c = builtin_config("static_f").unwrap();
    c.init = InitPreset::Rest;
    match c.build() {
        Err(Error::Validation { rule, .. }) => assert_eq!(rule, "initial-equilibrium"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn builtins_validate() {
    let all = builtin_scenarios().unwrap();
    assert_eq!(all.len(), 5);
    for (name, s) in &all {
        assert_eq!(&s.name, name);
    }
}

#[test]
fn time_profiles() {
    assert_eq!(TimeProfile::Constant.value(3.0), 1.0);
    assert_eq!(TimeProfile::Ramp { duration: 2.0 }.value(1.0), 0.5);
    assert_eq!(TimeProfile::Ramp { duration: 2.0 }.value(5.0), 1.0);
    assert_eq!(TimeProfile::Pulse { duration: 1.0 }.value(2.0), 0.0);
    assert!((TimeProfile::Pulse { duration: 1.0 }.value(0.5) - 1.0).abs() < 1e-15);
}

#[test]
fn manufactured_loads_match_finite_differences() {
    // f = −Div σ̄ and g = ü₃ − (1/12)DivDiv σ̂ by central differences of the closed-form stress
    let (_, ex) = manufactured_elastic(7, 4, 1.0, TimeProfile::Harmonic { omega: 1.3, phase: 0.2 }).unwrap();
    let (zs, ws) = ([-0.5 / 3f64.sqrt(), 0.5 / 3f64.sqrt()], [0.5, 0.5]);
    let bar = |x: f64, y: f64, t: f64| zs.iter().zip(ws).fold(Sym2::ZERO, |a, (z, w)| a + ex.sigma(x, y, *z, t) * w);
    let hat = |x: f64, y: f64, t: f64| zs.iter().zip(ws).fold(Sym2::ZERO, |a, (z, w)| a + ex.sigma(x, y, *z, t) * (12.0 * w * z));
    let h = 1e-3;
    for &(x, y, t) in &[(0.3, 0.6, 0.4), (0.71, 0.22, 1.1), (0.5, 0.5, 0.0)] {
        let d1 = |f: &dyn Fn(f64, f64) -> Sym2| (f(x + h, y) - f(x - h, y)) * (0.5 / h);
        let d2 = |f: &dyn Fn(f64, f64) -> Sym2| (f(x, y + h) - f(x, y - h)) * (0.5 / h);
        let b = |x, y| bar(x, y, t);
        let (bx, by) = (d1(&b), d2(&b));
        let div = [bx.a11 + by.a12, bx.a12 + by.a22];
        let f = ex.f(x, y, t);
        assert!((f[0] + div[0]).abs() < 1e-5 && (f[1] + div[1]).abs() < 1e-5, "{f:?} {div:?}");
        let m = |x: f64, y: f64| hat(x, y, t);
        let dd = (m(x + h, y).a11 - 2.0 * m(x, y).a11 + m(x - h, y).a11) / (h * h)
            + (m(x, y + h).a22 - 2.0 * m(x, y).a22 + m(x, y - h).a22) / (h * h)
            + 2.0 * (m(x + h, y + h).a12 - m(x + h, y - h).a12 - m(x - h, y + h).a12 + m(x - h, y - h).a12) / (4.0 * h * h);
        let udd = (ex.u3(x, y, t + h) - 2.0 * ex.u3(x, y, t) + ex.u3(x, y, t - h)) / (h * h);
        let g = udd - dd / 12.0;
        assert!((ex.g(x, y, t) - g).abs() < 1e-3 * (1.0 + g.abs()), "{} {g}", ex.g(x, y, t));
    }
}
