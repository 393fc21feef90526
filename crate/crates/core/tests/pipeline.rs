use std::path::PathBuf;

use morseflow::VectorField;
use morseflow::pipeline::{analyze, resolve_field, ResolvedField, Tolerances};
use morseflow::scenario::{load_scenario, Scenario};
use morseflow::MorseError;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load_scenario(path).unwrap()
}

#[test]
fn bundled_scenarios_have_the_expected_homology() {
    let tol = Tolerances::default();
    for (name, betti) in [
        ("paraboloid.json", vec![1]),
        ("double_well.json", vec![1, 0]),
        ("torus.json", vec![1, 2, 1]),
        ("torus_anisotropic.json", vec![1, 2, 1]),
        ("torus_conformal.json", vec![1, 2, 1]),
    ] {
        let a = analyze(&scenario(name), &tol).unwrap();
        assert_eq!(a.homology.betti, betti, "{name}");
        assert_eq!(a.homology_mod2.betti, betti, "{name}");
        let euler: i64 = betti.iter().enumerate().map(|(k, b)| if k % 2 == 0 { *b as i64 } else { -(*b as i64) }).sum();
        assert_eq!(a.complex.euler_characteristic(), euler, "{name}");
    }
}

#[test]
fn degenerate_quartic_is_rejected() {
    let err = analyze(&scenario("degenerate_quartic.json"), &Tolerances::default()).unwrap_err();
    assert!(matches!(err, MorseError::DegenerateCriticalPoint { .. }), "{err}");
    assert!(err.is_numerical());
}

#[test]
fn homotopy_member_scenario_resolves_and_keeps_the_homology() {
    let s = scenario("torus_homotopy.json");
    let a = analyze(&s, &Tolerances::default()).unwrap();
    assert_eq!(a.homology.betti, vec![1, 2, 1]);
    let field = resolve_field(&s, &a.critical_points).unwrap();
    assert!(matches!(field, ResolvedField::Homotopy { .. }));
    // Far from the deformed point the member agrees with the gradient field.
    let grad = s.negative_gradient_field();
    let x = [0.25, 0.25];
    assert!((field.eval(&x) - grad.eval(&x)).norm() < 1e-12);
}

#[test]
fn malformed_documents_are_parse_or_validation_errors() {
    assert!(matches!(Scenario::from_json("{"), Err(MorseError::Parse(_))));
    let bad_period = r#"{
      "dimension": 2,
      "topology": {"kind": "torus", "periods": [1.0, -1.0]},
      "function": {"family": "trig_polynomial", "params": {"terms": []}},
      "metric": {"family": "identity"},
      "field": {"kind": "negative_gradient"}
    }"#;
    let err = Scenario::from_json(bad_period).unwrap_err();
    assert!(matches!(err, MorseError::Validation(_) | MorseError::Parse(_)), "{err}");
    assert!(!err.is_numerical());
}
