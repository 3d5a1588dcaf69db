use std::f64::consts::PI;

use kinklab_core::{Error, Potential};
use proptest::prelude::*;

fn builtins() -> Vec<Potential> {
    ["phi4", "sine_gordon"].iter().map(|n| Potential::make_builtin(n).unwrap()).collect()
}

#[test]
fn derivatives_match_centered_differences_at_second_order() {
    for p in builtins() {
        for order in 1..=3 {
            let f = |x: f64| p.derivative(x, order - 1);
            let err = |h: f64| {
                (0..=200)
                    .map(|i| -1.2 * p.phi_plus() + 2.4 * p.phi_plus() * i as f64 / 200.0)
                    .map(|x| (p.derivative(x, order) - (f(x + h) - f(x - h)) / (2.0 * h)).abs())
                    .fold(0.0, f64::max)
            };
            let (coarse, fine) = (err(1e-3), err(1e-4));
            let c = coarse / 1e-6;
            assert!(c < 10.0, "{} order {order}: C = {c}", p.name());
            // fine step is dominated by rounding once the h² term drops below ~1e-9
            assert!(fine <= c * 1e-8 + 1e-8, "{} order {order}: {fine}", p.name());
        }
    }
}

#[test]
fn normalize_is_idempotent() {
    for p in builtins() {
        let (n1, _) = p.normalize();
        let (n2, rec) = n1.normalize();
        assert!(rec.is_normalized);
        for i in 0..=100 {
            let x = -1.3 + 2.6 * i as f64 / 100.0;
            for order in 0..=3 {
                assert!((n1.derivative(x, order) - n2.derivative(x, order)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn sine_gordon_normalization_only_rescales_the_field() {
    let p = Potential::make_builtin("sine_gordon").unwrap();
    assert_eq!(p.curvature(), 1.0);
    let (n, rec) = p.normalize();
    assert_eq!(rec.time_scale, 1.0);
    assert!((rec.phi_scale - PI).abs() < 1e-15);
    for i in 0..=50 {
        let y = -1.0 + 2.0 * i as f64 / 50.0;
        assert!((n.u(y) - p.u(PI * y) / (PI * PI)).abs() < 1e-14);
    }
    assert_eq!(n.curvature(), 1.0);
}

#[test]
fn phi4_normalization_maps_curvature_to_one() {
    let p = Potential::make_builtin("phi4").unwrap();
    let (n, rec) = p.normalize();
    assert!((n.d2u(1.0) - 1.0).abs() < 1e-14);
    assert!((rec.x_scale() - 2f64.sqrt()).abs() < 1e-14);
    assert!(!rec.is_normalized);
}

#[test]
fn unknown_model_lists_the_builtins() {
    match Potential::make_builtin("double_sine") {
        Err(Error::UnknownModel { name, supported }) => {
            assert_eq!(name, "double_sine");
            assert_eq!(supported, vec!["phi4".to_string(), "sine_gordon".to_string()]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn custom_quartic_validates_and_odd_terms_are_rejected() {
    // ¼(1 − φ²)² = ¼ − ½φ² + ¼φ⁴
    let quartic = Potential::polynomial("quartic", vec![0.25, 0.0, -0.5, 0.0, 0.25]).unwrap();
    assert!(quartic.validate(256).is_ok());
    assert!((quartic.phi_plus() - 1.0).abs() < 1e-12);
    let tilted = Potential::polynomial("tilted", vec![0.25, 0.01, -0.5, 0.0, 0.25]).unwrap();
    assert!(matches!(tilted.validate(256), Err(Error::InvalidPotential { .. })));
    let report = tilted.diagnose(256).unwrap();
    assert!(!report.passed);
    assert!(report.checks.iter().any(|c| !c.passed));
}

#[test]
fn polynomial_without_a_well_is_rejected() {
    assert!(Potential::polynomial("bowl", vec![0.0, 0.0, 1.0]).is_err());
    assert!(Potential::polynomial("short", vec![1.0, 2.0]).is_err());
}

proptest! {
    #[test]
    fn potentials_are_even(x in -4.0f64..4.0) {
        for p in builtins() {
            prop_assert!((p.u(x) - p.u(-x)).abs() <= 1e-14 * (1.0 + p.u(x).abs()));
            prop_assert!((p.du(x) + p.du(-x)).abs() <= 1e-13 * (1.0 + p.du(x).abs()));
        }
    }

    #[test]
    fn stable_derivative_agrees_with_direct_form(s in -1.0f64..1.0) {
        for p in builtins() {
            let x = s * p.phi_plus();
            prop_assert!((p.du_stable(x) - p.du(x)).abs() <= 1e-13 * p.phi_plus());
        }
    }

    #[test]
    fn potential_is_positive_inside_the_well(s in -0.999f64..0.999) {
        for p in builtins() {
            prop_assert!(p.u(s * p.phi_plus()) > 0.0);
        }
    }
}
