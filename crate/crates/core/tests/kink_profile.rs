use std::f64::consts::PI;
use std::sync::Arc;

use kinklab_core::{compute_g, compute_kappa, Kink, KinkProfile, Potential};

fn normalized(name: &str) -> Potential {
    Potential::make_builtin(name).unwrap().normalize().0
}

/// κ by shooting the Bogomolny equation `q′ = −√(2U(1 − q))` for `q = 1 − H`
/// from `H(0) = 0` with RK4, then eliminating the `e^{−x}` correction of
/// `e^x q(x)` between two abscissae.
fn kappa_by_shooting(p: &Potential) -> f64 {
    let rhs = |q: f64| -p.bogomolny_slope_from_vacuum(q);
    let h = 1e-3;
    let mut q = 1.0;
    let mut samples = Vec::new();
    for step in 1..=14_000 {
        let k1 = rhs(q);
        let k2 = rhs(q + 0.5 * h * k1);
        let k3 = rhs(q + 0.5 * h * k2);
        let k4 = rhs(q + h * k3);
        q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if step == 12_000 || step == 14_000 {
            samples.push((step as f64 * h, q));
        }
    }
    let (x1, q1) = samples[0];
    let (x2, q2) = samples[1];
    let (k1, k2) = (x1.exp() * q1, x2.exp() * q2);
    let (e1, e2) = ((-x1).exp(), (-x2).exp());
    (k2 * e1 - k1 * e2) / (e1 - e2)
}

#[test]
fn kappa_routes_agree() {
    for (name, exact) in [("phi4", 2.0), ("sine_gordon", 4.0 / PI)] {
        let p = normalized(name);
        let quad = compute_kappa(&p).unwrap();
        let shoot = kappa_by_shooting(&p);
        let prof = KinkProfile::build(&p, 30.0, 2049).unwrap();
        let tail = prof.tail_kappa(12.0, 14.0).unwrap();
        assert!((quad - exact).abs() < 1e-10, "{name}: quadrature {quad}");
        assert!((shoot - exact).abs() < 1e-8, "{name}: shooting {shoot}");
        assert!((tail - quad).abs() < 1e-6, "{name}: tail {tail}");
        assert!((shoot - quad).abs() < 1e-6);
    }
}

#[test]
fn custom_quartic_reproduces_phi4() {
    // ¼(1 − φ²)² entered as coefficients goes through the same pipeline
    let p = Potential::polynomial("quartic", vec![0.25, 0.0, -0.5, 0.0, 0.25]).unwrap();
    p.validate(256).unwrap();
    let (n, _) = p.normalize();
    let prof = KinkProfile::build(&n, 30.0, 2049).unwrap();
    assert!((prof.kappa() - 2.0).abs() < 1e-9);
    assert!((prof.tail_kappa(12.0, 14.0).unwrap() - prof.kappa()).abs() < 1e-6);
}

#[test]
fn unnormalized_phi4_kink() {
    let phi4 = Potential::make_builtin("phi4").unwrap();
    let prof = Arc::new(KinkProfile::build(&phi4.normalize().0, 40.0, 8193).unwrap());
    let kink = Kink::physical(prof, &phi4).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=4000 {
        let x = -20.0 + 40.0 * i as f64 / 4000.0;
        worst = worst.max((kink.eval(x, 0) - (x / 2f64.sqrt()).tanh()).abs());
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn sine_gordon_kink() {
    let sg = Potential::make_builtin("sine_gordon").unwrap();
    let prof = Arc::new(KinkProfile::build(&sg.normalize().0, 40.0, 8193).unwrap());
    let kink = Kink::physical(prof, &sg).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=4000 {
        let x = -20.0 + 40.0 * i as f64 / 4000.0;
        worst = worst.max((kink.eval(x, 0) - (4.0 * x.exp().atan() - PI)).abs());
        worst = worst.max((kink.eval(x, 1) - 2.0 / x.cosh()).abs());
    }
    assert!(worst < 1e-8, "{worst}");
    // κ read off the explicit kink: e^x(1 − H/π) = (4/π)e^x atan(e^{−x}) → 4/π
    let x: f64 = 12.0;
    let explicit = 4.0 / PI * x.exp() * (-x).exp().atan();
    assert!((explicit - 4.0 / PI).abs() < 1e-9);
}

#[test]
fn table_invariants() {
    for name in ["phi4", "sine_gordon"] {
        let p = normalized(name);
        let prof = KinkProfile::build(&p, 30.0, 4097).unwrap();
        let (x, h, dh) = (prof.x_table(), prof.h_table(), prof.dh_table());
        let n = x.len();
        for i in 0..n {
            // Bogomolny residual and oddness
            assert!((dh[i] - p.bogomolny_slope(h[i])).abs() <= 1e-8);
            assert!((h[i] + h[n - 1 - i]).abs() <= 1e-10);
            if i > 0 {
                assert!(h[i] > h[i - 1] || h[i] == 1.0 || h[i - 1] == -1.0, "{name}: not increasing at {i}");
            }
        }
        // G(H(x)) = x at interior nodes, through an independent full-range quadrature
        for i in (n / 2..n).step_by(97) {
            if x[i] < 15.0 {
                let g = compute_g(&p, h[i]).unwrap();
                assert!((g - x[i]).abs() < 1e-8, "{name}: G(H({})) = {g}", x[i]);
            }
        }
        // beyond the switch the profile is the exponential tail
        let xs = prof.x_switch();
        let kappa = prof.kappa();
        for x in [xs + 0.5, xs + 3.0] {
            let gap = (1.0 - prof.eval(x, 0) - kappa * (-x).exp()).abs();
            assert!(gap <= 1e-14, "{name}: {gap}");
        }
        // and just inside it the table still agrees with the tail
        let inside = xs - 0.25;
        let gap = (1.0 - prof.eval(inside, 0) - kappa * (-inside).exp()).abs();
        assert!(gap <= 1e-9, "{name}: {gap}");
    }
}

#[test]
fn bogomolny_and_static_equation_off_grid() {
    for name in ["phi4", "sine_gordon"] {
        let p = normalized(name);
        let prof = KinkProfile::build(&p, 40.0, 8193).unwrap();
        let h = 1e-4;
        for i in 0..=2000 {
            let x = -35.0 + 70.0 * i as f64 / 2000.0 + 1e-3;
            let v = prof.eval(x, 0);
            assert!((prof.eval(x, 1) - p.bogomolny_slope(v)).abs() <= 1e-8, "{name} at {x}");
            let second = (prof.eval(x + h, 1) - prof.eval(x - h, 1)) / (2.0 * h);
            assert!((second - p.du(v)).abs() <= 1e-6, "{name} at {x}");
            assert!((prof.eval(x, 2) - p.du(v)).abs() <= 1e-8);
        }
    }
}

#[test]
fn interpolation_error_is_fourth_order() {
    let p = normalized("phi4");
    let err = |nodes: usize| {
        let prof = KinkProfile::build(&p, 20.0, nodes).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..20_000 {
            let x = -8.0 + 16.0 * (i as f64 + 0.37) / 20_000.0;
            worst = worst.max((prof.eval(x, 0) - (x / 2.0).tanh()).abs());
        }
        worst
    };
    let (coarse, fine) = (err(1025), err(2049));
    let ratio = coarse / fine;
    assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio} ({coarse:e} -> {fine:e})");
}
