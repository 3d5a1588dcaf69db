use kinklab_core::asymptotic_ode::{
    fit_log_law, fit_log_law_samples, log_law_jacobian, log_law_residuals, norm_diagnostics, solve_coupled,
    solve_euler, solve_reduced, solve_reduced_forced, solve_reduced_threshold, Forcing,
};
use kinklab_core::interaction::constant_a;
use kinklab_core::{Error, ExponentialForce, ForceTable, Model};
use proptest::prelude::*;

#[test]
fn euler_solution_satisfies_the_equation() {
    let v = |t: f64| t.powi(-5) + (-t).exp() * (3.0 * t).sin();
    for mu in [0.0, 2.0, 0.75] {
        let s = solve_euler(mu, Forcing::new(&v, 5.0), 2.0, 12.0, 20001).unwrap();
        let h = s.t[1] - s.t[0];
        for i in 1..s.t.len() - 1 {
            let d2 = (s.z[i + 1] - 2.0 * s.z[i] + s.z[i - 1]) / (h * h);
            let t = s.t[i];
            let r = d2 - mu * s.z[i] / (t * t) - v(t);
            assert!(r.abs() <= 1e-7, "mu {mu} t {t}: {r}");
            let d1 = (s.z[i + 1] - s.z[i - 1]) / (2.0 * h);
            assert!((d1 - s.dz[i]).abs() <= 1e-7);
        }
    }
}

#[test]
fn euler_tail_closure_rejects_non_power_forcing() {
    // e^{−t/50}·t⁻⁴ is not a monomial near T_max, so the tail bound fails
    let v = |t: f64| (-(t / 50.0)).exp() * t.powi(-4) + 1e-3 * (0.01 * t).sin().abs() * t.powi(-4);
    let r = solve_euler(0.0, Forcing::new(&v, 4.0), 1.0, 10.0, 11);
    assert!(matches!(r, Err(Error::Accuracy { .. })), "{r:?}");
}

#[test]
fn coupled_system_reduces_to_the_euler_cases() {
    // equal forcings drive only z₁ = y₁ + y₂, with z₁″ = 2t⁻³ so z₁ = t⁻¹
    let t3 = |t: f64| t.powi(-3);
    let s = solve_coupled(Forcing::new(&t3, 3.0), Forcing::new(&t3, 3.0), 1.0, 10.0, 46).unwrap();
    for i in 0..s.t.len() {
        let expect = 0.5 / s.t[i];
        assert!((s.y1[i] - expect).abs() < 1e-8 && (s.y2[i] - expect).abs() < 1e-8);
    }
    let plus = |t: f64| t.powi(-4);
    let minus = |t: f64| -t.powi(-4);
    // opposite forcings drive only z₂ = y₂ − y₁, with z₂″ = 2t⁻²z₂ + 2t⁻⁴ so z₂ = t⁻²/2
    let s = solve_coupled(Forcing::new(&minus, 4.0), Forcing::new(&plus, 4.0), 1.0, 10.0, 46).unwrap();
    for i in 0..s.t.len() {
        let expect = 0.25 / (s.t[i] * s.t[i]);
        assert!((s.y2[i] - expect).abs() < 1e-8 && (s.y1[i] + expect).abs() < 1e-8);
    }
    let zero = |_: f64| 0.0;
    let s = solve_coupled(Forcing::new(&zero, 5.0), Forcing::new(&zero, 5.0), 1.0, 10.0, 11).unwrap();
    assert!(s.y1.iter().chain(&s.y2).all(|&y| y == 0.0));
}

#[test]
fn reduced_ode_with_the_phi4_force_table_follows_the_log_law() {
    let m = Model::builtin("phi4").unwrap();
    let k = m.normalized_kink();
    let a = constant_a(m.normalized_potential(), m.profile()).unwrap();
    let table = ForceTable::build(&k, a, 4.0, 30.0, 129).unwrap();
    let sol = solve_reduced_threshold(&table, &|_| 0.0, 3.0, 6.0, 1.0, 200.0, 1e-2).unwrap();
    assert!(sol.conserved_drift() < 1e-8);
    let fit = fit_log_law(&sol, 1.0, (20.0, 200.0)).unwrap();
    assert!((fit.a_hat / a - 1.0).abs() < 0.02, "{fit:?}");
}

#[test]
fn forced_first_integral_includes_the_work() {
    let f = ExponentialForce::new(2.0);
    let v = |t: f64| 0.3 * t.powi(-2);
    let sol = solve_reduced_forced(&f, &v, 3.0, 1.5, 1.0, 30.0, 1e-3).unwrap();
    assert!(sol.conserved_drift() < 1e-9, "{}", sol.conserved_drift());
}

#[test]
fn leaving_the_table_is_a_domain_error() {
    let m = Model::builtin("sine_gordon").unwrap();
    let k = m.normalized_kink();
    let table = ForceTable::build(&k, 2.0, 6.0, 20.0, 33).unwrap();
    let r = solve_reduced(&table, 8.0, 0.0, 1.0, 100.0, 1e-2);
    assert!(matches!(r, Err(Error::Domain(_))));
}

#[test]
fn fit_reports_history_on_failure() {
    // a decreasing trajectory has no log-law fit with A > 0 and t0 below the data
    let t: Vec<f64> = (0..50).map(|i| 1.0 + i as f64).collect();
    let x: Vec<f64> = t.iter().map(|t| 10.0 - t).collect();
    match fit_log_law_samples(&t, &x, 1.0, (1.0, 50.0)) {
        Err(Error::Fit { history, .. }) => assert!(!history.is_empty()),
        other => panic!("{other:?}"),
    }
    assert!(matches!(fit_log_law_samples(&t, &x, 1.0, (0.5, 50.0)), Err(Error::Domain(_))));
}

#[test]
fn fit_uses_the_curvature_scaling() {
    let c: f64 = 2.0;
    let t: Vec<f64> = (0..100).map(|i| 5.0 + 0.5 * i as f64).collect();
    let x: Vec<f64> = t.iter().map(|t| (3.0 * (t + 1.0)).ln() / c.sqrt()).collect();
    let fit = fit_log_law_samples(&t, &x, c, (5.0, 54.5)).unwrap();
    assert!((fit.a_hat - 3.0).abs() < 1e-8 && (fit.t0_hat + 1.0).abs() < 1e-8, "{fit:?}");
    assert!((fit.curvature_inv_sqrt - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn norm_diagnostics_see_cancellation() {
    let t: Vec<f64> = (0..=1000).map(|i| 1.0 + 0.01 * i as f64).collect();
    // a fast oscillation has unit sup norm but a small running integral
    let z: Vec<f64> = t.iter().map(|t| (50.0 * t).sin()).collect();
    let (n, w) = norm_diagnostics(&t, &z, 0.0, 0.0, 0.0);
    assert!(n > 0.99);
    assert!(w <= 0.04 + 1e-6, "{w}");
    let (n, w) = norm_diagnostics(&t, &vec![1.0; t.len()], 1.0, 0.0, 0.0);
    assert!((n - 11.0).abs() < 1e-12 && (w - 10.0).abs() < 1e-12);
    // t⁻³ with α = 0, β = 2: t²·|∫_t^τ s⁻³ ds| = (1 − t²/τ²)/2 stays below ½
    let t: Vec<f64> = (0..=4000).map(|i| 1.0 + 0.01 * i as f64).collect();
    let z: Vec<f64> = t.iter().map(|t| t.powi(-3)).collect();
    let (_, w) = norm_diagnostics(&t, &z, 0.0, 0.0, 2.0);
    let tau = *t.last().unwrap();
    let oracle = 0.5 * (1.0 - (t[0] / tau).powi(2));
    assert!(w <= 0.5 && (w - oracle).abs() < 1e-4, "{w} {oracle}");
}

proptest! {
    #[test]
    fn fit_jacobian_matches_finite_differences(a in 0.5f64..5.0, t0 in -2.0f64..0.5, c in 0.5f64..3.0) {
        let t: Vec<f64> = (0..30).map(|i| 2.0 + i as f64).collect();
        let x: Vec<f64> = t.iter().map(|t| 0.3 * t.ln()).collect();
        let jac = log_law_jacobian(&t, c, a, t0);
        let h = 1e-6;
        let ra = |a: f64| log_law_residuals(&t, &x, c, a, t0);
        let rt = |t0: f64| log_law_residuals(&t, &x, c, a, t0);
        let (ap, am, tp, tm) = (ra(a + h), ra(a - h), rt(t0 + h), rt(t0 - h));
        for i in 0..t.len() {
            let fa = (ap[i] - am[i]) / (2.0 * h);
            let ft = (tp[i] - tm[i]) / (2.0 * h);
            prop_assert!((fa - jac[i][0]).abs() <= 1e-5 * jac[i][0].abs());
            prop_assert!((ft - jac[i][1]).abs() <= 1e-5 * jac[i][1].abs());
        }
    }

    #[test]
    fn exact_log_law_is_recovered(a in 0.5f64..6.0, t0 in -1.0f64..1.5) {
        let t: Vec<f64> = (0..120).map(|i| 2.0 + 0.25 * i as f64).collect();
        let x: Vec<f64> = t.iter().map(|t| (a * (t - t0)).ln()).collect();
        let fit = fit_log_law_samples(&t, &x, 1.0, (2.0, 31.75)).unwrap();
        prop_assert!((fit.a_hat - a).abs() <= 1e-6 * a && (fit.t0_hat - t0).abs() <= 1e-6);
        prop_assert!(fit.rms_residual <= 1e-12);
    }
}
