//! Even double-well potentials and their normalization to `φ₊ = 1`, `U″(φ₊) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BUILTIN_MODELS: [&str; 2] = ["phi4", "sine_gordon"];

/// Base shape of the potential before rescaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// `¼(1 − φ²)²`
    Phi4,
    /// `1 + cos φ`, evaluated as `2 cos²(φ/2)` to keep relative accuracy near the vacuum.
    SineGordon,
    /// `Σ c_k φ^k` with ascending coefficients.
    Polynomial(Vec<f64>),
}

impl Shape {
    fn eval(&self, phi: f64, order: usize) -> f64 {
        match self {
            Shape::Phi4 => match order {
                0 => {
                    let w = (1.0 - phi) * (1.0 + phi);
                    0.25 * w * w
                }
                1 => -phi * (1.0 - phi) * (1.0 + phi),
                2 => 3.0 * phi * phi - 1.0,
                _ => 6.0 * phi,
            },
            Shape::SineGordon => match order {
                0 => {
                    let c = (0.5 * phi).cos();
                    2.0 * c * c
                }
                1 => -phi.sin(),
                2 => -phi.cos(),
                _ => phi.sin(),
            },
            Shape::Polynomial(c) => {
                // Horner on the `order`-th derivative
                let mut acc = 0.0;
                for k in (order..c.len()).rev() {
                    let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
                    acc = acc * phi + c[k] * falling;
                }
                acc
            }
        }
    }
}

/// A double-well potential `u(φ) = energy_scale · base(field_scale · φ)`.
///
/// Immutable after construction; all derivatives are analytic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    name: String,
    shape: Shape,
    field_scale: f64,
    energy_scale: f64,
    phi_plus: f64,
    curvature: f64,
    normalized: bool,
    /// Taylor coefficients of a polynomial base about its positive vacuum.
    vacuum_taylor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    /// φ₊ of the original model.
    pub phi_scale: f64,
    /// `1/√U″(φ₊)` of the original model.
    pub time_scale: f64,
    /// True when the input already had `φ₊ = 1` and `U″(φ₊) = 1`, so the map is the identity.
    pub is_normalized: bool,
}

impl NormalizationRecord {
    pub fn identity() -> Self {
        Self { phi_scale: 1.0, time_scale: 1.0, is_normalized: true }
    }

    /// `√U″(φ₊)` of the original model, the factor mapping physical to normalized lengths.
    pub fn x_scale(&self) -> f64 {
        1.0 / self.time_scale
    }
}

impl Potential {
    pub fn make_builtin(name: &str) -> Result<Self> {
        let (shape, phi_plus) = match name {
            "phi4" => (Shape::Phi4, 1.0),
            "sine_gordon" => (Shape::SineGordon, std::f64::consts::PI),
            _ => {
                return Err(Error::UnknownModel {
                    name: name.to_string(),
                    supported: BUILTIN_MODELS.iter().map(|s| s.to_string()).collect(),
                })
            }
        };
        let curvature = shape.eval(phi_plus, 2);
        Ok(Self {
            name: name.to_string(),
            shape,
            field_scale: 1.0,
            energy_scale: 1.0,
            phi_plus,
            curvature,
            normalized: false,
            vacuum_taylor: Vec::new(),
        })
    }

    /// Custom polynomial potential with ascending coefficients. The positive
    /// vacuum is the positive local minimum of `u` with the smallest value.
    /// Call [`validate`](Self::validate) before using the result.
    pub fn polynomial(name: &str, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() < 3 || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(
                "polynomial potential needs at least 3 finite coefficients".into(),
            ));
        }
        let shape = Shape::Polynomial(coefficients.clone());
        // Cauchy bound on the roots of U'
        let deriv: Vec<f64> = coefficients.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        let lead = deriv.iter().rposition(|c| *c != 0.0).ok_or_else(|| {
            Error::Domain("polynomial potential is constant".into())
        })?;
        let bound = 1.0
            + deriv[..lead].iter().map(|c| (c / deriv[lead]).abs()).fold(0.0, f64::max);
        let n = 20_000;
        let mut best: Option<(f64, f64)> = None;
        let du = |x: f64| shape.eval(x, 1);
        let mut prev_x = bound * 1e-6;
        let mut prev = du(prev_x);
        for i in 1..=n {
            let x = bound * i as f64 / n as f64;
            let cur = du(x);
            if prev < 0.0 && cur >= 0.0 {
                let (mut a, mut b) = (prev_x, x);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if du(m) < 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                let root = 0.5 * (a + b);
                let val = shape.eval(root, 0).abs();
                if best.map_or(true, |(_, v)| val < v) {
                    best = Some((root, val));
                }
            }
            prev = cur;
            prev_x = x;
        }
        let (phi_plus, _) = best.ok_or_else(|| {
            Error::Domain(format!("polynomial potential `{name}` has no positive local minimum"))
        })?;
        let curvature = shape.eval(phi_plus, 2);
        let mut factorial = 1.0;
        let vacuum_taylor = (0..coefficients.len())
            .map(|k| {
                if k > 0 {
                    factorial *= k as f64;
                }
                shape.eval(phi_plus, k) / factorial
            })
            .collect();
        Ok(Self {
            name: name.to_string(),
            shape,
            field_scale: 1.0,
            energy_scale: 1.0,
            phi_plus,
            curvature,
            normalized: false,
            vacuum_taylor,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn phi_plus(&self) -> f64 {
        self.phi_plus
    }

    pub fn phi_minus(&self) -> f64 {
        -self.phi_plus
    }

    /// `U″(φ₊)`.
    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `order`-th derivative of `u` at `phi` (orders 0..=3).
    pub fn derivative(&self, phi: f64, order: usize) -> f64 {
        self.energy_scale
            * self.field_scale.powi(order as i32)
            * self.shape.eval(self.field_scale * phi, order)
    }

    pub fn u(&self, phi: f64) -> f64 {
        self.derivative(phi, 0)
    }

    pub fn du(&self, phi: f64) -> f64 {
        self.derivative(phi, 1)
    }

    pub fn d2u(&self, phi: f64) -> f64 {
        self.derivative(phi, 2)
    }

    pub fn d3u(&self, phi: f64) -> f64 {
        self.derivative(phi, 3)
    }

    /// `√(2U(φ))`, the kink slope at field value `phi`.
    pub fn bogomolny_slope(&self, phi: f64) -> f64 {
        (2.0 * self.u(phi)).max(0.0).sqrt()
    }

    /// `U(φ₊ − q)`, evaluated without cancellation for small `q`.
    pub fn u_from_vacuum(&self, q: f64) -> f64 {
        let w = self.field_scale * q;
        let base = match &self.shape {
            Shape::Phi4 => {
                // base vacuum at 1: 1 − (1 − w)² = w(2 − w)
                let v = w * (2.0 - w);
                0.25 * v * v
            }
            Shape::SineGordon => {
                // base vacuum at π: 2cos²((π − w)/2) = 2sin²(w/2)
                let sn = (0.5 * w).sin();
                2.0 * sn * sn
            }
            Shape::Polynomial(_) => self.vacuum_taylor.iter().rev().fold(0.0, |acc, c| acc * (-w) + c),
        };
        self.energy_scale * base
    }

    /// `U′(φ)` computed relative to the nearer vacuum when `|φ| > φ₊/2`, so
    /// that it vanishes exactly at `±φ₊`.
    pub fn du_stable(&self, phi: f64) -> f64 {
        if phi.abs() <= 0.5 * self.phi_plus {
            return self.du(phi);
        }
        let w = self.field_scale * (self.phi_plus - phi.abs());
        // base derivative at (vacuum − w)
        let base = match &self.shape {
            Shape::Phi4 => -w * (2.0 - w) * (1.0 - w),
            Shape::SineGordon => -w.sin(),
            Shape::Polynomial(_) => {
                let t = &self.vacuum_taylor;
                let mut acc = 0.0;
                for k in (1..t.len()).rev() {
                    acc = acc * (-w) + k as f64 * t[k];
                }
                acc
            }
        };
        phi.signum() * base * self.energy_scale * self.field_scale
    }

    /// `√(2U(φ₊ − q))`.
    pub fn bogomolny_slope_from_vacuum(&self, q: f64) -> f64 {
        (2.0 * self.u_from_vacuum(q)).max(0.0).sqrt()
    }

    /// Rescales to `Ũ(φ) = U(φ₊φ)/(φ₊²U″(φ₊))`, which has `φ₊ = 1` and `Ũ″(1) = 1`.
    pub fn normalize(&self) -> (Potential, NormalizationRecord) {
        if self.normalized || ((self.phi_plus - 1.0).abs() <= 1e-12 && (self.curvature - 1.0).abs() <= 1e-12) {
            let mut p = self.clone();
            p.normalized = true;
            return (p, NormalizationRecord::identity());
        }
        let record = NormalizationRecord {
            phi_scale: self.phi_plus,
            time_scale: 1.0 / self.curvature.sqrt(),
            is_normalized: false,
        };
        let p = Potential {
            name: self.name.clone(),
            shape: self.shape.clone(),
            field_scale: self.field_scale * self.phi_plus,
            energy_scale: self.energy_scale / (self.phi_plus * self.phi_plus * self.curvature),
            phi_plus: 1.0,
            curvature: 1.0,
            normalized: true,
            vacuum_taylor: self.vacuum_taylor.clone(),
        };
        (p, record)
    }

    /// Checks the double-well invariants on `samples` points; fails with the
    /// first violated condition and its worst sample point.
    pub fn validate(&self, samples: usize) -> Result<ValidationReport> {
        let report = self.diagnose(samples)?;
        match report.checks.iter().find(|c| !c.passed) {
            None => Ok(report),
            Some(c) => Err(Error::InvalidPotential {
                condition: c.name.clone(),
                at: c.worst_at,
                violation: c.max_violation,
            }),
        }
    }

    /// Same checks as [`validate`](Self::validate) but always returns the full report.
    pub fn diagnose(&self, samples: usize) -> Result<ValidationReport> {
        if samples < 16 {
            return Err(Error::Domain(format!("validate needs at least 16 samples, got {samples}")));
        }
        let pp = self.phi_plus;
        let mut checks = Vec::new();

        // vacuum condition
        let (v_plus, v_minus) = (self.u(pp).abs(), self.u(-pp).abs());
        let (vac_at, vac) = if v_plus >= v_minus { (pp, v_plus) } else { (-pp, v_minus) };
        checks.push(CheckResult::new("vacuum u(±phi_plus) = 0", vac, vac_at, 1e-12));

        // positivity strictly inside the well
        let interior: Vec<f64> = (1..=samples).map(|i| -pp + 2.0 * pp * i as f64 / (samples + 1) as f64).collect();
        let (at, neg) = worst(&interior, |x| {
            let u = self.u(x);
            if u > 0.0 { 0.0 } else { f64::MIN_POSITIVE - u }
        });
        checks.push(CheckResult::new("u > 0 inside (-phi_plus, phi_plus)", neg, at, 0.0));

        // evenness
        let wide: Vec<f64> = (0..samples).map(|i| -1.25 * pp + 2.5 * pp * i as f64 / (samples - 1) as f64).collect();
        let scale = wide.iter().map(|&x| self.u(x).abs()).fold(1.0, f64::max);
        let (at, odd) = worst(&wide, |x| (self.u(-x) - self.u(x)).abs());
        checks.push(CheckResult::new("evenness u(-phi) = u(phi)", odd, at, 1e-12 * scale));

        // curvature at the vacuum
        let c = self.d2u(pp);
        checks.push(CheckResult::new(
            "curvature d2u(phi_plus) > 0",
            if c > 0.0 { 0.0 } else { c.abs().max(f64::MIN_POSITIVE) },
            pp,
            0.0,
        ));
        checks.push(CheckResult::new(
            "curvature field matches d2u(phi_plus)",
            (c - self.curvature).abs(),
            pp,
            1e-10 * self.curvature.abs().max(1.0),
        ));

        // derivative handles against centered differences
        for order in 1..=3 {
            let f = |x: f64| self.derivative(x, order - 1);
            let df = |x: f64| self.derivative(x, order);
            let fd_err = |h: f64| worst(&wide, |x| (df(x) - (f(x + h) - f(x - h)) / (2.0 * h)).abs());
            let (at, e4) = fd_err(1e-4);
            let scale = wide.iter().map(|&x| f(x).abs() + df(x).abs()).fold(1.0, f64::max);
            let mut check = CheckResult::new(
                match order {
                    1 => "du matches centered differences of u",
                    2 => "d2u matches centered differences of du",
                    _ => "d3u matches centered differences of d2u",
                },
                e4,
                at,
                1e-7 * scale,
            );
            check.fd_constant = Some(fd_err(1e-3).1 / 1e-6);
            checks.push(check);
        }

        let passed = checks.iter().all(|c| c.passed);
        Ok(ValidationReport { checks, passed })
    }
}

fn worst(xs: &[f64], f: impl Fn(f64) -> f64) -> (f64, f64) {
    xs.iter().map(|&x| (x, f(x))).fold((xs[0], 0.0), |acc, c| if c.1 > acc.1 { c } else { acc })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_violation: f64,
    pub worst_at: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Empirical `C` in `|f′ − Δ_h f| ≤ C h²`, for derivative checks.
    pub fd_constant: Option<f64>,
}

impl CheckResult {
    fn new(name: &str, max_violation: f64, worst_at: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            max_violation,
            worst_at,
            tolerance,
            passed: max_violation <= tolerance,
            fd_constant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn phi4_values() {
        let p = Potential::make_builtin("phi4").unwrap();
        assert_eq!(p.u(0.0), 0.25);
        assert_eq!(p.d2u(1.0), 2.0);
        assert_eq!(p.curvature(), 2.0);
        assert_eq!(p.phi_plus(), 1.0);
    }

    #[test]
    fn sine_gordon_values() {
        let p = Potential::make_builtin("sine_gordon").unwrap();
        assert!(p.u(PI).abs() < 1e-30);
        assert!((p.d2u(PI) - 1.0).abs() < 1e-15);
        assert!((p.u(0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_model_lists_supported() {
        let err = Potential::make_builtin("phi6").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("phi4") && msg.contains("sine_gordon"), "{msg}");
    }

    #[test]
    fn normalized_phi4_is_half() {
        let (n, rec) = Potential::make_builtin("phi4").unwrap().normalize();
        for i in 0..50 {
            let x = -1.5 + 3.0 * i as f64 / 49.0;
            let w = 1.0 - x * x;
            assert!((n.u(x) - w * w / 8.0).abs() < 1e-15);
        }
        assert_eq!(n.d2u(1.0), 1.0);
        assert_eq!(rec.phi_scale, 1.0);
        assert!((rec.time_scale - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normalized_sine_gordon() {
        let (n, rec) = Potential::make_builtin("sine_gordon").unwrap().normalize();
        for i in 0..50 {
            let x = -1.5 + 3.0 * i as f64 / 49.0;
            assert!((n.u(x) - (1.0 + (PI * x).cos()) / (PI * PI)).abs() < 1e-15);
        }
        assert!((n.d2u(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(rec.phi_scale, PI);
        assert!((rec.time_scale - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_is_idempotent() {
        for name in BUILTIN_MODELS {
            let (once, _) = Potential::make_builtin(name).unwrap().normalize();
            let (twice, rec) = once.normalize();
            assert!(rec.is_normalized);
            for i in 0..100 {
                let x = -1.2 + 2.4 * i as f64 / 99.0;
                for k in 0..4 {
                    assert!((once.derivative(x, k) - twice.derivative(x, k)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_MODELS {
            let p = Potential::make_builtin(name).unwrap();
            p.validate(256).unwrap();
            p.normalize().0.validate(256).unwrap();
        }
    }

    #[test]
    fn lifted_vacuum_fails() {
        // ¼(1 − φ²)² + 0.01 = 0.26 − ½φ² + ¼φ⁴
        let p = Potential::polynomial("lifted", vec![0.26, 0.0, -0.5, 0.0, 0.25]).unwrap();
        match p.validate(256) {
            Err(Error::InvalidPotential { condition, .. }) => assert!(condition.contains("vacuum")),
            other => panic!("expected vacuum failure, got {other:?}"),
        }
    }

    #[test]
    fn odd_perturbation_fails_evenness() {
        // ¼(1 − φ²)²(1 + 0.1φ)
        let p = Potential::polynomial("tilted", vec![0.25, 0.025, -0.5, -0.05, 0.25, 0.025]).unwrap();
        let report = p.diagnose(256).unwrap();
        let even = report.checks.iter().find(|c| c.name.starts_with("evenness")).unwrap();
        assert!(!even.passed);
        assert!(p.validate(256).is_err());
    }

    #[test]
    fn stable_derivative_vanishes_at_vacua() {
        for name in BUILTIN_MODELS {
            let p = Potential::make_builtin(name).unwrap();
            let pp = p.phi_plus();
            assert_eq!(p.du_stable(pp), 0.0);
            assert_eq!(p.du_stable(-pp), 0.0);
            for phi in [-1.2 * pp, -0.7 * pp, -0.2 * pp, 0.3 * pp, 0.9 * pp, 1.1 * pp] {
                assert!((p.du_stable(phi) - p.du(phi)).abs() < 1e-13, "{name} at {phi}");
            }
        }
        let q = Potential::polynomial("quartic", vec![0.25, 0.0, -0.5, 0.0, 0.25]).unwrap();
        assert!(q.du_stable(q.phi_plus()).abs() < 1e-15);
        assert!((q.du_stable(0.8) - q.du(0.8)).abs() < 1e-13);
    }

    #[test]
    fn vacuum_relative_evaluation() {
        let mut models: Vec<Potential> =
            BUILTIN_MODELS.iter().map(|n| Potential::make_builtin(n).unwrap()).collect();
        models.push(Potential::polynomial("poly", vec![0.25, 0.0, -0.5, 0.0, 0.25]).unwrap());
        for p in models {
            for p in [p.clone(), p.normalize().0] {
                for q in [0.9, 0.5, 0.1, 1e-3] {
                    let a = p.u_from_vacuum(q);
                    let b = p.u(p.phi_plus() - q);
                    // direct evaluation loses digits to cancellation as q shrinks
                    let tol = if q < 0.01 { 1e-8 } else { 1e-12 };
                    assert!((a - b).abs() <= tol * b.abs(), "{} q={q}: {a} vs {b}", p.name());
                }
                // quadratic behaviour U ≈ ½U″q² at the vacuum
                let q = 1e-9;
                let ratio = p.u_from_vacuum(q) / (0.5 * p.curvature() * q * q);
                assert!((ratio - 1.0).abs() < 1e-6, "{}: {ratio}", p.name());
            }
        }
    }

    #[test]
    fn polynomial_phi4_matches_builtin() {
        let p = Potential::polynomial("poly", vec![0.25, 0.0, -0.5, 0.0, 0.25]).unwrap();
        assert!((p.phi_plus() - 1.0).abs() < 1e-12);
        assert!((p.curvature() - 2.0).abs() < 1e-10);
        p.validate(64).unwrap();
        let b = Potential::make_builtin("phi4").unwrap();
        for x in [-1.3, -0.2, 0.0, 0.7, 1.1] {
            for k in 0..4 {
                assert!((p.derivative(x, k) - b.derivative(x, k)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let p = Potential::make_builtin("phi4").unwrap();
        assert!(matches!(p.validate(8), Err(Error::Domain(_))));
    }
}
