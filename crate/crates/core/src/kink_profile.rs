//! The kink `H = G⁻¹` of a normalized potential, with `G(ψ) = ∫₀^ψ dy/√(2U(y))`.
//!
//! `1/√(2U(y))` blows up like `1/(1 − y)` at the vacuum. All quadratures work
//! with the bounded remainder `1/√(2U(y)) − 1/(1 − y)` and add the logarithm
//! in closed form. The table is inverted node by node with a Newton iteration
//! in `s = −ln(1 − ψ)`, where `G` is close to linear, safeguarded by bisection.
//! Beyond `x_switch` the profile is `±(1 − κe^{∓x})`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{NormalizationRecord, Potential};
use crate::quadrature::{trapezoid, Quadrature};

/// Width of the endpoint layer handled by a one-point series tail in `κ`.
const KAPPA_ENDPOINT_LAYER: f64 = 1e-6;
/// Table/tail agreement used to place `x_switch`.
const SWITCH_TOL: f64 = 1e-14;
/// Agreement that must hold at `x_switch` in every case.
const SWITCH_TOL_MAX: f64 = 1e-9;
const MIN_SWITCH: f64 = 4.0;

pub const DEFAULT_X_MAX: f64 = 40.0;
pub const DEFAULT_NODES: usize = 8193;

fn require_normalized(p: &Potential) -> Result<()> {
    if p.is_normalized() || ((p.phi_plus() - 1.0).abs() < 1e-12 && (p.curvature() - 1.0).abs() < 1e-12) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "potential `{}` is not normalized (phi_plus = {}, curvature = {})",
            p.name(),
            p.phi_plus(),
            p.curvature()
        )))
    }
}

/// `1/√(2U(y)) − 1/(1 − y)` on `[0, 1)`, bounded for a normalized potential.
fn remainder(p: &Potential, y: f64) -> f64 {
    let q = 1.0 - y;
    let slope = if y > 0.5 { p.bogomolny_slope_from_vacuum(q) } else { p.bogomolny_slope(y) };
    (q - slope) / (slope * q)
}

/// `∫₀^ψ dy/√(2U(y))` for a normalized potential and `|ψ| < 1`.
pub fn compute_g(p: &Potential, psi: f64) -> Result<f64> {
    require_normalized(p)?;
    if !(psi.abs() < 1.0) {
        return Err(Error::Domain(format!("compute_G needs |psi| < 1, got {psi}")));
    }
    let a = psi.abs();
    let (r, _) = Quadrature::new(1e-15, 1e-14).integrate(|y| remainder(p, y), 0.0, a)?;
    Ok(psi.signum() * (r - (-a).ln_1p()))
}

/// `κ = exp ∫₀^{φ₊} (√U″(φ₊)/√(2U(y)) − 1/(φ₊ − y)) dy` for any admissible potential.
pub fn compute_kappa(p: &Potential) -> Result<f64> {
    let pp = p.phi_plus();
    let root_c = p.curvature().sqrt();
    let integrand = |y: f64| {
        let q = pp - y;
        let slope = if y > 0.5 * pp { p.bogomolny_slope_from_vacuum(q) } else { p.bogomolny_slope(y) };
        (root_c * q - slope) / (slope * q)
    };
    let split = pp * (1.0 - KAPPA_ENDPOINT_LAYER);
    let (bulk, err) = Quadrature::new(1e-14, 1e-13).integrate(integrand, 0.0, split)?;
    if err > 1e-10 {
        return Err(Error::Accuracy { what: "kappa quadrature".into(), achieved: err });
    }
    // integrand is smooth up to the endpoint: one-point midpoint series on the layer
    let layer = pp - split;
    let tail = layer * integrand(pp - 0.5 * layer);
    Ok((bulk + tail).exp())
}

/// Tabulated kink of a normalized potential.
#[derive(Debug, Clone, Serialize)]
pub struct KinkProfile {
    potential: Potential,
    x_table: Vec<f64>,
    h_table: Vec<f64>,
    dh_table: Vec<f64>,
    d2h_table: Vec<f64>,
    d3h_table: Vec<f64>,
    kappa: f64,
    x_switch: f64,
    dx: f64,
    x_max: f64,
    /// Index of `x = 0` in the table (node count is odd).
    mid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KinkConstants {
    /// `‖∂ₓH‖²_{L²}`
    pub mass: f64,
    /// `E_p(H)`
    pub energy: f64,
}

impl KinkProfile {
    /// Builds the table on `nodes` uniform points of `[−x_max, x_max]`
    /// (an even `nodes` is bumped by one so that `x = 0` is a node).
    pub fn build(p: &Potential, x_max: f64, nodes: usize) -> Result<Self> {
        require_normalized(p)?;
        if x_max < 20.0 {
            return Err(Error::Domain(format!("build_profile needs x_max >= 20, got {x_max}")));
        }
        if nodes < 1024 {
            return Err(Error::Domain(format!("build_profile needs at least 1024 nodes, got {nodes}")));
        }
        let nodes = nodes | 1;
        let mid = nodes / 2;
        let dx = x_max / mid as f64;
        let kappa = compute_kappa(p)?;

        let mut solver = Inverter::new(p, kappa);
        let mut half = Vec::with_capacity(mid + 1);
        for i in 0..=mid {
            let x = x_max * i as f64 / mid as f64;
            let psi = solver.solve(x).map_err(|e| match e {
                Error::NoConvergence { iterations, residual, .. } => Error::NoConvergence {
                    what: format!("kink inversion at node {} (x = {x})", mid + i),
                    iterations,
                    residual,
                },
                other => other,
            })?;
            half.push((x, psi));
        }

        let mut x_table = vec![0.0; nodes];
        let mut h_table = vec![0.0; nodes];
        let mut dh_table = vec![0.0; nodes];
        let mut d2h_table = vec![0.0; nodes];
        let mut d3h_table = vec![0.0; nodes];
        for (i, &(x, psi)) in half.iter().enumerate() {
            let dh = p.bogomolny_slope(psi);
            let d2h = p.du(psi);
            let d3h = p.d2u(psi) * dh;
            for (j, sign) in [(mid + i, 1.0), (mid - i, -1.0)] {
                x_table[j] = sign * x;
                h_table[j] = sign * psi;
                dh_table[j] = dh;
                d2h_table[j] = sign * d2h;
                d3h_table[j] = d3h;
            }
        }

        let mut profile = KinkProfile {
            potential: p.clone(),
            x_table,
            h_table,
            dh_table,
            d2h_table,
            d3h_table,
            kappa,
            x_switch: x_max,
            dx,
            x_max,
            mid,
        };
        profile.x_switch = profile.locate_switch()?;
        Ok(profile)
    }

    /// Smallest node beyond which table and tail agree in all three orders.
    fn locate_switch(&self) -> Result<f64> {
        let gap = |i: usize| {
            let x = self.x_table[i];
            let t = self.kappa * (-x).exp();
            (self.h_table[i] - (1.0 - t))
                .abs()
                .max((self.dh_table[i] - t).abs())
                .max((self.d2h_table[i] + t).abs())
        };
        let n = self.x_table.len();
        for tol in [SWITCH_TOL, SWITCH_TOL_MAX] {
            let mut switch = None;
            for i in (self.mid..n).rev() {
                if gap(i) > tol {
                    break;
                }
                switch = Some(i);
            }
            if let Some(i) = switch {
                return Ok(self.x_table[i].max(MIN_SWITCH));
            }
        }
        Err(Error::Accuracy {
            what: "kink table never meets its exponential tail; increase x_max".into(),
            achieved: gap(n - 1),
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn x_switch(&self) -> f64 {
        self.x_switch
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_table(&self) -> &[f64] {
        &self.x_table
    }

    pub fn h_table(&self) -> &[f64] {
        &self.h_table
    }

    pub fn dh_table(&self) -> &[f64] {
        &self.dh_table
    }

    pub fn d2h_table(&self) -> &[f64] {
        &self.d2h_table
    }

    /// `H`, `∂ₓH` or `∂ₓ²H` at any real `x`.
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        let a = x.abs();
        // H and ∂ₓ²H are odd, ∂ₓH is even
        let parity = if order == 1 || x >= 0.0 { 1.0 } else { -1.0 };
        parity * self.eval_nonneg(a, order)
    }

    fn eval_nonneg(&self, x: f64, order: usize) -> f64 {
        if x > self.x_switch {
            let t = self.kappa * (-x).exp();
            return match order {
                0 => 1.0 - t,
                1 => t,
                _ => -t,
            };
        }
        let (f, df) = match order {
            0 => (&self.h_table, &self.dh_table),
            1 => (&self.dh_table, &self.d2h_table),
            _ => (&self.d2h_table, &self.d3h_table),
        };
        let u = x / self.dx;
        let k = (u.floor() as usize).min(self.x_table.len() - self.mid - 2);
        let t = u - k as f64;
        let (i0, i1) = (self.mid + k, self.mid + k + 1);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * f[i0] + h10 * self.dx * df[i0] + h01 * f[i1] + h11 * self.dx * df[i1]
    }

    /// Solves `G(ψ) = x` directly, without the table.
    pub fn solve_at(&self, x: f64) -> Result<f64> {
        let psi = Inverter::new(&self.potential, self.kappa).solve(x.abs())?;
        Ok(x.signum() * psi)
    }

    /// `κ` from the decay of `e^x(1 − H(x))` at two abscissae, eliminating the
    /// `e^{−x}` correction. Independent of the `κ` quadrature.
    pub fn tail_kappa(&self, x1: f64, x2: f64) -> Result<f64> {
        let k1 = x1.exp() * (1.0 - self.solve_at(x1)?);
        let k2 = x2.exp() * (1.0 - self.solve_at(x2)?);
        let (e1, e2) = ((-x1).exp(), (-x2).exp());
        Ok((k2 * e1 - k1 * e2) / (e1 - e2))
    }

    /// Mass `‖∂ₓH‖²` and energy `E_p(H)` by quadrature in the field variable,
    /// cross-checked against grid quadrature of the table.
    pub fn constants(&self) -> Result<KinkConstants> {
        let p = &self.potential;
        let q = Quadrature::new(1e-15, 1e-14);
        let pp = p.phi_plus();
        let (half, _) = q.integrate(|y| p.bogomolny_slope(y), 0.0, pp)?;
        let (energy, _) = q.integrate_pieces(|y| p.bogomolny_slope(y), &[-pp, 0.0, pp])?;
        let mass = 2.0 * half;

        let density: Vec<f64> = self
            .h_table
            .iter()
            .zip(&self.dh_table)
            .map(|(h, dh)| 0.5 * dh * dh + p.u(*h))
            .collect();
        let kinetic: Vec<f64> = self.dh_table.iter().map(|d| d * d).collect();
        // analytic tails beyond the table: ∫_{x_max}^∞ κ²e^{−2x} per side
        let tail = self.kappa * self.kappa * (-2.0 * self.x_max).exp();
        let grid_energy = trapezoid(&density, self.dx) + tail;
        let grid_mass = trapezoid(&kinetic, self.dx) + tail;
        let mismatch = (grid_energy - energy).abs().max((grid_mass - mass).abs());
        if mismatch > 1e-6 {
            return Err(Error::Inconsistency(format!(
                "kink constants disagree with grid quadrature by {mismatch:.3e}"
            )));
        }
        Ok(KinkConstants { mass, energy })
    }
}

/// Incremental inverter of `G` for increasing abscissae.
struct Inverter<'a> {
    p: &'a Potential,
    kappa: f64,
    quad: Quadrature,
    // anchor (ψ, ∫₀^ψ remainder) of the last converged node
    anchor: (f64, f64),
    last_s: f64,
    last_x: f64,
}

impl<'a> Inverter<'a> {
    fn new(p: &'a Potential, kappa: f64) -> Self {
        Self { p, kappa, quad: Quadrature::new(1e-16, 1e-14), anchor: (0.0, 0.0), last_s: 0.0, last_x: 0.0 }
    }

    fn remainder_integral(&self, psi: f64) -> Result<f64> {
        let (a, r) = self.anchor;
        let (inc, _) = self.quad.integrate(|y| remainder(self.p, y), a, psi)?;
        Ok(r + inc)
    }

    /// ψ ≥ 0 with `G(ψ) = x` for `x ≥ 0`.
    fn solve(&mut self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        // 1 − ψ is below the resolution of ψ: the tail is exact to O(e^{−2x})
        let gap = self.kappa * (-x).exp();
        if gap < 1e-13 {
            return Ok(1.0 - gap);
        }
        let psi_of = |s: f64| -(-s).exp_m1();
        // G(ψ(s)) − x, with G = R(ψ) + s
        let f = |this: &Self, s: f64| -> Result<(f64, f64, f64)> {
            let psi = psi_of(s);
            let r = this.remainder_integral(psi)?;
            let slope = if psi > 0.5 {
                this.p.bogomolny_slope_from_vacuum((-s).exp())
            } else {
                this.p.bogomolny_slope(psi)
            };
            let dfds = (-s).exp() / slope;
            Ok((r + s - x, dfds, r))
        };
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        let mut s = (self.last_s + (x - self.last_x)).max(0.0);
        let mut residual = f64::INFINITY;
        for _ in 0..100 {
            let (val, dval, r) = f(self, s)?;
            residual = val.abs();
            if val < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let mut next = s - val / dval;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * s + 1.0 };
            }
            // once ψ stops moving, s is resolved as well as ψ can represent it
            let converged = residual <= 1e-15 * x.max(1.0)
                || (next - s).abs() <= 4.0 * f64::EPSILON * s
                || psi_of(next) == psi_of(s)
                || (hi.is_finite() && psi_of(hi) - psi_of(lo) <= f64::EPSILON);
            if converged {
                let psi = psi_of(s);
                self.anchor = (psi, r);
                self.last_s = s;
                self.last_x = x;
                return Ok(psi);
            }
            s = next;
        }
        Err(Error::NoConvergence { what: format!("kink inversion at x = {x}"), iterations: 100, residual })
    }
}

/// A kink profile viewed in a particular set of units: `φ₊ H̃(√c x)` for the
/// physical model, or the normalized kink itself.
#[derive(Debug, Clone)]
pub struct Kink {
    profile: Arc<KinkProfile>,
    potential: Potential,
    phi_scale: f64,
    x_scale: f64,
}

impl Kink {
    /// The normalized kink, paired with the normalized potential.
    pub fn normalized(profile: Arc<KinkProfile>) -> Self {
        let potential = profile.potential.clone();
        Self { profile, potential, phi_scale: 1.0, x_scale: 1.0 }
    }

    /// The kink of `original`, mapped back through its normalization.
    pub fn physical(profile: Arc<KinkProfile>, original: &Potential) -> Result<Self> {
        let (normalized, record) = original.normalize();
        for i in 0..=16 {
            let y = -1.2 + 2.4 * i as f64 / 16.0;
            let (a, b) = (normalized.u(y), profile.potential.u(y));
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Err(Error::Domain(format!(
                    "profile was built for `{}`, not for `{}`",
                    profile.potential.name(),
                    original.name()
                )));
            }
        }
        Ok(Self::scaled(profile, original.clone(), &record))
    }

    fn scaled(profile: Arc<KinkProfile>, potential: Potential, record: &NormalizationRecord) -> Self {
        Self { profile, potential, phi_scale: record.phi_scale, x_scale: record.x_scale() }
    }

    pub fn profile(&self) -> &Arc<KinkProfile> {
        &self.profile
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn phi_plus(&self) -> f64 {
        self.potential.phi_plus()
    }

    /// Factor mapping these lengths to normalized ones (`√U″(φ₊)`).
    pub fn x_scale(&self) -> f64 {
        self.x_scale
    }

    pub fn phi_scale(&self) -> f64 {
        self.phi_scale
    }

    pub fn eval(&self, x: f64, order: usize) -> f64 {
        self.phi_scale * self.x_scale.powi(order as i32) * self.profile.eval(self.x_scale * x, order)
    }

    /// Mass and energy in these units.
    pub fn constants(&self) -> Result<KinkConstants> {
        let c = self.profile.constants()?;
        let s = self.phi_scale * self.phi_scale * self.x_scale;
        Ok(KinkConstants { mass: s * c.mass, energy: s * c.energy })
    }

    /// Tail amplitude in these units: `φ₊ − H(x) ≈ φ₊κ e^{−√c x}`.
    pub fn tail_amplitude(&self) -> f64 {
        self.phi_scale * self.profile.kappa
    }

    /// Distance beyond which `|φ₊ − |H||` is below `tol` in these units.
    pub fn core_width(&self, tol: f64) -> f64 {
        let k = self.profile.kappa * self.phi_scale;
        (k / tol).ln().max(0.0) / self.x_scale
    }
}
