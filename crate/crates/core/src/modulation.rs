//! Modulation parameters of a kink–antikink snapshot: positions fixed by
//! orthogonality of the remainder to both translation modes, their
//! velocities, and the cutoff-corrected momenta.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_solver::{Energy, FieldState, Observer, Solver};
use crate::interaction::ForceLaw;
use crate::kink_profile::Kink;
use crate::quadrature::inner;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationConfig {
    /// Smallest separation accepted, in normalized lengths.
    pub z0: f64,
    /// Bound on `max_j |⟨∂ₓH_j, g⟩| / ‖∂ₓH‖²`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        Self { z0: 6.0, tolerance: 1e-9, max_iterations: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationFrame {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub g_norm_h1: f64,
    pub dtphi_norm: f64,
    pub v1: f64,
    pub v2: f64,
    pub p1: f64,
    pub p2: f64,
    pub orth_residual: f64,
}

impl ModulationFrame {
    pub fn z(&self) -> f64 {
        self.x2 - self.x1
    }
}

/// Positions and remainder `g = φ − (φ₊ − H₁ + H₂)` of one snapshot.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub x1: f64,
    pub x2: f64,
    pub g: Vec<f64>,
    pub orth_residual: f64,
    pub iterations: usize,
}

/// `χ(s)`: 1 for `s ≤ 1/3`, 0 for `s ≥ 2/3`, quintic smoothstep between.
pub fn cutoff(s: f64) -> f64 {
    let u = ((s - 1.0 / 3.0) * 3.0).clamp(0.0, 1.0);
    1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

pub fn cutoff_derivative(s: f64) -> f64 {
    let u = (s - 1.0 / 3.0) * 3.0;
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    -3.0 * 30.0 * u * u * (1.0 - u) * (1.0 - u)
}

/// Zero crossings of `φ` (the midpoint of the two vacua) bracketing the
/// antikink–kink pair: first downward and last upward crossing.
pub fn initial_guess(state: &FieldState) -> Result<(f64, f64)> {
    let (phi, g) = (&state.phi, &state.grid);
    let cross = |i: usize| g.x(i) + g.dx * phi[i] / (phi[i] - phi[i + 1]);
    let first = (0..g.n - 1).find(|&i| phi[i] > 0.0 && phi[i + 1] <= 0.0);
    let last = (0..g.n - 1).rev().find(|&i| phi[i] <= 0.0 && phi[i + 1] > 0.0);
    match (first, last) {
        (Some(a), Some(b)) if b >= a => Ok((cross(a), cross(b))),
        _ => Err(Error::Regime("snapshot has no antikink-kink pair of zero crossings".into())),
    }
}

/// Sampled `H_j`, `∂ₓH_j`, `∂ₓ²H_j` for a kink centred at `c`.
struct Modes {
    h: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Modes {
    fn new(kink: &Kink, state: &FieldState, c: f64) -> Self {
        let grid = &state.grid;
        let mut h = Vec::with_capacity(grid.n);
        let mut d1 = Vec::with_capacity(grid.n);
        let mut d2 = Vec::with_capacity(grid.n);
        for i in 0..grid.n {
            let y = grid.x(i) - c;
            h.push(kink.eval(y, 0));
            d1.push(kink.eval(y, 1));
            d2.push(kink.eval(y, 2));
        }
        Self { h, d1, d2 }
    }
}

/// Extracts modulation frames for one model.
#[derive(Debug, Clone)]
pub struct Modulator {
    kink: Kink,
    mass: f64,
    config: ModulationConfig,
}

impl Modulator {
    pub fn new(kink: Kink, config: ModulationConfig) -> Result<Self> {
        let mass = kink.constants()?.mass;
        Ok(Self { kink, mass, config })
    }

    pub fn config(&self) -> &ModulationConfig {
        &self.config
    }

    fn min_separation(&self) -> f64 {
        self.config.z0 / self.kink.x_scale()
    }

    fn remainder(&self, state: &FieldState, m1: &Modes, m2: &Modes) -> Vec<f64> {
        let pp = self.kink.phi_plus();
        (0..state.grid.n).map(|i| state.phi[i] - (pp - m1.h[i] + m2.h[i])).collect()
    }

    /// Newton iteration on `Γ_j = ⟨∂ₓH_j, g⟩ = 0`.
    pub fn decompose(&self, state: &FieldState, guess: (f64, f64)) -> Result<Decomposition> {
        let dx = state.grid.dx;
        let zmin = self.min_separation();
        let (mut x1, mut x2) = guess;
        let mut last = f64::INFINITY;
        for it in 0..=self.config.max_iterations {
            if !(x2 - x1 >= zmin) {
                return Err(Error::Regime(format!(
                    "separation {} fell below z0 = {zmin} during decomposition",
                    x2 - x1
                )));
            }
            let (m1, m2) = (Modes::new(&self.kink, state, x1), Modes::new(&self.kink, state, x2));
            let g = self.remainder(state, &m1, &m2);
            let (r1, r2) = (inner(&m1.d1, &g, dx), inner(&m2.d1, &g, dx));
            let residual = r1.abs().max(r2.abs()) / self.mass;
            last = residual;
            if residual <= self.config.tolerance {
                return Ok(Decomposition { x1, x2, g, orth_residual: residual, iterations: it });
            }
            let gram = inner(&m1.d1, &m2.d1, dx);
            let (n1, n2) = (inner(&m1.d1, &m1.d1, dx), inner(&m2.d1, &m2.d1, dx));
            let j11 = -inner(&m1.d2, &g, dx) - n1;
            let j22 = -inner(&m2.d2, &g, dx) + n2;
            let (j12, j21) = (gram, -gram);
            let det = j11 * j22 - j12 * j21;
            let d1 = (r1 * j22 - r2 * j12) / det;
            let d2 = (r2 * j11 - r1 * j21) / det;
            // steps beyond a kink width are truncated
            let cap = 1.0 / self.kink.x_scale();
            let scale = (cap / d1.abs().max(d2.abs())).min(1.0);
            x1 -= scale * d1;
            x2 -= scale * d2;
        }
        Err(Error::NoConvergence { what: "modulation Newton iteration".into(), iterations: self.config.max_iterations, residual: last })
    }

    /// `(x₁′, x₂′)` from the differentiated orthogonality conditions.
    pub fn velocities(&self, state: &FieldState, dec: &Decomposition) -> Result<(f64, f64)> {
        let dx = state.grid.dx;
        let (m1, m2) = (Modes::new(&self.kink, state, dec.x1), Modes::new(&self.kink, state, dec.x2));
        let gram = inner(&m1.d1, &m2.d1, dx);
        let a11 = -inner(&m1.d1, &m1.d1, dx) - inner(&m1.d2, &dec.g, dx);
        let a22 = inner(&m2.d1, &m2.d1, dx) - inner(&m2.d2, &dec.g, dx);
        let (a12, a21) = (gram, -gram);
        let cond = condition_number([[a11, a12], [a21, a22]]);
        if !(cond <= 10.0) {
            return Err(Error::Regime(format!("velocity system condition number {cond:.3e} exceeds 10")));
        }
        let b1 = -inner(&m1.d1, &state.pi, dx);
        let b2 = -inner(&m2.d1, &state.pi, dx);
        let det = a11 * a22 - a12 * a21;
        Ok(((b1 * a22 - b2 * a12) / det, (b2 * a11 - b1 * a21) / det))
    }

    /// `p₁ = ‖∂ₓH‖⁻²⟨∂ₓ(H₁ − χ₁g), ∂ₜφ⟩`, `p₂ = ‖∂ₓH‖⁻²⟨−∂ₓ(H₂ + χ₂g), ∂ₜφ⟩`.
    pub fn corrected_momenta(&self, state: &FieldState, dec: &Decomposition) -> (f64, f64) {
        let grid = &state.grid;
        let (dx, n) = (grid.dx, grid.n);
        let z = dec.x2 - dec.x1;
        let dg = centered_derivative(&dec.g, dx);
        let mut w1 = Vec::with_capacity(n);
        let mut w2 = Vec::with_capacity(n);
        for i in 0..n {
            let x = grid.x(i);
            let s = (x - dec.x1) / z;
            let (chi, dchi) = (cutoff(s), cutoff_derivative(s) / z);
            // ∂ₓ(χ₁g) and ∂ₓ(χ₂g) with χ₂ = 1 − χ₁
            let d_chi1_g = dchi * dec.g[i] + chi * dg[i];
            let d_chi2_g = -dchi * dec.g[i] + (1.0 - chi) * dg[i];
            w1.push(self.kink.eval(x - dec.x1, 1) - d_chi1_g);
            w2.push(-self.kink.eval(x - dec.x2, 1) - d_chi2_g);
        }
        (inner(&w1, &state.pi, dx) / self.mass, inner(&w2, &state.pi, dx) / self.mass)
    }

    pub fn frame(&self, state: &FieldState, guess: (f64, f64)) -> Result<(ModulationFrame, Decomposition)> {
        let dec = self.decompose(state, guess)?;
        let (v1, v2) = self.velocities(state, &dec)?;
        let (p1, p2) = self.corrected_momenta(state, &dec);
        let dx = state.grid.dx;
        let g_norm_h1 = h1_norm(&dec.g, dx);
        let dtphi_norm = inner(&state.pi, &state.pi, dx).sqrt();
        let frame = ModulationFrame {
            t: state.t,
            x1: dec.x1,
            x2: dec.x2,
            g_norm_h1,
            dtphi_norm,
            v1,
            v2,
            p1,
            p2,
            orth_residual: dec.orth_residual,
        };
        Ok((frame, dec))
    }
}

fn condition_number(a: [[f64; 2]; 2]) -> f64 {
    // singular values of a 2×2 matrix from the invariants of AᵀA
    let fro = a.iter().flatten().map(|v| v * v).sum::<f64>();
    let det = (a[0][0] * a[1][1] - a[0][1] * a[1][0]).abs();
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    let (s_max, s_min) = (((fro + disc) / 2.0).sqrt(), ((fro - disc) / 2.0).max(0.0).sqrt());
    s_max / s_min
}

fn centered_derivative(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (v[1] - v[0]) / dx
            } else if i == n - 1 {
                (v[n - 1] - v[n - 2]) / dx
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

/// Discrete `H¹` norm with forward differences.
pub fn h1_norm(v: &[f64], dx: f64) -> f64 {
    let grad: f64 = v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / dx;
    (inner(v, v, dx) + grad).sqrt()
}

/// Time-ordered frames of one evolution.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub frames: Vec<ModulationFrame>,
    pub energies: Vec<Energy>,
    pub config: ModulationConfig,
    /// Set when a frame failed and the record stops early.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub z: f64,
    pub p: f64,
    pub dp: f64,
    /// `|z′ − p| e^{z}`
    pub velocity_gap: f64,
    /// `|p′ + 2F(z)| z e^{z}`
    pub force_gap: f64,
}

impl TrajectoryRecord {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    /// Rate diagnostics with `p = p₂ − p₁` and centered `p′` (interior frames).
    /// `z` is measured in normalized lengths through `rate`.
    pub fn diagnostics(&self, force: &dyn ForceLaw, rate: f64) -> Vec<DiagnosticRow> {
        let f = &self.frames;
        (1..f.len().saturating_sub(1))
            .map(|i| {
                let p = f[i].p2 - f[i].p1;
                let dp = ((f[i + 1].p2 - f[i + 1].p1) - (f[i - 1].p2 - f[i - 1].p1)) / (f[i + 1].t - f[i - 1].t);
                let z = f[i].z();
                let zn = rate * z;
                DiagnosticRow {
                    t: f[i].t,
                    z,
                    p,
                    dp,
                    velocity_gap: ((f[i].v2 - f[i].v1) - p).abs() * zn.exp(),
                    force_gap: (dp + 2.0 * force.force(z)).abs() * zn * zn.exp(),
                }
            })
            .collect()
    }
}

/// Observer that decomposes every observed snapshot, warm-starting from the
/// previous frame.
pub struct ModulationObserver {
    modulator: Modulator,
    guess: Option<(f64, f64)>,
    /// Snapshots before this time are skipped.
    pub t_start: f64,
    pub record: TrajectoryRecord,
}

impl ModulationObserver {
    pub fn new(modulator: Modulator, guess: Option<(f64, f64)>, t_start: f64) -> Self {
        let config = modulator.config;
        Self {
            modulator,
            guess,
            t_start,
            record: TrajectoryRecord { frames: Vec::new(), energies: Vec::new(), config, failure: None },
        }
    }

    pub fn into_record(self) -> TrajectoryRecord {
        self.record
    }
}

impl Observer for ModulationObserver {
    fn observe(&mut self, solver: &Solver, state: &FieldState) -> Result<()> {
        if state.t < self.t_start - 1e-12 {
            return Ok(());
        }
        let guess = match self.guess {
            Some(g) => g,
            None => initial_guess(state)?,
        };
        match self.modulator.frame(state, guess) {
            Ok((frame, _)) => {
                self.guess = Some((frame.x1, frame.x2));
                self.record.frames.push(frame);
                self.record.energies.push(solver.energy(state));
                Ok(())
            }
            Err(e) => {
                self.record.failure = Some(format!("t = {}: {e}", state.t));
                Err(e)
            }
        }
    }
}

/// Least-squares slope of `ln y` against `ln t`; returns `−slope`, the
/// decay exponent in `y ≈ C t^{−exponent}`.
pub fn power_law_exponent(t: &[f64], y: &[f64]) -> f64 {
    -slope(&t.iter().map(|v| v.ln()).collect::<Vec<_>>(), &y.iter().map(|v| v.abs().ln()).collect::<Vec<_>>())
}

/// Decay rate `c` in `y ≈ C e^{−c z}` by least squares on `ln y`.
pub fn exponential_rate(z: &[f64], y: &[f64]) -> f64 {
    -slope(z, &y.iter().map(|v| v.abs().ln()).collect::<Vec<_>>())
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_solver::InitialData;
    use crate::grid::Grid;
    use crate::model::Model;

    fn setup() -> (Solver, Modulator, Grid) {
        let m = Model::builtin("sine_gordon").unwrap();
        let solver = Solver::new(m.kink(), 2).unwrap();
        let modulator = Modulator::new(m.kink(), ModulationConfig::default()).unwrap();
        (solver, modulator, Grid::with_spacing(-40.0, 40.0, 0.02).unwrap())
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.2), 1.0);
        assert_eq!(cutoff(0.8), 0.0);
        assert!((cutoff(0.5) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for s in [0.4, 0.5, 0.6] {
            let fd = (cutoff(s + h) - cutoff(s - h)) / (2.0 * h);
            assert!((fd - cutoff_derivative(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn superposition_is_a_fixed_point() {
        let (solver, modulator, grid) = setup();
        let st = solver.initial_data(&InitialData::PairSuperposition { a: 8.0, v_sep: 0.0 }, grid).unwrap();
        for guess in [(-7.7, 7.7), (-6.0, 10.0)] {
            let dec = modulator.decompose(&st, guess).unwrap();
            assert!((dec.x1 + 8.0).abs() < 1e-8 && (dec.x2 - 8.0).abs() < 1e-8, "{guess:?}: {} {}", dec.x1, dec.x2);
            assert!(dec.g.iter().all(|v| v.abs() < 1e-8));
        }
        let guess = initial_guess(&st).unwrap();
        assert!((guess.0 + 8.0).abs() < 0.01 && (guess.1 - 8.0).abs() < 0.01);
        let (f, _) = modulator.frame(&st, guess).unwrap();
        assert_eq!((f.v1, f.v2), (0.0, 0.0));
        assert_eq!((f.p1, f.p2), (0.0, 0.0));
    }

    #[test]
    fn moving_superposition_momenta_match_velocities() {
        let (solver, modulator, grid) = setup();
        let st = solver.initial_data(&InitialData::PairSuperposition { a: 9.0, v_sep: 0.05 }, grid).unwrap();
        let (f, _) = modulator.frame(&st, (-9.0, 9.0)).unwrap();
        // approaching: x1 moves right, x2 left
        assert!((f.v1 - 0.05).abs() < 1e-3 && (f.v2 + 0.05).abs() < 1e-3, "{f:?}");
        // g = 0: only the Gram term ⟨∂ₓH₁, ∂ₓH₂⟩ = O(z e^{−z}) separates them
        assert!((f.p1 - f.v1).abs() < 1e-6 && (f.p2 - f.v2).abs() < 1e-6, "{f:?}");
        assert!(f.p2 < 0.0 && f.p1 > 0.0);
    }

    #[test]
    fn too_close_is_a_regime_error() {
        let (solver, modulator, grid) = setup();
        let st = solver.initial_data(&InitialData::PairSuperposition { a: 2.0, v_sep: 0.0 }, grid).unwrap();
        assert!(matches!(modulator.decompose(&st, (-2.0, 2.0)), Err(Error::Regime(_))));
    }

    #[test]
    fn exponent_helpers() {
        let t: Vec<f64> = (1..20).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|v| 3.0 * v.powf(-1.3)).collect();
        assert!((power_law_exponent(&t, &y) - 1.3).abs() < 1e-12);
        let e: Vec<f64> = t.iter().map(|v| 2.0 * (-0.7 * v).exp()).collect();
        assert!((exponential_rate(&t, &e) - 0.7).abs() < 1e-12);
    }
}
