//! Explicit symplectic integration of `φ_tt = φ_xx − U′(φ)` on a truncated
//! line with the field pinned to vacuum values at both ends.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kink_profile::Kink;
use crate::potential::Shape;
use crate::quadrature::trapezoid;

/// Largest allowed `dt/dx`.
pub const CFL_LIMIT: f64 = 0.9;
pub const DEFAULT_CFL: f64 = 0.5;
/// Extra room beyond the light cone required by [`check_padding`].
pub const BOUNDARY_PADDING: f64 = 10.0;
const BLOW_UP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    /// Validates array lengths and the vacuum pinning at both ends.
    pub fn new(grid: Grid, phi: Vec<f64>, pi: Vec<f64>, t: f64, phi_plus: f64) -> Result<Self> {
        if phi.len() != grid.n || pi.len() != grid.n {
            return Err(Error::Domain(format!(
                "state arrays have lengths {} and {}, grid has {} points",
                phi.len(),
                pi.len(),
                grid.n
            )));
        }
        for (end, v) in [("left", phi[0]), ("right", phi[grid.n - 1])] {
            if (v.abs() - phi_plus).abs() > 1e-8 * phi_plus {
                return Err(Error::Domain(format!("{end} boundary value {v} is not a vacuum (±{phi_plus})")));
            }
        }
        let mut s = Self { grid, phi, pi, t };
        s.pin(phi_plus);
        Ok(s)
    }

    fn pin(&mut self, phi_plus: f64) {
        let n = self.grid.n;
        self.phi[0] = phi_plus.copysign(self.phi[0]);
        self.phi[n - 1] = phi_plus.copysign(self.phi[n - 1]);
        self.pi[0] = 0.0;
        self.pi[n - 1] = 0.0;
    }

    /// Same state on a grid shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self { grid: self.grid.shifted(delta), ..self.clone() }
    }

    /// Sup-norm distance of `phi` to `f` sampled on the grid.
    pub fn sup_error<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        (0..self.grid.n).map(|i| (self.phi[i] - f(self.grid.x(i))).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `H(γ(x − a))` moving at speed `v`.
    Kink { a: f64, v: f64 },
    /// `H(−γ(x − a))` moving at speed `v`.
    Antikink { a: f64, v: f64 },
    /// `φ₊ − H(x + a) + H(x − a)` with `∂ₜφ = v_sep(∂ₓH(x + a) + ∂ₓH(x − a))`;
    /// positive `v_sep` moves the kinks towards each other.
    PairSuperposition { a: f64, v_sep: f64 },
    /// The sine-Gordon pair `π − 4 arctan(t/cosh x)` at `t = t0`.
    SgExactPair { t0: f64 },
    Custom { phi: Vec<f64>, pi: Vec<f64> },
}

/// `(φ, ∂ₜφ)` of the sine-Gordon pair at `(t, x)`.
pub fn sg_exact_pair(t: f64, x: f64) -> (f64, f64) {
    let sech = 1.0 / x.abs().cosh();
    let phi = PI - 4.0 * (t * sech).atan();
    let dt = -4.0 * sech / (1.0 + t * t * sech * sech);
    (phi, dt)
}

/// Integrator for one model.
#[derive(Debug, Clone)]
pub struct Solver {
    kink: Kink,
    stencil_order: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

impl Solver {
    pub fn new(kink: Kink, stencil_order: u8) -> Result<Self> {
        if stencil_order != 2 && stencil_order != 4 {
            return Err(Error::Domain(format!("stencil order must be 2 or 4, got {stencil_order}")));
        }
        Ok(Self { kink, stencil_order })
    }

    pub fn kink(&self) -> &Kink {
        &self.kink
    }

    pub fn stencil_order(&self) -> u8 {
        self.stencil_order
    }

    pub fn phi_plus(&self) -> f64 {
        self.kink.phi_plus()
    }

    pub fn initial_data(&self, data: &InitialData, grid: Grid) -> Result<FieldState> {
        let k = &self.kink;
        let pp = self.phi_plus();
        let lorentz = |v: f64| -> Result<f64> {
            if !(v.abs() < 1.0) {
                return Err(Error::Domain(format!("speed must satisfy |v| < 1, got {v}")));
            }
            Ok(1.0 / (1.0 - v * v).sqrt())
        };
        let (phi, pi, t) = match data {
            &InitialData::Kink { a, v } => {
                let g = lorentz(v)?;
                (grid.sample(|x| k.eval(g * (x - a), 0)), grid.sample(|x| -v * g * k.eval(g * (x - a), 1)), 0.0)
            }
            &InitialData::Antikink { a, v } => {
                let g = lorentz(v)?;
                (grid.sample(|x| -k.eval(g * (x - a), 0)), grid.sample(|x| v * g * k.eval(g * (x - a), 1)), 0.0)
            }
            &InitialData::PairSuperposition { a, v_sep } => {
                lorentz(v_sep)?;
                (
                    grid.sample(|x| pp - k.eval(x + a, 0) + k.eval(x - a, 0)),
                    grid.sample(|x| v_sep * (k.eval(x + a, 1) + k.eval(x - a, 1))),
                    0.0,
                )
            }
            &InitialData::SgExactPair { t0 } => {
                let u = k.potential();
                let is_sg = matches!(u.shape(), Shape::SineGordon) && (pp - PI).abs() < 1e-12 && (u.curvature() - 1.0).abs() < 1e-12;
                if !is_sg {
                    return Err(Error::Domain(format!(
                        "the exact pair exists for the unnormalized sine_gordon model only, not `{}`",
                        u.name()
                    )));
                }
                (grid.sample(|x| sg_exact_pair(t0, x).0), grid.sample(|x| sg_exact_pair(t0, x).1), t0)
            }
            InitialData::Custom { phi, pi } => (phi.clone(), pi.clone(), 0.0),
        };
        FieldState::new(grid, phi, pi, t, pp)
    }

    /// `dx² D₂φ` at interior points; boundary entries are zero.
    fn second_difference(&self, phi: &[f64], out: &mut [f64]) {
        let n = phi.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        let (left, right) = (phi[0], phi[n - 1]);
        // ghosts beyond the ends carry the pinned vacuum value
        let at = |i: isize| {
            if i < 0 {
                left
            } else if i >= n as isize {
                right
            } else {
                phi[i as usize]
            }
        };
        match self.stencil_order {
            2 => {
                for i in 1..n - 1 {
                    out[i] = phi[i - 1] - 2.0 * phi[i] + phi[i + 1];
                }
            }
            _ => {
                for i in 1..n - 1 {
                    let ii = i as isize;
                    out[i] = (-at(ii - 2) + 16.0 * phi[i - 1] - 30.0 * phi[i] + 16.0 * phi[i + 1] - at(ii + 2)) / 12.0;
                }
            }
        }
    }

    fn accelerate(&self, state: &FieldState, out: &mut [f64]) {
        self.second_difference(&state.phi, out);
        let inv = 1.0 / (state.grid.dx * state.grid.dx);
        let u = self.kink.potential();
        let n = out.len();
        for i in 1..n - 1 {
            out[i] = out[i] * inv - u.du_stable(state.phi[i]);
        }
    }

    fn check_cfl(&self, grid: &Grid, dt: f64) -> Result<()> {
        let limit = CFL_LIMIT * grid.dx;
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        Ok(())
    }

    fn check_blow_up(&self, state: &FieldState) -> Result<()> {
        let bound = BLOW_UP_FACTOR * self.phi_plus();
        for (i, (&p, &q)) in state.phi.iter().zip(&state.pi).enumerate() {
            if !p.is_finite() || !q.is_finite() || p.abs() > bound {
                return Err(Error::BlowUp {
                    t: state.t,
                    reason: format!("phi = {p}, pi = {q} at x = {}", state.grid.x(i)),
                });
            }
        }
        Ok(())
    }

    /// One velocity-Verlet step.
    pub fn step(&self, state: &mut FieldState, dt: f64) -> Result<()> {
        self.check_cfl(&state.grid, dt)?;
        let mut acc = vec![0.0; state.grid.n];
        self.step_with(state, dt, &mut acc);
        self.check_blow_up(state)
    }

    fn step_with(&self, state: &mut FieldState, dt: f64, acc: &mut [f64]) {
        let n = state.grid.n;
        self.accelerate(state, acc);
        for i in 1..n - 1 {
            state.pi[i] += 0.5 * dt * acc[i];
            state.phi[i] += dt * state.pi[i];
        }
        self.accelerate(state, acc);
        for i in 1..n - 1 {
            state.pi[i] += 0.5 * dt * acc[i];
        }
        state.t += dt;
    }

    /// Kinetic, potential and total energy by trapezoid quadrature with
    /// centered differences for `∂ₓφ` (one-sided at the ends).
    pub fn energy(&self, state: &FieldState) -> Energy {
        let (phi, dx) = (&state.phi, state.grid.dx);
        let n = phi.len();
        let u = self.kink.potential();
        let kin: Vec<f64> = state.pi.iter().map(|p| 0.5 * p * p).collect();
        let pot: Vec<f64> = (0..n)
            .map(|i| {
                let d = if i == 0 {
                    (phi[1] - phi[0]) / dx
                } else if i == n - 1 {
                    (phi[n - 1] - phi[n - 2]) / dx
                } else {
                    (phi[i + 1] - phi[i - 1]) / (2.0 * dx)
                };
                0.5 * d * d + potential_density(u, phi[i])
            })
            .collect();
        let (kinetic, potential) = (trapezoid(&kin, dx), trapezoid(&pot, dx));
        Energy { kinetic, potential, total: kinetic + potential }
    }

    /// Steps to `t_end` with the largest step `≤ dt` that lands on it
    /// exactly; observers see the state after every `stride` steps and after
    /// the final step.
    pub fn evolve(
        &self,
        state: &mut FieldState,
        t_end: f64,
        dt: f64,
        stride: usize,
        observers: &mut [&mut dyn Observer],
    ) -> Result<usize> {
        if !(t_end > state.t) {
            return Err(Error::Domain(format!("t_end = {t_end} must exceed the current time {}", state.t)));
        }
        if stride == 0 {
            return Err(Error::Domain("observer stride must be positive".into()));
        }
        self.check_cfl(&state.grid, dt)?;
        let span = t_end - state.t;
        let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let t0 = state.t;
        let mut acc = vec![0.0; state.grid.n];
        for s in 1..=steps {
            self.step_with(state, h, &mut acc);
            // recompute t from the step count to avoid drift
            state.t = if s == steps { t_end } else { t0 + s as f64 * h };
            if s % stride == 0 || s == steps {
                self.check_blow_up(state)?;
                for o in observers.iter_mut() {
                    o.observe(self, state)?;
                }
            }
        }
        Ok(steps)
    }
}

/// `U(φ)` measured from the nearer vacuum when `|φ|` is close to it.
fn potential_density(u: &crate::potential::Potential, phi: f64) -> f64 {
    if phi.abs() > 0.5 * u.phi_plus() {
        u.u_from_vacuum(u.phi_plus() - phi.abs())
    } else {
        u.u(phi)
    }
}

/// Fails unless `[x_min, x_max]` keeps every kink position plus the light
/// cone of `elapsed` time plus [`BOUNDARY_PADDING`] inside the grid.
pub fn check_padding(grid: &Grid, positions: &[f64], elapsed: f64) -> Result<()> {
    for &p in positions {
        let need = p.abs() + elapsed + BOUNDARY_PADDING;
        if grid.x_max < p + elapsed + BOUNDARY_PADDING || grid.x_min > p - elapsed - BOUNDARY_PADDING {
            return Err(Error::Domain(format!(
                "grid [{}, {}] too small: kink at {p} needs |x| up to {need} over elapsed time {elapsed}",
                grid.x_min, grid.x_max
            )));
        }
    }
    Ok(())
}

pub trait Observer {
    fn observe(&mut self, solver: &Solver, state: &FieldState) -> Result<()>;
}

/// Records `(t, E_k, E_p, E)` at each observation.
#[derive(Debug, Clone, Default)]
pub struct EnergyObserver {
    pub series: Vec<(f64, Energy)>,
}

impl Observer for EnergyObserver {
    fn observe(&mut self, solver: &Solver, state: &FieldState) -> Result<()> {
        self.series.push((state.t, solver.energy(state)));
        Ok(())
    }
}

impl EnergyObserver {
    /// `max |E(t) − E(t₀)| / |E(t₀)|` against a reference energy.
    pub fn relative_drift(&self, reference: f64) -> f64 {
        self.series.iter().map(|(_, e)| (e.total - reference).abs()).fold(0.0, f64::max) / reference.abs()
    }
}

/// Keeps full copies of the state.
#[derive(Debug, Clone, Default)]
pub struct SnapshotObserver {
    pub snapshots: Vec<FieldState>,
}

impl Observer for SnapshotObserver {
    fn observe(&mut self, _solver: &Solver, state: &FieldState) -> Result<()> {
        self.snapshots.push(state.clone());
        Ok(())
    }
}

/// Any closure over the state.
pub struct FnObserver<F: FnMut(&Solver, &FieldState) -> Result<()>>(pub F);

impl<F: FnMut(&Solver, &FieldState) -> Result<()>> Observer for FnObserver<F> {
    fn observe(&mut self, solver: &Solver, state: &FieldState) -> Result<()> {
        (self.0)(solver, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    fn sg() -> Solver {
        Solver::new(Model::builtin("sine_gordon").unwrap().kink(), 2).unwrap()
    }

    #[test]
    fn exact_pair_at_time_zero() {
        let s = sg();
        let grid = Grid::with_spacing(-20.0, 20.0, 0.05).unwrap();
        let st = s.initial_data(&InitialData::SgExactPair { t0: 0.0 }, grid).unwrap();
        assert!(st.phi.iter().all(|&p| (p - PI).abs() < 1e-15));
        for i in 0..grid.n {
            let x = grid.x(i);
            let expect = if i == 0 || i == grid.n - 1 { 0.0 } else { -4.0 / x.cosh() };
            assert!((st.pi[i] - expect).abs() < 1e-14);
        }
        let e = s.energy(&st);
        assert!((e.total - 16.0).abs() < 1e-4, "{e:?}");
    }

    #[test]
    fn phi4_kink_data() {
        let s = Solver::new(Model::builtin("phi4").unwrap().kink(), 2).unwrap();
        let grid = Grid::with_spacing(-30.0, 30.0, 0.05).unwrap();
        let st = s.initial_data(&InitialData::Kink { a: 0.0, v: 0.0 }, grid).unwrap();
        assert!(st.sup_error(|x| (x / 2f64.sqrt()).tanh()) < 1e-8);
        assert!(st.pi.iter().all(|&p| p == 0.0));
        assert!(matches!(s.initial_data(&InitialData::Kink { a: 0.0, v: 1.0 }, grid), Err(Error::Domain(_))));
        assert!(matches!(s.initial_data(&InitialData::SgExactPair { t0: 1.0 }, grid), Err(Error::Domain(_))));
    }

    #[test]
    fn superposition_midpoint() {
        let s = sg();
        let grid = Grid::with_spacing(-40.0, 40.0, 0.05).unwrap();
        let st = s.initial_data(&InitialData::PairSuperposition { a: 10.0, v_sep: 0.0 }, grid).unwrap();
        let mid = st.phi[grid.n / 2];
        assert!((mid + PI).abs() < 8.0 * (-10.0f64).exp(), "{mid}");
    }

    #[test]
    fn vacuum_is_invariant() {
        let s = sg();
        let grid = Grid::with_spacing(-10.0, 10.0, 0.05).unwrap();
        let mut st = FieldState::new(grid, vec![PI; grid.n], vec![0.0; grid.n], 0.0, PI).unwrap();
        let start = st.clone();
        for _ in 0..100 {
            s.step(&mut st, 0.025).unwrap();
        }
        assert_eq!(st.phi, start.phi);
        assert_eq!(st.pi, start.pi);
    }

    #[test]
    fn cfl_and_blow_up() {
        let s = sg();
        let grid = Grid::with_spacing(-30.0, 30.0, 0.05).unwrap();
        let mut st = s.initial_data(&InitialData::Kink { a: 0.0, v: 0.0 }, grid).unwrap();
        assert!(matches!(s.step(&mut st, 0.05), Err(Error::Cfl { .. })));
        let short = Grid::with_spacing(-10.0, 10.0, 0.05).unwrap();
        assert!(matches!(s.initial_data(&InitialData::Kink { a: 0.0, v: 0.0 }, short), Err(Error::Domain(_))));
        st.phi[50] = f64::NAN;
        assert!(matches!(s.step(&mut st, 0.01), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn stride_beyond_run_gives_one_observation() {
        let s = sg();
        let grid = Grid::with_spacing(-20.0, 20.0, 0.05).unwrap();
        let mut st = s.initial_data(&InitialData::Kink { a: 0.0, v: 0.0 }, grid).unwrap();
        let mut obs = EnergyObserver::default();
        let steps = s.evolve(&mut st, 1.0, 0.02, 10_000, &mut [&mut obs]).unwrap();
        assert_eq!(steps, 50);
        assert_eq!(obs.series.len(), 1);
        assert_eq!(obs.series[0].0, 1.0);
        assert_eq!(st.t, 1.0);
    }

    #[test]
    fn padding_rule() {
        let grid = Grid::with_spacing(-40.0, 40.0, 0.05).unwrap();
        assert!(check_padding(&grid, &[-4.0, 4.0], 19.0).is_ok());
        assert!(check_padding(&grid, &[-4.0, 4.0], 30.0).is_err());
    }
}
