//! Finite-dimensional reductions: the separation ODE `z″ = −2F(z)`, the
//! Euler equation `z″ = μ t⁻² z + v`, the coupled trajectory system and the
//! logarithmic separation law fit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interaction::ForceLaw;
use crate::modulation::TrajectoryRecord;
use crate::quadrature::Quadrature;

#[derive(Debug, Clone, Serialize)]
pub struct ReducedSolution {
    pub t_grid: Vec<f64>,
    pub z: Vec<f64>,
    pub dz: Vec<f64>,
    /// `½z′² − 2∫_z^∞F − ∫_{t₀}^t z′v`; constant for exact solutions.
    pub conserved: Vec<f64>,
    /// Size of the individual terms of `conserved` at the start, used to
    /// judge its drift.
    pub energy_scale: f64,
}

impl ReducedSolution {
    /// `max |E(t) − E(t₀)|` over the run, relative to `energy_scale`.
    pub fn conserved_drift(&self) -> f64 {
        let e0 = self.conserved[0];
        let worst = self.conserved.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
        worst / self.energy_scale.max(f64::MIN_POSITIVE)
    }

    pub fn final_state(&self) -> (f64, f64, f64) {
        let n = self.t_grid.len() - 1;
        (self.t_grid[n], self.z[n], self.dz[n])
    }
}

/// RK4 on `z″ = −2F(z)`.
pub fn solve_reduced(force: &dyn ForceLaw, z0: f64, dz0: f64, t0: f64, t_end: f64, dt: f64) -> Result<ReducedSolution> {
    solve_reduced_forced(force, &|_| 0.0, z0, dz0, t0, t_end, dt)
}

/// RK4 on `z″ = −2F(z) + v(t)`. The work `∫ z′v` is integrated alongside so
/// that the reported first integral stays constant.
pub fn solve_reduced_forced(
    force: &dyn ForceLaw,
    v: &dyn Fn(f64) -> f64,
    z0: f64,
    dz0: f64,
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<ReducedSolution> {
    integrate(force, v, z0, dz0, t0, t_end, dt, false).map(|(sol, _)| sol)
}

/// Returns the solution and whether it stopped early because `z′` turned
/// negative (only checked when `stop_on_turn`).
#[allow(clippy::too_many_arguments)]
fn integrate(
    force: &dyn ForceLaw,
    v: &dyn Fn(f64) -> f64,
    z0: f64,
    dz0: f64,
    t0: f64,
    t_end: f64,
    dt: f64,
    stop_on_turn: bool,
) -> Result<(ReducedSolution, bool)> {
    if !(t0 > 0.0) || !(t_end > t0) {
        return Err(Error::Domain(format!("need 0 < t0 < t_end, got t0 = {t0}, t_end = {t_end}")));
    }
    if !(dt > 0.0) || dt > 1e-2 * t0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("dt = {dt} must lie in (0, 1e-2 * t0 = {}]", 1e-2 * t0)));
    }
    if !z0.is_finite() || !dz0.is_finite() {
        return Err(Error::Domain("non-finite initial data".into()));
    }
    let z_min = force.z_min();
    let check = |z: f64, t: f64| -> Result<()> {
        if z < z_min || !z.is_finite() {
            Err(Error::Domain(format!("separation z = {z} left the force law range z >= {z_min} at t = {t}")))
        } else {
            Ok(())
        }
    };
    check(z0, t0)?;

    // state: (z, z′, work)
    let rhs = |t: f64, s: [f64; 3]| -> [f64; 3] {
        let vt = v(t);
        [s[1], -2.0 * force.force(s[0]) + vt, s[1] * vt]
    };
    let energy = |s: [f64; 3]| 0.5 * s[1] * s[1] - 2.0 * force.tail_integral(s[0]) - s[2];

    let steps = ((t_end - t0) / dt).ceil() as usize;
    let h = (t_end - t0) / steps as f64;
    let mut out = ReducedSolution {
        t_grid: Vec::with_capacity(steps + 1),
        z: Vec::with_capacity(steps + 1),
        dz: Vec::with_capacity(steps + 1),
        conserved: Vec::with_capacity(steps + 1),
        energy_scale: 0.5 * dz0 * dz0 + 2.0 * force.tail_integral(z0).abs(),
    };
    let mut s = [z0, dz0, 0.0];
    let push = |out: &mut ReducedSolution, t: f64, s: [f64; 3]| {
        out.t_grid.push(t);
        out.z.push(s[0]);
        out.dz.push(s[1]);
        out.conserved.push(energy(s));
    };
    push(&mut out, t0, s);
    let add = |a: [f64; 3], b: [f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = rhs(t, s);
        let mid = add(s, k1, 0.5 * h);
        check(mid[0], t)?;
        let k2 = rhs(t + 0.5 * h, mid);
        let mid = add(s, k2, 0.5 * h);
        check(mid[0], t)?;
        let k3 = rhs(t + 0.5 * h, mid);
        let end = add(s, k3, h);
        check(end[0], t)?;
        let k4 = rhs(t + h, end);
        for i in 0..3 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = if k + 1 == steps { t_end } else { t0 + (k + 1) as f64 * h };
        check(s[0], t_next)?;
        push(&mut out, t_next, s);
        if stop_on_turn && s[1] < 0.0 {
            return Ok((out, true));
        }
    }
    Ok((out, false))
}

/// Solve `z″ = −2F(z) + v` from `z(t₀) = z0` with the initial velocity chosen
/// so that the first integral vanishes as `t → ∞`, which is the condition for
/// the logarithmic separation law. The velocity is bracketed and bisected:
/// too slow turns back or ends with negative energy, too fast ends with
/// positive energy. The work `∫ z′v` beyond `t_end` is estimated with
/// `z′ ≈ 2/t` and `v ∝ t^{−p}`.
pub fn solve_reduced_threshold(
    force: &dyn ForceLaw,
    v: &dyn Fn(f64) -> f64,
    decay_exponent: f64,
    z0: f64,
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<ReducedSolution> {
    if !(decay_exponent > 0.0) {
        return Err(Error::Domain(format!("decay exponent must be positive, got {decay_exponent}")));
    }
    // ∫_T^∞ (2/s) v(T)(T/s)^p ds
    let tail_work = 2.0 * v(t_end) / decay_exponent;
    // Some(solution) when the trajectory escapes with nonnegative energy.
    let shoot = |dz0: f64| -> Result<Option<ReducedSolution>> {
        let (sol, turned) = integrate(force, v, z0, dz0, t0, t_end, dt, true)?;
        if turned {
            return Ok(None);
        }
        let n = sol.t_grid.len() - 1;
        let e_end = 0.5 * sol.dz[n] * sol.dz[n] - 2.0 * force.tail_integral(sol.z[n]);
        Ok(if e_end + tail_work >= 0.0 { Some(sol) } else { None })
    };
    let mut lo = 0.0;
    let mut hi = (4.0 * force.tail_integral(z0).abs()).sqrt().max(1e-3);
    let mut best = None;
    for _ in 0..60 {
        if let Some(sol) = shoot(hi)? {
            best = Some(sol);
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    let Some(mut best) = best else {
        return Err(Error::NoConvergence { what: "threshold velocity bracket".into(), iterations: 60, residual: hi });
    };
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(best);
        }
        let mid = 0.5 * (lo + hi);
        match shoot(mid)? {
            Some(sol) => {
                hi = mid;
                best = sol;
            }
            None => lo = mid,
        }
    }
    Err(Error::NoConvergence { what: "threshold velocity bisection".into(), iterations: 200, residual: hi - lo })
}

/// A forcing term with a known power decay `|v(t)| ≲ t^{−p}`.
#[derive(Clone, Copy)]
pub struct Forcing<'a> {
    pub f: &'a (dyn Fn(f64) -> f64 + Sync),
    pub decay_exponent: f64,
}

impl<'a> Forcing<'a> {
    pub fn new(f: &'a (dyn Fn(f64) -> f64 + Sync), decay_exponent: f64) -> Self {
        Self { f, decay_exponent }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerSolution {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub dz: Vec<f64>,
    pub d2z: Vec<f64>,
}

/// Exponents `(μ₋, μ₊)` of the homogeneous solutions `t^{μ±}`.
pub fn euler_exponents(mu: f64) -> (f64, f64) {
    let s = (1.0 + 4.0 * mu).sqrt();
    (0.5 * (1.0 - s), 0.5 * (1.0 + s))
}

const TAIL_TOLERANCE: f64 = 1e-10;

/// Decaying particular solution of `z″ = μ t⁻² z + v` sampled at `samples`
/// equally spaced times in `[t0, t_end]`.
pub fn solve_euler(mu: f64, v: Forcing<'_>, t0: f64, t_end: f64, samples: usize) -> Result<EulerSolution> {
    euler_with(mu, &|t| (v.f)(t), v.decay_exponent, t0, t_end, samples)
}

fn euler_with(mu: f64, v: &(dyn Fn(f64) -> f64 + Sync), p: f64, t0: f64, t_end: f64, samples: usize) -> Result<EulerSolution> {
    if !(mu >= 0.0) {
        return Err(Error::Domain(format!("mu must be nonnegative, got {mu}")));
    }
    if !(t0 > 0.0) || !(t_end > t0) || samples < 2 {
        return Err(Error::Domain(format!("need 0 < t0 < t_end and at least 2 samples, got [{t0}, {t_end}], {samples}")));
    }
    let (mm, mp) = euler_exponents(mu);
    if !(p > mp + 1.0) {
        return Err(Error::Domain(format!(
            "forcing decay exponent {p} must exceed mu_plus + 1 = {} for the tail integrals to converge",
            mp + 1.0
        )));
    }
    let t_max = 100.0 * t_end;
    let quad = Quadrature::new(1e-300, 1e-13);

    // Tails beyond T_max under the monomial model v(s) ≈ v(T)(T/s)^p. The
    // model error is bounded by how much the amplitude estimate moves
    // between T/2 and T.
    let amp = v(t_max) * t_max.powf(p);
    let amp_half = v(0.5 * t_max) * (0.5 * t_max).powf(p);
    let monomial_tail = |e: f64, c: f64| c * t_max.powf(e - p + 1.0) / (p - e - 1.0);
    let tail_p = monomial_tail(mp, amp);
    let tail_m = monomial_tail(mm, amp);
    let spread = (amp - amp_half).abs();
    let bound = |t: f64| t.powf(mm) * monomial_tail(mp, spread).abs() + t.powf(mp) * monomial_tail(mm, spread).abs();
    let tail_err = bound(t0).max(bound(t_end));
    if !(tail_err <= TAIL_TOLERANCE) {
        return Err(Error::Accuracy { what: format!("Euler tail integrals beyond T_max = {t_max}"), achieved: tail_err });
    }

    let ts: Vec<f64> = (0..samples)
        .map(|i| if i + 1 == samples { t_end } else { t0 + (t_end - t0) * i as f64 / (samples - 1) as f64 })
        .collect();

    // ∫_t^{T_max} s^e v ds accumulated backward, with log-spaced panels
    // between t_end and T_max.
    let integral = |e: f64| -> Result<Vec<f64>> {
        let g = |s: f64| s.powf(e) * v(s);
        let mut far = 0.0;
        let panels = 64;
        let ratio = (t_max / t_end).powf(1.0 / panels as f64);
        let mut a = t_end;
        for _ in 0..panels {
            let b = a * ratio;
            far += quad.integrate(&g, a, b.min(t_max))?.0;
            a = b;
        }
        let mut acc = vec![0.0; samples];
        acc[samples - 1] = far;
        for i in (0..samples - 1).rev() {
            acc[i] = acc[i + 1] + quad.integrate(&g, ts[i], ts[i + 1])?.0;
        }
        Ok(acc)
    };
    let ip: Vec<f64> = integral(mp)?.into_iter().map(|x| x + tail_p).collect();
    let im: Vec<f64> = integral(mm)?.into_iter().map(|x| x + tail_m).collect();

    let norm = 1.0 / (1.0 + 4.0 * mu).sqrt();
    let mut out = EulerSolution { t: ts.clone(), z: vec![0.0; samples], dz: vec![0.0; samples], d2z: vec![0.0; samples] };
    for i in 0..samples {
        let t = ts[i];
        let z = norm * (t.powf(mm) * ip[i] - t.powf(mp) * im[i]);
        out.z[i] = z;
        out.dz[i] = norm * (mm * t.powf(mm - 1.0) * ip[i] - mp * t.powf(mp - 1.0) * im[i]);
        out.d2z[i] = mu * z / (t * t) + v(t);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupledSolution {
    pub t: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

/// `y₁″ = t⁻²(y₁ − y₂) + f₁`, `y₂″ = t⁻²(y₂ − y₁) + f₂`, decoupled into
/// `z₁ = y₂ + y₁` (μ = 0) and `z₂ = y₂ − y₁` (μ = 2).
pub fn solve_coupled(f1: Forcing<'_>, f2: Forcing<'_>, t0: f64, t_end: f64, samples: usize) -> Result<CoupledSolution> {
    let p = f1.decay_exponent.min(f2.decay_exponent);
    let sum = |t: f64| (f2.f)(t) + (f1.f)(t);
    let diff = |t: f64| (f2.f)(t) - (f1.f)(t);
    let z1 = channel(0.0, &sum, p, t0, t_end, samples)?;
    let z2 = channel(2.0, &diff, p, t0, t_end, samples)?;
    Ok(CoupledSolution {
        t: z1.t,
        y1: z1.z.iter().zip(&z2.z).map(|(a, b)| 0.5 * (a - b)).collect(),
        y2: z1.z.iter().zip(&z2.z).map(|(a, b)| 0.5 * (a + b)).collect(),
    })
}

// A channel whose forcing vanishes on a dense log grid out to T_max is taken
// as identically zero, so equal forcings do not need to clear the μ = 2 decay
// requirement.
fn channel(mu: f64, v: &(dyn Fn(f64) -> f64 + Sync), p: f64, t0: f64, t_end: f64, samples: usize) -> Result<EulerSolution> {
    let probes = 4096;
    let ratio = (100.0 * t_end / t0).powf(1.0 / probes as f64);
    if t0 > 0.0 && t_end > t0 && samples >= 2 && (0..=probes).all(|i| v(t0 * ratio.powi(i as i32)) == 0.0) {
        let t: Vec<f64> = (0..samples)
            .map(|i| if i + 1 == samples { t_end } else { t0 + (t_end - t0) * i as f64 / (samples - 1) as f64 })
            .collect();
        let zeros = vec![0.0; samples];
        return Ok(EulerSolution { t, z: zeros.clone(), dz: zeros.clone(), d2z: zeros });
    }
    euler_with(mu, v, p, t0, t_end, samples)
}

/// Anything that carries a time series of the right kink position.
pub trait SeparationSeries {
    /// `(t, x₂)` samples.
    fn separation_series(&self) -> (Vec<f64>, Vec<f64>);
}

impl SeparationSeries for TrajectoryRecord {
    fn separation_series(&self) -> (Vec<f64>, Vec<f64>) {
        self.frames.iter().map(|f| (f.t, f.x2)).unzip()
    }
}

impl SeparationSeries for ReducedSolution {
    /// A symmetric pair sits at `±z/2`.
    fn separation_series(&self) -> (Vec<f64>, Vec<f64>) {
        (self.t_grid.clone(), self.z.iter().map(|z| 0.5 * z).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLawFit {
    pub a_hat: f64,
    pub t0_hat: f64,
    pub rms_residual: f64,
    pub curvature_inv_sqrt: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub iterations: usize,
}

/// Residuals `x_i − c^{−1/2} log(A(t_i − t₀))`.
pub fn log_law_residuals(t: &[f64], x: &[f64], curvature: f64, a: f64, t0: f64) -> Vec<f64> {
    let s = curvature.sqrt().recip();
    t.iter().zip(x).map(|(&t, &x)| x - s * (a * (t - t0)).ln()).collect()
}

/// Jacobian rows `(∂r/∂A, ∂r/∂t₀)` of [`log_law_residuals`].
pub fn log_law_jacobian(t: &[f64], curvature: f64, a: f64, t0: f64) -> Vec<[f64; 2]> {
    let s = curvature.sqrt().recip();
    t.iter().map(|&t| [-s / a, s / (t - t0)]).collect()
}

const FIT_MIN_SAMPLES: usize = 20;
const FIT_MAX_ITERATIONS: usize = 100;

pub fn fit_log_law(series: &dyn SeparationSeries, curvature: f64, window: (f64, f64)) -> Result<LogLawFit> {
    let (t, x) = series.separation_series();
    fit_log_law_samples(&t, &x, curvature, window)
}

/// Gauss–Newton fit of `x(t) ≈ c^{−1/2} log(Â(t − t̂₀))` on `window`.
pub fn fit_log_law_samples(t: &[f64], x: &[f64], curvature: f64, window: (f64, f64)) -> Result<LogLawFit> {
    if t.len() != x.len() {
        return Err(Error::Domain(format!("{} times but {} positions", t.len(), x.len())));
    }
    if !(curvature > 0.0) {
        return Err(Error::Domain(format!("curvature must be positive, got {curvature}")));
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("fit window [{lo}, {hi}] must be a positive interval")));
    }
    if t.first().map_or(true, |&t0| t0 > lo + 1e-9) || t.last().map_or(true, |&t1| t1 < hi - 1e-9) {
        return Err(Error::Domain(format!("fit window [{lo}, {hi}] is not covered by the data")));
    }
    let (tw, xw): (Vec<f64>, Vec<f64>) =
        t.iter().zip(x).filter(|(&t, _)| t >= lo - 1e-9 && t <= hi + 1e-9).map(|(&t, &x)| (t, x)).unzip();
    if tw.len() < FIT_MIN_SAMPLES {
        return Err(Error::Domain(format!("fit window holds {} samples, need {FIT_MIN_SAMPLES}", tw.len())));
    }
    let sc = curvature.sqrt();
    let seed = tw.iter().zip(&xw).map(|(t, x)| x * sc - t.ln()).sum::<f64>() / tw.len() as f64;
    let mut a = seed.exp();
    let mut t0 = 0.0;
    let ssq = |a: f64, t0: f64| log_law_residuals(&tw, &xw, curvature, a, t0).iter().map(|r| r * r).sum::<f64>();
    let mut cost = ssq(a, t0);
    let mut history = vec![(cost / tw.len() as f64).sqrt()];
    let t_first = tw[0];

    for it in 1..=FIT_MAX_ITERATIONS {
        let r = log_law_residuals(&tw, &xw, curvature, a, t0);
        let jac = log_law_jacobian(&tw, curvature, a, t0);
        let (mut m00, mut m01, mut m11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (j, r) in jac.iter().zip(&r) {
            m00 += j[0] * j[0];
            m01 += j[0] * j[1];
            m11 += j[1] * j[1];
            g0 += j[0] * r;
            g1 += j[1] * r;
        }
        let det = m00 * m11 - m01 * m01;
        if !(det.abs() > 1e-300) {
            return Err(Error::Fit { reason: "singular normal equations".into(), history });
        }
        let da = -(m11 * g0 - m01 * g1) / det;
        let dt0 = -(m00 * g1 - m01 * g0) / det;

        // Damp until the model stays defined and the cost does not grow.
        let mut lambda = 1.0;
        let (mut na, mut nt0, mut ncost) = (a, t0, cost);
        for _ in 0..60 {
            na = a + lambda * da;
            nt0 = t0 + lambda * dt0;
            if na > 0.0 && nt0 < t_first {
                ncost = ssq(na, nt0);
                if ncost <= cost * (1.0 + 1e-12) {
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !(na > 0.0 && nt0 < t_first) {
            return Err(Error::Fit { reason: "step could not keep A > 0 and t0 below the window".into(), history });
        }
        let small = (na - a).abs() <= 1e-13 * a && (nt0 - t0).abs() <= 1e-11 * (1.0 + t0.abs());
        a = na;
        t0 = nt0;
        cost = ncost;
        history.push((cost / tw.len() as f64).sqrt());
        if small {
            return Ok(LogLawFit {
                a_hat: a,
                t0_hat: t0,
                rms_residual: (cost / tw.len() as f64).sqrt(),
                curvature_inv_sqrt: 1.0 / sc,
                window,
                samples: tw.len(),
                iterations: it,
            });
        }
    }
    Err(Error::Fit { reason: format!("Gauss-Newton did not converge in {FIT_MAX_ITERATIONS} iterations"), history })
}

/// Discrete weighted norms of a sampled `z` on an increasing grid:
/// `N_γ = max t^γ |z(t)|` and `W_{α,β} = max_{t<τ} t^{β−α} |∫_t^τ s^α z ds|`.
pub fn norm_diagnostics(t: &[f64], z: &[f64], gamma: f64, alpha: f64, beta: f64) -> (f64, f64) {
    let n = t.len().min(z.len());
    if n == 0 {
        return (0.0, 0.0);
    }
    let n_gamma = (0..n).map(|i| t[i].powf(gamma) * z[i].abs()).fold(0.0, f64::max);
    let mut cum = vec![0.0; n];
    for i in 1..n {
        let a = t[i - 1].powf(alpha) * z[i - 1];
        let b = t[i].powf(alpha) * z[i];
        cum[i] = cum[i - 1] + 0.5 * (a + b) * (t[i] - t[i - 1]);
    }
    let mut w: f64 = 0.0;
    let (mut hi, mut lo) = (cum[n - 1], cum[n - 1]);
    for i in (0..n).rev() {
        hi = hi.max(cum[i]);
        lo = lo.min(cum[i]);
        let spread = (hi - cum[i]).max(cum[i] - lo);
        w = w.max(t[i].powf(beta - alpha) * spread);
    }
    (n_gamma, w)
}
