use std::path::Path;
use std::sync::OnceLock;

use anyhow::{anyhow, Context, Result};
use kinklab_core::asymptotic_ode::{
    fit_log_law, fit_log_law_samples, solve_reduced_forced, solve_reduced_threshold, LogLawFit, ReducedSolution,
};
use kinklab_core::field_solver::{sg_exact_pair, EnergyObserver, FieldState, FnObserver, InitialData, Solver};
use kinklab_core::interaction::{constant_a, constant_a_from_tail, force};
use kinklab_core::linearization::{coercivity_check, spectrum_report, Background, DiscreteOperator};
use kinklab_core::modulation::{exponential_rate, initial_guess, ModulationConfig, ModulationObserver, Modulator, TrajectoryRecord};
use kinklab_core::{compute_kappa, ExponentialForce, ForceLaw, ForceTable, Grid, Model};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::*;
use crate::output::{plot_script, Cell, Output};

/// What a command works on. The model is built on first use.
pub struct Ctx {
    pub spec: ModelSpec,
    pub seed: u64,
    model: OnceLock<Model>,
}

impl Ctx {
    pub fn new(spec: ModelSpec, seed: u64) -> Self {
        Self { spec, seed, model: OnceLock::new() }
    }

    pub fn model(&self) -> Result<&Model> {
        if let Some(m) = self.model.get() {
            return Ok(m);
        }
        let m = self.spec.build()?;
        Ok(self.model.get_or_init(|| m))
    }

    fn model_name(&self) -> String {
        match &self.spec {
            ModelSpec::Builtin(n) => n.clone(),
            ModelSpec::Polynomial(p) => p.name.clone(),
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

pub fn constants(ctx: &Ctx, out: &mut Output) -> Result<Value> {
    let m = ctx.model()?;
    let p = m.profile();
    let c = p.constants()?;
    let phys = m.kink().constants()?;
    let u = m.potential();
    let report = json!({
        "model": ctx.model_name(),
        "kappa": compute_kappa(m.normalized_potential())?,
        "kappa_tail": p.tail_kappa(12.0, 14.0)?,
        "A": constant_a(m.normalized_potential(), p)?,
        "A_tail": constant_a_from_tail(p)?,
        "mass": c.mass,
        "energy": c.energy,
        "physical": {
            "phi_plus": u.phi_plus(),
            "curvature": u.curvature(),
            "x_scale": m.kink().x_scale(),
            "phi_scale": m.kink().phi_scale(),
            "mass": phys.mass,
            "energy": phys.energy,
        },
    });
    out.json("constants.json", &report)?;
    Ok(report)
}

pub fn profile(ctx: &Ctx, p: &ProfileParams, out: &mut Output) -> Result<Value> {
    let m = ctx.model()?;
    let kink = match p.units {
        Units::Normalized => m.normalized_kink(),
        Units::Physical => m.kink(),
    };
    let grid = Grid::with_spacing(p.x_min, p.x_max, p.dx)?;
    out.csv(
        "profile.csv",
        &["x", "H", "dH", "d2H"],
        grid.points().into_iter().map(|x| [x, kink.eval(x, 0), kink.eval(x, 1), kink.eval(x, 2)].map(Cell::F)),
    )?;
    out.text("plot.py", &plot_script("profile.csv", "x", &["H", "dH", "d2H"], "kink profile"))?;
    Ok(json!({ "points": grid.n }))
}

pub fn force_table(ctx: &Ctx, p: &ForceParams, out: &mut Output) -> Result<Value> {
    let m = ctx.model()?;
    let kink = m.normalized_kink();
    let a = constant_a(m.normalized_potential(), m.profile())?;
    let zs = linspace(p.z_min, p.z_max, p.nodes);
    let f: Vec<f64> = zs.par_iter().map(|&z| force(&kink, z)).collect::<kinklab_core::Result<_>>()?;
    let rows: Vec<[Cell; 4]> = zs
        .iter()
        .zip(&f)
        .map(|(&z, &f)| {
            let asym = a * a * (-z).exp();
            [z, f, asym, f / asym].map(Cell::F)
        })
        .collect();
    out.csv("force.csv", &["z", "F", "A2_exp_minus_z", "ratio"], rows)?;
    out.text("plot.py", &plot_script("force.csv", "z", &["ratio"], "F(z) e^z / A^2"))?;
    Ok(json!({ "A": a, "nodes": p.nodes }))
}

pub fn spectrum(ctx: &Ctx, p: &SpectrumParams, out: &mut Output) -> Result<Value> {
    let kink = ctx.model()?.kink();
    let bg = match p.background {
        BackgroundSpec::Single { center } => Background::SingleKink { center },
        BackgroundSpec::Pair { x1, x2 } => Background::Pair { x1, x2 },
    };
    let report = spectrum_report(&kink, bg, p.domain, p.dx, p.stencil, p.k)?;
    let mut value = serde_json::to_value(&report)?;
    if p.coercivity_trials > 0 {
        let op = DiscreteOperator::assemble(&kink, bg, Grid::with_spacing(p.domain.0, p.domain.1, p.dx)?, p.stencil)?;
        let c = coercivity_check(&op, &kink, bg, p.coercivity_trials, ctx.seed)?;
        value["coercivity"] = serde_json::to_value(c)?;
    }
    out.json("spectrum.json", &value)?;
    Ok(value)
}

struct SeriesRow {
    t: f64,
    e: kinklab_core::field_solver::Energy,
    pos: Option<(f64, f64)>,
}

fn series_row(solver: &Solver, state: &FieldState) -> SeriesRow {
    SeriesRow { t: state.t, e: solver.energy(state), pos: initial_guess(state).ok() }
}

pub fn evolve(ctx: &Ctx, p: &EvolveParams, out: &mut Output) -> Result<Value> {
    let solver = Solver::new(ctx.model()?.kink(), p.stencil)?;
    let grid = Grid::with_spacing(p.grid.x_min, p.grid.x_max, p.grid.dx)?;
    let mut state = solver.initial_data(&p.initial, grid)?;
    let mut rows = vec![series_row(&solver, &state)];
    let mut snaps = vec![state.clone()];
    let mut seen = 0usize;
    let result = {
        let mut obs = FnObserver(|s: &Solver, st: &FieldState| {
            rows.push(series_row(s, st));
            seen += 1;
            if p.snapshot_every > 0 && seen % p.snapshot_every == 0 {
                snaps.push(st.clone());
            }
            Ok(())
        });
        solver.evolve(&mut state, p.t_end, p.dt(), p.stride, &mut [&mut obs])
    };
    if snaps.last().map(|s| s.t) != Some(state.t) {
        snaps.push(state.clone());
    }

    let e0 = rows[0].e.total;
    out.csv(
        "series.csv",
        &["t", "E_k", "E_p", "E", "x1", "x2"],
        rows.iter().map(|r| {
            [
                Cell::F(r.t),
                Cell::F(r.e.kinetic),
                Cell::F(r.e.potential),
                Cell::F(r.e.total),
                r.pos.map(|p| p.0).into(),
                r.pos.map(|p| p.1).into(),
            ]
        }),
    )?;
    out.csv("snapshots/times.csv", &["index", "t"], snaps.iter().enumerate().map(|(i, s)| [Cell::U(i), Cell::F(s.t)]))?;
    for (i, s) in snaps.iter().enumerate() {
        out.csv(
            &format!("snapshots/snap_{i:04}.csv"),
            &["x", "phi", "pi"],
            (0..s.grid.n).map(|j| [s.grid.x(j), s.phi[j], s.pi[j]].map(Cell::F)),
        )?;
    }
    out.text("plot.py", &plot_script("series.csv", "t", &["E", "x1", "x2"], "evolution"))?;
    let steps = result?;
    let drift = rows.iter().map(|r| (r.e.total - e0).abs()).fold(0.0, f64::max) / e0.abs();
    Ok(json!({ "steps": steps, "t_end": state.t, "E0": e0, "relative_drift": drift, "snapshots": snaps.len() }))
}

fn track(kink: kinklab_core::Kink, p: &EvolveParams, cfg: ModulationConfig, t_start: Option<f64>) -> Result<(TrajectoryRecord, Result<usize>)> {
    let solver = Solver::new(kink.clone(), p.stencil)?;
    let grid = Grid::with_spacing(p.grid.x_min, p.grid.x_max, p.grid.dx)?;
    let mut state = solver.initial_data(&p.initial, grid)?;
    let t_start = t_start.unwrap_or(state.t);
    let mut obs = ModulationObserver::new(Modulator::new(kink, cfg)?, None, t_start);
    if t_start <= state.t {
        // the initial state is a frame too
        use kinklab_core::field_solver::Observer;
        obs.observe(&solver, &state)?;
    }
    let r = solver.evolve(&mut state, p.t_end, p.dt(), p.stride, &mut [&mut obs]).map_err(anyhow::Error::from);
    Ok((obs.into_record(), r))
}

fn modulate_rows(record: &TrajectoryRecord) -> Vec<[Cell; 10]> {
    record
        .frames
        .iter()
        .zip(&record.energies)
        .map(|(f, e)| [f.t, f.x1, f.x2, f.z(), f.v1, f.v2, f.p1, f.p2, f.g_norm_h1, e.total].map(Cell::F))
        .collect()
}

const MODULATE_HEADER: [&str; 10] = ["t", "x1", "x2", "z", "v1", "v2", "p1", "p2", "g_h1", "E"];

pub fn modulate(ctx: &Ctx, p: &ModulateParams, out: &mut Output) -> Result<Value> {
    let m = ctx.model()?;
    let kink = m.kink();
    let scale = kink.x_scale();
    let (record, run) = track(kink, &p.evolve, p.modulation, p.t_start)?;
    out.csv("modulate.csv", &MODULATE_HEADER, modulate_rows(&record))?;
    out.text("plot.py", &plot_script("modulate.csv", "t", &["x1", "x2", "p1", "p2"], "modulation parameters"))?;

    // |z′ − p| against the normalized separation
    let (zn, gap): (Vec<f64>, Vec<f64>) = record
        .frames
        .iter()
        .map(|f| (scale * f.z(), ((f.v2 - f.v1) - (f.p2 - f.p1)).abs()))
        .filter(|&(_, g)| g > 0.0)
        .unzip();
    let rate = (zn.len() >= 3).then(|| exponential_rate(&zn, &gap));
    let mut summary = json!({
        "frames": record.frames.len(),
        "complete": record.is_complete(),
        "failure": record.failure,
        "velocity_gap_rate": rate,
    });
    run?;
    if p.fit {
        let t_end = p.evolve.t_end;
        let w = p.fit_window.unwrap_or((0.25 * t_end, t_end));
        summary["fit"] = fit_json(&fit_log_law(&record, m.potential().curvature(), w)?);
    }
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn fit_json(fit: &LogLawFit) -> Value {
    json!({
        "A_hat": fit.a_hat,
        "t0_hat": fit.t0_hat,
        "rms": fit.rms_residual,
        "window": [fit.window.0, fit.window.1],
        "samples": fit.samples,
        "iterations": fit.iterations,
    })
}

pub fn reduced_ode(ctx: &Ctx, p: &ReducedParams, out: &mut Output) -> Result<Value> {
    let law: Box<dyn ForceLaw> = match p.force {
        ForceSpec::Exponential { a: Some(a) } => Box::new(ExponentialForce::new(a)),
        ForceSpec::Exponential { a: None } => {
            let m = ctx.model()?;
            Box::new(ExponentialForce::new(constant_a(m.normalized_potential(), m.profile())?))
        }
        ForceSpec::Table { z_min, z_max, nodes } => {
            let m = ctx.model()?;
            let a = constant_a(m.normalized_potential(), m.profile())?;
            Box::new(ForceTable::build(&m.normalized_kink(), a, z_min, z_max, nodes)?)
        }
    };
    let forcing = p.forcing;
    let v = move |t: f64| forcing.map_or(0.0, |f| f.amplitude * t.powf(-f.exponent));
    let sol: ReducedSolution = match p.dz0 {
        Some(dz0) => solve_reduced_forced(law.as_ref(), &v, p.z0, dz0, p.t0, p.t_end, p.dt)?,
        None => {
            let decay = forcing.map_or(3.0, |f| f.exponent);
            solve_reduced_threshold(law.as_ref(), &v, decay, p.z0, p.t0, p.t_end, p.dt)?
        }
    };
    out.csv(
        "reduced.csv",
        &["t", "z", "dz", "conserved"],
        (0..sol.t_grid.len()).map(|i| [sol.t_grid[i], sol.z[i], sol.dz[i], sol.conserved[i]].map(Cell::F)),
    )?;
    out.text("plot.py", &plot_script("reduced.csv", "t", &["z", "dz"], "reduced ODE"))?;
    let n = sol.t_grid.len() - 1;
    let mut summary = json!({
        "dz0": sol.dz[0],
        "conserved_drift": sol.conserved_drift(),
        "energy_scale": sol.energy_scale,
        "final": { "t": sol.t_grid[n], "z": sol.z[n], "dz": sol.dz[n] },
    });
    if p.fit {
        let w = p.fit_window.unwrap_or(((0.1 * p.t_end).max(p.t0), p.t_end));
        summary["fit"] = fit_json(&fit_log_law(&sol, 1.0, w)?);
    }
    out.json("summary.json", &summary)?;
    Ok(summary)
}

/// Reads `t` and `column` from a CSV with a header row; rows with an
/// empty `column` are skipped.
pub fn read_series(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| invalid(format!("{} has no `{name}` column (columns: {})", path.display(), headers.iter().collect::<Vec<_>>().join(","))))
    };
    let (it, ix) = (find("t")?, find(column)?);
    let (mut t, mut x) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let (ts, xs) = (rec.get(it).unwrap_or("").trim(), rec.get(ix).unwrap_or("").trim());
        if xs.is_empty() {
            continue;
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| anyhow!("{} row {}: `{s}`: {e}", path.display(), line + 2));
        t.push(parse(ts)?);
        x.push(parse(xs)?);
    }
    Ok((t, x))
}

pub fn fit(ctx: &Ctx, p: &FitParams, explicit_model: bool, out: &mut Output) -> Result<Value> {
    let input = p.input.as_ref().expect("validated");
    let (t, x) = read_series(input, &p.column)?;
    if t.is_empty() {
        return Err(invalid(format!("{} has no samples in column `{}`", input.display(), p.column)));
    }
    let curvature = match p.curvature {
        Some(c) => c,
        None if explicit_model => ctx.model()?.potential().curvature(),
        None => 1.0,
    };
    let window = p.window.unwrap_or((t[0], t[t.len() - 1]));
    let fit = fit_log_law_samples(&t, &x, curvature, window)?;
    let mut value = fit_json(&fit);
    value["curvature"] = json!(curvature);
    out.json("fit.json", &value)?;
    Ok(value)
}

struct Check {
    name: &'static str,
    value: f64,
    threshold: &'static str,
    pass: bool,
}

struct SgRun {
    error: f64,
    drift: f64,
    e0: f64,
}

fn sg_run(solver: &Solver, dx: f64, dt: f64) -> Result<SgRun> {
    let grid = Grid::with_spacing(-40.0, 40.0, dx)?;
    let mut state = solver.initial_data(&InitialData::SgExactPair { t0: 1.0 }, grid)?;
    let e0 = solver.energy(&state).total;
    let mut energy = EnergyObserver::default();
    solver.evolve(&mut state, 20.0, dt, 20, &mut [&mut energy])?;
    Ok(SgRun { error: state.sup_error(|x| sg_exact_pair(20.0, x).0), drift: energy.relative_drift(e0), e0 })
}

/// Closed-form sine-Gordon checks: evolution error and its convergence,
/// energy conservation, and the tracked log law of the right kink.
pub fn verify_sg(ctx: &Ctx, p: &VerifyParams, out: &mut Output) -> Result<(Value, bool)> {
    if ctx.spec != ModelSpec::Builtin("sine_gordon".into()) {
        return Err(invalid("verify-sg runs on the builtin sine_gordon model only"));
    }
    let kink = ctx.model()?.kink();
    let solver = Solver::new(kink.clone(), 2)?;
    let tracked = EvolveParams {
        initial: InitialData::SgExactPair { t0: 1.0 },
        grid: GridSpec { x_min: -55.0, x_max: 55.0, dx: p.dx },
        dt: Some(p.dt),
        t_end: 40.0,
        stencil: 2,
        stride: ((0.1 / p.dt).round() as usize).max(1),
        snapshot_every: 0,
    };
    let cfg = ModulationConfig { z0: 2.0, ..ModulationConfig::default() };
    let ((coarse, fine), tracked) = rayon::join(
        || rayon::join(|| sg_run(&solver, p.dx, p.dt), || sg_run(&solver, 0.5 * p.dx, 0.5 * p.dt)),
        || track(kink.clone(), &tracked, cfg, Some(2.0)),
    );
    let (coarse, fine) = (coarse?, fine?);
    let (record, run) = tracked?;
    out.csv("modulate.csv", &MODULATE_HEADER, modulate_rows(&record))?;
    out.text("plot.py", &plot_script("modulate.csv", "t", &["x2", "v2", "p2"], "sine-Gordon exact pair"))?;
    run?;

    let gap = record.frames.iter().filter(|f| f.t >= 10.0 - 1e-9).map(|f| (f.x2 - (2.0 * f.t).ln()).abs()).fold(0.0, f64::max);
    let fit = fit_log_law(&record, 1.0, (10.0, 40.0))?;
    let at20 = record
        .frames
        .iter()
        .min_by(|a, b| (a.t - 20.0).abs().total_cmp(&(b.t - 20.0).abs()))
        .map_or(f64::NAN, |f| f.v2 * f.t);
    let ratio = coarse.error / fine.error;
    let checks = [
        Check { name: "sup_error_t20", value: coarse.error, threshold: "<= 1e-3", pass: coarse.error <= 1e-3 },
        Check { name: "halving_ratio", value: ratio, threshold: ">= 3.5", pass: ratio >= 3.5 },
        Check { name: "energy_drift", value: coarse.drift, threshold: "<= 1e-5", pass: coarse.drift <= 1e-5 },
        Check { name: "energy_total", value: coarse.e0, threshold: "16 +- 1e-3", pass: (coarse.e0 - 16.0).abs() <= 1e-3 },
        Check { name: "x2_log_law_gap", value: gap, threshold: "<= 0.05 on [10, 40]", pass: gap <= 0.05 },
        Check { name: "A_hat", value: fit.a_hat, threshold: "2 within 2%", pass: (fit.a_hat / 2.0 - 1.0).abs() <= 0.02 },
        Check { name: "v2_t_at_20", value: at20, threshold: "1 +- 0.03", pass: (at20 - 1.0).abs() <= 0.03 },
    ];
    let pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "pass": pass,
        "dx": p.dx,
        "dt": p.dt,
        "checks": checks.iter().map(|c| json!({"name": c.name, "value": c.value, "threshold": c.threshold, "pass": c.pass})).collect::<Vec<_>>(),
    });
    out.json("verify.json", &report)?;
    Ok((report, pass))
}
