//! Python bindings. Arrays cross the boundary as lists of floats; structured
//! results come back as dicts.

use kinklab_core::asymptotic_ode::{fit_log_law_samples, solve_reduced_forced, solve_reduced_threshold, ReducedSolution};
use kinklab_core::field_solver::{self, FieldState, FnObserver, InitialData, Solver};
use kinklab_core::interaction::{self, constant_a};
use kinklab_core::linearization::{spectrum_report, Background};
use kinklab_core::{compute_kappa, ExponentialForce, Grid, Potential};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: kinklab_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Round-trips a serializable value through `json.loads`.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A double-well model: a builtin name or ascending polynomial coefficients.
#[pyclass(name = "Model", frozen)]
struct PyModel(kinklab_core::Model);

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (name, coefficients=None))]
    fn new(name: &str, coefficients: Option<Vec<f64>>) -> PyResult<Self> {
        let m = match coefficients {
            None => kinklab_core::Model::builtin(name),
            Some(c) => Potential::polynomial(name, c).and_then(|u| {
                kinklab_core::Model::new(u, kinklab_core::kink_profile::DEFAULT_X_MAX, kinklab_core::kink_profile::DEFAULT_NODES)
            }),
        };
        m.map(PyModel).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.potential().name().to_string()
    }

    #[getter]
    fn phi_plus(&self) -> f64 {
        self.0.potential().phi_plus()
    }

    #[getter]
    fn curvature(&self) -> f64 {
        self.0.potential().curvature()
    }

    /// `U` and its first three derivatives at `phi`, in the model's units.
    fn potential(&self, phi: f64) -> (f64, f64, f64, f64) {
        let u = self.0.potential();
        (u.u(phi), u.du(phi), u.d2u(phi), u.d3u(phi))
    }

    fn kappa(&self) -> PyResult<f64> {
        compute_kappa(self.0.normalized_potential()).map_err(err)
    }

    /// The tail amplitude of the normalized kink.
    fn constant_a(&self) -> PyResult<f64> {
        constant_a(self.0.normalized_potential(), self.0.profile()).map_err(err)
    }

    /// Kink mass and energy in the model's units.
    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.kink().constants().map_err(err)?)
    }

    /// Derivative `order` of the kink at each `x`.
    #[pyo3(signature = (x, order=0, normalized=true))]
    fn kink(&self, x: Vec<f64>, order: usize, normalized: bool) -> Vec<f64> {
        let k = if normalized { self.0.normalized_kink() } else { self.0.kink() };
        x.into_iter().map(|x| k.eval(x, order)).collect()
    }

    /// Interaction force of the normalized pair at each separation.
    fn force(&self, py: Python<'_>, z: Vec<f64>) -> PyResult<Vec<f64>> {
        let k = self.0.normalized_kink();
        py.detach(|| z.into_iter().map(|z| interaction::force(&k, z)).collect::<kinklab_core::Result<_>>())
            .map_err(err)
    }

    #[pyo3(signature = (dx=0.02, domain=(-40.0, 40.0), stencil=2, k=4, pair=None))]
    fn spectrum<'py>(
        &self,
        py: Python<'py>,
        dx: f64,
        domain: (f64, f64),
        stencil: u8,
        k: usize,
        pair: Option<(f64, f64)>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let bg = match pair {
            Some((x1, x2)) => Background::Pair { x1, x2 },
            None => Background::SingleKink { center: 0.0 },
        };
        let kink = self.0.kink();
        let report = py.detach(|| spectrum_report(&kink, bg, domain, dx, stencil, k)).map_err(err)?;
        to_py(py, &report)
    }

    /// Evolves `initial`, a dict such as `{"kind": "sg_exact_pair", "t0": 1}`,
    /// on `[x_min, x_max]` and returns the energy series and final field.
    #[pyo3(signature = (initial, x_min, x_max, dx, t_end, dt=None, stencil=2, stride=10))]
    #[allow(clippy::too_many_arguments)]
    fn evolve<'py>(
        &self,
        py: Python<'py>,
        initial: &Bound<'py, PyAny>,
        x_min: f64,
        x_max: f64,
        dx: f64,
        t_end: f64,
        dt: Option<f64>,
        stencil: u8,
        stride: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let text: String = py.import("json")?.call_method1("dumps", (initial,))?.extract()?;
        let data: InitialData = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("initial: {e}")))?;
        let solver = Solver::new(self.0.kink(), stencil).map_err(err)?;
        let grid = Grid::with_spacing(x_min, x_max, dx).map_err(err)?;
        let (rows, state) = py
            .detach(|| -> kinklab_core::Result<_> {
                let mut state = solver.initial_data(&data, grid)?;
                let mut rows = vec![(state.t, solver.energy(&state))];
                let mut obs = FnObserver(|s: &Solver, st: &FieldState| {
                    rows.push((st.t, s.energy(st)));
                    Ok(())
                });
                solver.evolve(&mut state, t_end, dt.unwrap_or(0.5 * dx), stride, &mut [&mut obs])?;
                Ok((rows, state))
            })
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("t", rows.iter().map(|r| r.0).collect::<Vec<_>>())?;
        d.set_item("E_k", rows.iter().map(|r| r.1.kinetic).collect::<Vec<_>>())?;
        d.set_item("E_p", rows.iter().map(|r| r.1.potential).collect::<Vec<_>>())?;
        d.set_item("E", rows.iter().map(|r| r.1.total).collect::<Vec<_>>())?;
        d.set_item("x", state.grid.points())?;
        d.set_item("phi", state.phi)?;
        d.set_item("pi", state.pi)?;
        Ok(d)
    }
}

fn reduced_dict<'py>(py: Python<'py>, sol: ReducedSolution) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("conserved_drift", sol.conserved_drift())?;
    d.set_item("t", sol.t_grid)?;
    d.set_item("z", sol.z)?;
    d.set_item("dz", sol.dz)?;
    d.set_item("conserved", sol.conserved)?;
    Ok(d)
}

/// Integrates `z'' = -2 A² e^{-z} + amplitude t^{-exponent}`. Without `dz0`
/// the initial velocity is the escape threshold.
#[pyfunction]
#[pyo3(signature = (z0, t0, t_end, dz0=None, a=2.0, dt=1e-3, amplitude=0.0, exponent=3.0))]
#[allow(clippy::too_many_arguments)]
fn reduced_ode<'py>(
    py: Python<'py>,
    z0: f64,
    t0: f64,
    t_end: f64,
    dz0: Option<f64>,
    a: f64,
    dt: f64,
    amplitude: f64,
    exponent: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let force = ExponentialForce::new(a);
    let v = move |t: f64| amplitude * t.powf(-exponent);
    let sol = py
        .detach(|| match dz0 {
            Some(dz0) => solve_reduced_forced(&force, &v, z0, dz0, t0, t_end, dt),
            None => solve_reduced_threshold(&force, &v, exponent, z0, t0, t_end, dt),
        })
        .map_err(err)?;
    reduced_dict(py, sol)
}

/// Fits `x(t) ≈ log(A (t - t0)) / sqrt(curvature)` on `window`.
#[pyfunction]
#[pyo3(signature = (t, x, window, curvature=1.0))]
fn fit_log_law<'py>(py: Python<'py>, t: Vec<f64>, x: Vec<f64>, window: (f64, f64), curvature: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &fit_log_law_samples(&t, &x, curvature, window).map_err(err)?)
}

/// `(phi, dphi/dt)` of the exact sine-Gordon kink-antikink pair.
#[pyfunction]
fn sg_exact_pair(t: f64, x: f64) -> (f64, f64) {
    field_solver::sg_exact_pair(t, x)
}

#[pymodule]
fn kinklab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(reduced_ode, m)?)?;
    m.add_function(wrap_pyfunction!(fit_log_law, m)?)?;
    m.add_function(wrap_pyfunction!(sg_exact_pair, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
