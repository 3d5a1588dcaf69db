//! Run configuration: a JSON file with shared fields and a per-command
//! `params` object. Every level rejects unknown keys.

use std::fmt;
use std::path::{Path, PathBuf};

use kinklab_core::field_solver::{InitialData, CFL_LIMIT};
use kinklab_core::modulation::ModulationConfig;
use kinklab_core::{Error, Model, Potential};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Bad input. Reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    Profile,
    Force,
    Spectrum,
    Evolve,
    Modulate,
    ReducedOde,
    Fit,
    VerifySg,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Profile => "profile",
            Command::Force => "force",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Modulate => "modulate",
            Command::ReducedOde => "reduced-ode",
            Command::Fit => "fit",
            Command::VerifySg => "verify-sg",
        }
    }
}

/// A builtin name or a polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Builtin(String),
    Polynomial(PolynomialSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSpec {
    pub name: String,
    pub coefficients: Vec<f64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Builtin("sine_gordon".into())
    }
}

impl ModelSpec {
    pub fn build(&self) -> anyhow::Result<Model> {
        let r = match self {
            ModelSpec::Builtin(name) => Model::builtin(name),
            ModelSpec::Polynomial(p) => Potential::polynomial(&p.name, p.coefficients.clone())
                .and_then(|u| Model::new(u, kinklab_core::kink_profile::DEFAULT_X_MAX, kinklab_core::kink_profile::DEFAULT_NODES)),
        };
        r.map_err(|e| match e {
            Error::UnknownModel { .. } | Error::InvalidPotential { .. } => invalid(format!("model: {e}")),
            e => e.into(),
        })
    }
}

/// The file format behind `--config`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Value>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    /// Command-specific parameters, defaulted when absent.
    pub fn params<T: DeserializeOwned + Default>(&self) -> anyhow::Result<T> {
        match &self.params {
            None => Ok(T::default()),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| invalid(format!("params: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl GridSpec {
    fn validate(&self) -> anyhow::Result<()> {
        if !(self.dx > 0.0) || !(self.x_max > self.x_min) {
            return Err(invalid(format!("grid: need x_min < x_max and dx > 0, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Normalized,
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub units: Units,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self { x_min: -10.0, x_max: 10.0, dx: 0.01, units: Units::Normalized }
    }
}

impl ProfileParams {
    pub fn validate(&self) -> anyhow::Result<()> {
        GridSpec { x_min: self.x_min, x_max: self.x_max, dx: self.dx }.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceParams {
    pub z_min: f64,
    pub z_max: f64,
    pub nodes: usize,
}

impl Default for ForceParams {
    fn default() -> Self {
        Self { z_min: 4.0, z_max: 20.0, nodes: 33 }
    }
}

impl ForceParams {
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.z_max > self.z_min) || self.nodes < 2 {
            return Err(invalid(format!("need z_min < z_max and nodes >= 2, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundSpec {
    Single { center: f64 },
    Pair { x1: f64, x2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    pub dx: f64,
    pub domain: (f64, f64),
    pub stencil: u8,
    /// Upper bound on the number of reported eigenvalues.
    pub k: usize,
    pub background: BackgroundSpec,
    /// Random trials of the coercivity check; pair backgrounds only.
    pub coercivity_trials: usize,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            dx: 0.02,
            domain: (-40.0, 40.0),
            stencil: 2,
            k: 4,
            background: BackgroundSpec::Single { center: 0.0 },
            coercivity_trials: 0,
        }
    }
}

impl SpectrumParams {
    pub fn validate(&self) -> anyhow::Result<()> {
        GridSpec { x_min: self.domain.0, x_max: self.domain.1, dx: self.dx }.validate()?;
        if self.stencil != 2 && self.stencil != 4 {
            return Err(invalid(format!("stencil must be 2 or 4, got {}", self.stencil)));
        }
        if self.k == 0 {
            return Err(invalid("k must be positive"));
        }
        if self.coercivity_trials > 0 && self.coercivity_trials < 100 {
            return Err(invalid(format!("coercivity_trials must be 0 or at least 100, got {}", self.coercivity_trials)));
        }
        if self.coercivity_trials > 0 && matches!(self.background, BackgroundSpec::Single { .. }) {
            return Err(invalid("coercivity_trials needs a pair background"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveParams {
    pub initial: InitialData,
    pub grid: GridSpec,
    /// Defaults to `dx / 2`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub stencil: u8,
    /// Steps between rows of the time series.
    pub stride: usize,
    /// Observations between snapshots; 0 keeps only the first and last.
    pub snapshot_every: usize,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            initial: InitialData::PairSuperposition { a: 8.0, v_sep: 0.0 },
            grid: GridSpec { x_min: -40.0, x_max: 40.0, dx: 0.02 },
            dt: None,
            t_end: 20.0,
            stencil: 2,
            stride: 50,
            snapshot_every: 0,
        }
    }
}

impl EvolveParams {
    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(0.5 * self.grid.dx)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.grid.validate()?;
        let dt = self.dt();
        let limit = CFL_LIMIT * self.grid.dx;
        if !(dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if dt > limit {
            return Err(invalid(format!("dt: {}", Error::Cfl { dt, limit })));
        }
        if self.stencil != 2 && self.stencil != 4 {
            return Err(invalid(format!("stencil must be 2 or 4, got {}", self.stencil)));
        }
        if self.stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        if let InitialData::SgExactPair { t0 } = self.initial {
            if !(self.t_end > t0) {
                return Err(invalid(format!("t_end = {} must exceed the initial time {t0}", self.t_end)));
            }
        } else if !(self.t_end > 0.0) {
            return Err(invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulateParams {
    pub evolve: EvolveParams,
    pub modulation: ModulationConfig,
    /// Frames before this time are skipped.
    pub t_start: Option<f64>,
    pub fit: bool,
    /// Window of the log-law fit on `x₂`; defaults to `[t_end/4, t_end]`.
    pub fit_window: Option<(f64, f64)>,
}

impl Default for ModulateParams {
    fn default() -> Self {
        let evolve = EvolveParams {
            initial: InitialData::SgExactPair { t0: 1.0 },
            grid: GridSpec { x_min: -55.0, x_max: 55.0, dx: 0.01 },
            dt: Some(0.005),
            t_end: 40.0,
            stencil: 2,
            stride: 20,
            snapshot_every: 0,
        };
        Self {
            evolve,
            modulation: ModulationConfig { z0: 2.0, ..ModulationConfig::default() },
            t_start: Some(2.0),
            fit: true,
            fit_window: None,
        }
    }
}

impl ModulateParams {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.evolve.validate()?;
        if !(self.modulation.z0 > 0.0) || !(self.modulation.tolerance > 0.0) || self.modulation.max_iterations == 0 {
            return Err(invalid(format!("modulation: need z0 > 0, tolerance > 0, max_iterations > 0, got {:?}", self.modulation)));
        }
        validate_window(self.fit_window)
    }
}

fn validate_window(w: Option<(f64, f64)>) -> anyhow::Result<()> {
    match w {
        Some((a, b)) if !(b > a) => Err(invalid(format!("fit_window must be increasing, got ({a}, {b})"))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceSpec {
    /// `A²e^{−z}`; `a` defaults to the model's tail constant.
    Exponential { a: Option<f64> },
    /// Tabulated force of the model's normalized kink.
    Table { z_min: f64, z_max: f64, nodes: usize },
}

/// `v(t) = amplitude · t^{−exponent}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerForcing {
    pub amplitude: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedParams {
    pub force: ForceSpec,
    pub z0: f64,
    /// Initial `z′`; when absent the threshold value is found by shooting.
    pub dz0: Option<f64>,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub forcing: Option<PowerForcing>,
    pub fit: bool,
    /// Defaults to `[t_end/10, t_end]`, clipped below at `t0`.
    pub fit_window: Option<(f64, f64)>,
}

impl Default for ReducedParams {
    fn default() -> Self {
        Self {
            force: ForceSpec::Exponential { a: None },
            z0: 2.0 * 2f64.ln(),
            dz0: None,
            t0: 1.0,
            t_end: 200.0,
            dt: 1e-3,
            forcing: None,
            fit: true,
            fit_window: None,
        }
    }
}

impl ReducedParams {
    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.t0 > 0.0) || !(self.t_end > self.t0) || !(self.dt > 0.0) {
            return Err(invalid(format!("need 0 < t0 < t_end and dt > 0, got t0 = {}, t_end = {}, dt = {}", self.t0, self.t_end, self.dt)));
        }
        if let ForceSpec::Table { z_min, z_max, nodes } = self.force {
            if !(z_max > z_min) || nodes < 4 {
                return Err(invalid(format!("force table: need z_min < z_max and nodes >= 4, got {z_min}, {z_max}, {nodes}")));
            }
        }
        if let Some(f) = self.forcing {
            if !(f.exponent > 0.0) {
                return Err(invalid(format!("forcing exponent must be positive, got {}", f.exponent)));
            }
        }
        validate_window(self.fit_window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitParams {
    pub input: Option<PathBuf>,
    /// Position column fitted against `t`.
    pub column: String,
    /// `U″(φ₊)`; defaults to the model's curvature when a model is given,
    /// else 1.
    pub curvature: Option<f64>,
    /// Defaults to the full time range.
    pub window: Option<(f64, f64)>,
}

impl Default for FitParams {
    fn default() -> Self {
        Self { input: None, column: "x2".into(), curvature: None, window: None }
    }
}

impl FitParams {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.input.is_none() {
            return Err(invalid("fit needs an input CSV (--input)"));
        }
        if let Some(c) = self.curvature {
            if !(c > 0.0) {
                return Err(invalid(format!("curvature must be positive, got {c}")));
            }
        }
        validate_window(self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    pub dx: f64,
    pub dt: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self { dx: 0.01, dt: 0.005 }
    }
}

impl VerifyParams {
    pub fn validate(&self) -> anyhow::Result<()> {
        let limit = CFL_LIMIT * self.dx;
        if !(self.dx > 0.0) || !(self.dt > 0.0) {
            return Err(invalid(format!("dx and dt must be positive, got {} and {}", self.dx, self.dt)));
        }
        if self.dt > limit {
            return Err(invalid(format!("dt: {}", Error::Cfl { dt: self.dt, limit })));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoParams {}
