use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model `{name}`; supported models: {}", supported.join(", "))]
    UnknownModel { name: String, supported: Vec<String> },

    #[error("invalid potential: {condition} violated by {violation:.3e} at phi = {at}")]
    InvalidPotential { condition: String, at: f64, violation: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("accuracy error: {what} (achieved {achieved:.3e})")]
    Accuracy { what: String, achieved: f64 },

    #[error("no convergence in {what} after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { what: String, iterations: usize, residual: f64 },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("CFL condition violated: dt = {dt} exceeds 0.9 * dx = {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("inconsistency: {0}")]
    Inconsistency(String),

    #[error("fit error: {reason}; residual history {history:?}")]
    Fit { reason: String, history: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;
