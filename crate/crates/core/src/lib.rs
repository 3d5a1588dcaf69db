//! Kinks of even double-well scalar field theories, the kink–antikink
//! interaction, the nonlinear wave equation they live in, and the
//! finite-dimensional reductions of strongly interacting pairs.

pub mod asymptotic_ode;
pub mod error;
pub mod field_solver;
pub mod grid;
pub mod interaction;
pub mod kink_profile;
pub mod linearization;
pub mod model;
pub mod modulation;
pub mod potential;
pub mod quadrature;
pub mod spline;

pub use error::{Error, Result};
pub use kink_profile::{compute_g, compute_kappa, Kink, KinkConstants, KinkProfile};
pub use potential::{NormalizationRecord, Potential};
pub use interaction::{ExponentialForce, ForceLaw, ForceTable};
pub use model::Model;
pub use grid::Grid;
