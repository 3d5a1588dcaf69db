use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 64;

/// Uniform grid `x_i = x_min + i dx`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::Domain(format!("grid needs at least {MIN_POINTS} points, got {n}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Domain(format!("grid needs finite x_min < x_max, got [{x_min}, {x_max}]")));
        }
        Ok(Self { x_min, x_max, n, dx: (x_max - x_min) / (n - 1) as f64 })
    }

    /// Grid whose spacing is `dx` up to rounding of the point count.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::Domain(format!("grid spacing must be positive, got {dx}")));
        }
        let cells = ((x_max - x_min) / dx).round();
        if !(cells >= 1.0) || cells > 1e9 {
            return Err(Error::Domain(format!("grid [{x_min}, {x_max}] with dx = {dx} is unusable")));
        }
        Self::new(x_min, x_max, cells as usize + 1)
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }

    /// Same points shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self { x_min: self.x_min + delta, x_max: self.x_max + delta, ..*self }
    }

    /// Twice as many cells on the same interval.
    pub fn refined(&self) -> Self {
        Self::new(self.x_min, self.x_max, 2 * self.n - 1).expect("refining a valid grid")
    }
}
