//! Natural cubic spline on increasing knots.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::Domain(format!("spline needs >= 3 matching knots, got {} and {}", n, y.len())));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("spline knots must be strictly increasing".into()));
        }
        // tridiagonal solve for the interior second derivatives (Thomas algorithm)
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Self { x, y, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    /// Value and first derivative. Outside the knots the end cubic is
    /// continued linearly (natural boundary).
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        if t <= self.x[0] || t >= self.x[n - 1] {
            let i = if t <= self.x[0] { 0 } else { n - 1 };
            let (_, slope) = self.interior(if i == 0 { 0 } else { n - 2 }, self.x[i]);
            return (self.y[i] + slope * (t - self.x[i]), slope);
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        self.interior(i, t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }

    fn interior(&self, i: usize, t: f64) -> (f64, f64) {
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dv = (self.y[i + 1] - self.y[i]) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (v, dv)
    }
}
