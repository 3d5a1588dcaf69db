//! Finite-difference discretizations of `L = −∂ₓ² + U″(H)` and of the pair
//! operator `L_X = −∂ₓ² + U″(φ₊ − H₁ + H₂)`, with a banded symmetric
//! eigensolver and the coercivity experiment on the pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kink_profile::Kink;
use crate::quadrature::inner;

/// Normalized lengths the grid must extend beyond the background.
pub const OPERATOR_PADDING: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Background {
    SingleKink { center: f64 },
    Pair { x1: f64, x2: f64 },
}

impl Background {
    pub fn eval(&self, kink: &Kink, x: f64) -> f64 {
        match *self {
            Background::SingleKink { center } => kink.eval(x - center, 0),
            Background::Pair { x1, x2 } => kink.phi_plus() - kink.eval(x - x1, 0) + kink.eval(x - x2, 0),
        }
    }

    fn extent(&self) -> (f64, f64) {
        match *self {
            Background::SingleKink { center } => (center, center),
            Background::Pair { x1, x2 } => (x1, x2),
        }
    }
}

/// Second-difference weights `w₀, w₁, w₂` of the centered stencil (before `1/dx²`).
fn stencil(order: u8) -> &'static [f64] {
    match order {
        2 => &[-2.0, 1.0],
        _ => &[-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0],
    }
}

/// `D₂v` with zero values outside the grid (Dirichlet).
pub fn second_difference(v: &[f64], dx: f64, order: u8, out: &mut [f64]) {
    let w = stencil(order);
    let n = v.len();
    let inv = 1.0 / (dx * dx);
    let at = |i: isize| if i < 0 || i >= n as isize { 0.0 } else { v[i as usize] };
    for i in 0..n {
        let mut s = w[0] * v[i];
        for (k, wk) in w.iter().enumerate().skip(1) {
            let ii = i as isize;
            s += wk * (at(ii - k as isize) + at(ii + k as isize));
        }
        out[i] = s * inv;
    }
}

/// `−D₂ + diag(U″(background))` on a uniform grid with zero Dirichlet data.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteOperator {
    grid: Grid,
    diagonal: Vec<f64>,
    stencil_order: u8,
}

impl DiscreteOperator {
    pub fn assemble(kink: &Kink, background: Background, grid: Grid, stencil_order: u8) -> Result<Self> {
        if stencil_order != 2 && stencil_order != 4 {
            return Err(Error::Domain(format!("stencil order must be 2 or 4, got {stencil_order}")));
        }
        let (lo, hi) = background.extent();
        if hi < lo {
            return Err(Error::Domain("pair background needs x2 >= x1".into()));
        }
        let pad = OPERATOR_PADDING / kink.x_scale();
        if grid.x_min > lo - pad || grid.x_max < hi + pad {
            return Err(Error::Domain(format!(
                "grid [{}, {}] must extend {pad} beyond the background [{lo}, {hi}]",
                grid.x_min, grid.x_max
            )));
        }
        let u = kink.potential();
        let diagonal = grid.sample(|x| u.d2u(background.eval(kink, x)));
        Ok(Self { grid, diagonal, stencil_order })
    }

    /// Operator from explicit potential samples.
    pub fn from_diagonal(grid: Grid, diagonal: Vec<f64>, stencil_order: u8) -> Result<Self> {
        if diagonal.len() != grid.n || (stencil_order != 2 && stencil_order != 4) {
            return Err(Error::Domain("diagonal length or stencil order does not fit the grid".into()));
        }
        Ok(Self { grid, diagonal, stencil_order })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn stencil_order(&self) -> u8 {
        self.stencil_order
    }

    pub fn bandwidth(&self) -> usize {
        stencil(self.stencil_order).len() - 1
    }

    /// Entry `(i, i + k)` for `k ≤ bandwidth`.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        let w = stencil(self.stencil_order)[k] / (self.grid.dx * self.grid.dx);
        if k == 0 {
            self.diagonal[i] - w
        } else {
            -w
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        second_difference(v, self.grid.dx, self.stencil_order, &mut out);
        out.iter_mut().zip(v).zip(&self.diagonal).for_each(|((o, vi), d)| *o = d * vi - *o);
        out
    }

    /// `⟨u, v⟩` with the trapezoid weights of the grid.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        inner(u, v, self.grid.dx)
    }

    /// `⟨v, v⟩ + ⟨D⁺v, D⁺v⟩` with forward differences (zero beyond the ends).
    pub fn h1_norm_sq(&self, v: &[f64]) -> f64 {
        let dx = self.grid.dx;
        let n = v.len();
        let mut grad = 0.0;
        for i in 0..n {
            let next = if i + 1 < n { v[i + 1] } else { 0.0 };
            grad += (next - v[i]).powi(2);
        }
        self.inner(v, v) + grad / dx
    }

    /// `⟨v, Lv⟩ / ‖v‖²_{H¹}`.
    pub fn quotient(&self, v: &[f64]) -> f64 {
        self.inner(v, &self.apply(v)) / self.h1_norm_sq(v)
    }

    /// `D`-pivots of `A − σI = L D Lᵀ`, computed without pivoting; returns the
    /// pivots and the unit lower band (row-major, `bandwidth` entries per row).
    fn ldl(&self, sigma: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.n;
        let b = self.bandwidth();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n * b];
        // l[j*b + (m-1)] = L(j, j - m)
        let tiny = f64::EPSILON * (self.entry(0, 0).abs() + 4.0 / (self.grid.dx * self.grid.dx));
        for i in 0..n {
            let mut di = self.entry(i, 0) - sigma;
            for m in 1..=b.min(i) {
                let lim = l[i * b + m - 1];
                di -= lim * lim * d[i - m];
            }
            if di.abs() < tiny {
                di = -tiny;
            }
            d[i] = di;
            for k in 1..=b {
                let j = i + k;
                if j >= n {
                    break;
                }
                // A(j, i) − Σ_{k' < i} L(j,k') L(i,k') D(k')
                let mut s = self.entry(i, k);
                for m in 1..=b {
                    if m > i {
                        break;
                    }
                    let kk = i - m;
                    if j - kk > b {
                        continue;
                    }
                    s -= l[j * b + (j - kk) - 1] * l[i * b + m - 1] * d[kk];
                }
                l[j * b + k - 1] = s / di;
            }
        }
        (d, l)
    }

    /// Number of eigenvalues below `sigma` (Sylvester inertia).
    pub fn count_below(&self, sigma: f64) -> usize {
        self.ldl(sigma).0.iter().filter(|&&p| p < 0.0).count()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let b = self.bandwidth();
        let off: f64 = (1..=b).map(|k| 2.0 * self.entry(0, k).abs()).sum();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..self.grid.n {
            let c = self.entry(i, 0);
            lo = lo.min(c - off);
            hi = hi.max(c + off);
        }
        (lo, hi)
    }

    /// The `k` smallest eigenvalues by bisection on the inertia count.
    pub fn spectrum(&self, k: usize) -> Result<Vec<f64>> {
        if k == 0 || k > 10 {
            return Err(Error::Domain(format!("spectrum computes 1..=10 eigenvalues, got {k}")));
        }
        let (lo0, hi0) = self.gershgorin();
        (0..k)
            .into_par_iter()
            .map(|j| {
                let (mut lo, mut hi) = (lo0, hi0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.count_below(mid) > j {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
                        return Ok(0.5 * (lo + hi));
                    }
                }
                Err(Error::Accuracy { what: format!("eigenvalue {j} bisection"), achieved: hi - lo })
            })
            .collect()
    }

    /// Eigenvector for an isolated eigenvalue `lambda` by inverse iteration,
    /// normalized in the discrete `L²` norm with a positive largest entry.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.grid.n;
        let b = self.bandwidth();
        let shift = lambda - 1e-9 * (1.0 + lambda.abs());
        let (d, l) = self.ldl(shift);
        let solve = |rhs: &mut [f64]| {
            for i in 0..n {
                for m in 1..=b.min(i) {
                    rhs[i] -= l[i * b + m - 1] * rhs[i - m];
                }
            }
            for i in 0..n {
                rhs[i] /= d[i];
            }
            for i in (0..n).rev() {
                for m in 1..=b {
                    if i + m < n {
                        rhs[i] -= l[(i + m) * b + m - 1] * rhs[i + m];
                    }
                }
            }
        };
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        let mut change = f64::INFINITY;
        for _ in 0..20 {
            solve(&mut v);
            let norm = self.inner(&v, &v).sqrt();
            let big = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            let s = big.signum() / norm;
            let prev = v.clone();
            v.iter_mut().for_each(|x| *x *= s);
            change = v.iter().zip(&prev).map(|(a, b)| (a - b * s).abs()).fold(0.0, f64::max);
            let residual: f64 = {
                let lv = self.apply(&v);
                lv.iter().zip(&v).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max)
            };
            if residual <= 1e-6 * (1.0 + lambda.abs()) {
                return Ok(v);
            }
        }
        Err(Error::Accuracy { what: format!("inverse iteration at {lambda}"), achieved: change })
    }
}

/// `(2^p λ_fine − λ_coarse)/(2^p − 1)` entry by entry.
pub fn richardson(coarse: &[f64], fine: &[f64], order: u8) -> Vec<f64> {
    let r = 2f64.powi(order as i32);
    coarse.iter().zip(fine).map(|(c, f)| (r * f - c) / (r - 1.0)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub dx: f64,
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub continuum_edge: f64,
    /// `sup |L ∂ₓH|` on the fine grid (single-kink background only).
    pub zero_mode_residual: Option<f64>,
}

/// Eigenvalues below the continuum edge on grids of spacing `dx` and `dx/2`,
/// extrapolated. At most `k` values are reported.
pub fn spectrum_report(
    kink: &Kink,
    background: Background,
    domain: (f64, f64),
    dx: f64,
    stencil_order: u8,
    k: usize,
) -> Result<SpectrumReport> {
    let coarse_grid = Grid::with_spacing(domain.0, domain.1, dx)?;
    let fine_grid = coarse_grid.refined();
    let coarse_op = DiscreteOperator::assemble(kink, background, coarse_grid, stencil_order)?;
    let fine_op = DiscreteOperator::assemble(kink, background, fine_grid, stencil_order)?;
    let edge = kink.potential().curvature();
    let (coarse, fine) = rayon::join(|| coarse_op.spectrum(k), || fine_op.spectrum(k));
    let (coarse, fine) = (coarse?, fine?);
    let below = fine.iter().filter(|&&l| l < edge).count().max(1);
    let coarse = coarse[..below].to_vec();
    let fine = fine[..below].to_vec();
    let eigenvalues = richardson(&coarse, &fine, stencil_order);
    let zero_mode_residual = match background {
        Background::SingleKink { center } => Some(kernel_residual(&fine_op, kink, center)),
        Background::Pair { .. } => None,
    };
    Ok(SpectrumReport { dx, coarse, fine, eigenvalues, continuum_edge: edge, zero_mode_residual })
}

/// `sup |L ∂ₓH(· − center)|` for an operator on the kink background at `center`.
pub fn kernel_residual(op: &DiscreteOperator, kink: &Kink, center: f64) -> f64 {
    let v = op.grid().sample(|x| kink.eval(x - center, 1));
    op.apply(&v).iter().fold(0.0, |a, r| a.max(r.abs()))
}

/// Removes the components along `∂ₓH₁`, `∂ₓH₂` in the discrete inner product.
pub fn project_out_translations(op: &DiscreteOperator, kink: &Kink, x1: f64, x2: f64, v: &mut [f64]) {
    let e1 = op.grid().sample(|x| kink.eval(x - x1, 1));
    let e2 = op.grid().sample(|x| kink.eval(x - x2, 1));
    let (g11, g12, g22) = (op.inner(&e1, &e1), op.inner(&e1, &e2), op.inner(&e2, &e2));
    let (b1, b2) = (op.inner(&e1, v), op.inner(&e2, v));
    let det = g11 * g22 - g12 * g12;
    let c1 = (b1 * g22 - b2 * g12) / det;
    let c2 = (b2 * g11 - b1 * g12) / det;
    for (i, x) in v.iter_mut().enumerate() {
        *x -= c1 * e1[i] + c2 * e2[i];
    }
}

/// Random smooth test function: a sum of Gaussian bumps over the pair region.
#[derive(Debug, Clone)]
pub struct RandomBumps {
    bumps: Vec<(f64, f64, f64)>,
}

impl RandomBumps {
    pub fn draw<R: Rng>(rng: &mut R, lo: f64, hi: f64, scale: f64) -> Self {
        let count = rng.gen_range(1..=6);
        let bumps = (0..count)
            .map(|_| {
                let c = rng.gen_range(lo..hi);
                let w = scale * rng.gen_range(0.5..4.0);
                let a: f64 = rng.sample(StandardNormal);
                (c, w, a)
            })
            .collect();
        Self { bumps }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.bumps.iter().map(|&(c, w, a)| a * (-((x - c) / w).powi(2)).exp()).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub trials: usize,
    pub seed: u64,
    pub min_quotient: f64,
    pub mean_quotient: f64,
}

/// Minimum of `⟨v, L_X v⟩/‖v‖²_{H¹}` over random `v ⊥ ∂ₓH₁, ∂ₓH₂`.
pub fn coercivity_check(op: &DiscreteOperator, kink: &Kink, background: Background, trials: usize, seed: u64) -> Result<CoercivityReport> {
    let Background::Pair { x1, x2 } = background else {
        return Err(Error::Domain("coercivity check needs a pair background".into()));
    };
    let s = kink.x_scale();
    if (x2 - x1) * s < 20.0 {
        return Err(Error::Domain(format!("coercivity check needs separation >= 20, got {}", x2 - x1)));
    }
    if trials < 100 {
        return Err(Error::Domain(format!("coercivity check needs at least 100 trials, got {trials}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = 5.0 / s;
    let draws: Vec<RandomBumps> = (0..trials).map(|_| RandomBumps::draw(&mut rng, x1 - reach, x2 + reach, 1.0 / s)).collect();
    let quotients: Vec<f64> = draws
        .par_iter()
        .map(|f| {
            let mut v = op.grid().sample(|x| f.eval(x));
            project_out_translations(op, kink, x1, x2, &mut v);
            op.quotient(&v)
        })
        .collect();
    let min_quotient = quotients.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_quotient = quotients.iter().sum::<f64>() / trials as f64;
    Ok(CoercivityReport { trials, seed, min_quotient, mean_quotient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    fn phi4_op(dx: f64, order: u8) -> (Model, DiscreteOperator) {
        let m = Model::builtin("phi4").unwrap();
        let grid = Grid::with_spacing(-40.0, 40.0, dx).unwrap();
        let op = DiscreteOperator::assemble(&m.kink(), Background::SingleKink { center: 0.0 }, grid, order).unwrap();
        (m, op)
    }

    #[test]
    fn operator_is_symmetric() {
        let (_, op) = phi4_op(0.05, 4);
        let u = op.grid().sample(|x| (-x * x / 50.0).exp() * x.sin());
        let v = op.grid().sample(|x| (-x * x / 30.0).exp() * (2.0 * x).cos());
        let (a, b) = (op.inner(&u, &op.apply(&v)), op.inner(&op.apply(&u), &v));
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{a} {b}");
    }

    #[test]
    fn kernel_residual_converges_at_stencil_order() {
        for (order, lo, hi) in [(2u8, 3.5, 4.5), (4, 12.0, 20.0)] {
            let m = Model::builtin("phi4").unwrap();
            let r = |dx: f64| {
                let grid = Grid::with_spacing(-40.0, 40.0, dx).unwrap();
                let op = DiscreteOperator::assemble(&m.kink(), Background::SingleKink { center: 0.0 }, grid, order).unwrap();
                kernel_residual(&op, &m.kink(), 0.0)
            };
            let ratio = r(0.08) / r(0.04);
            assert!(ratio > lo && ratio < hi, "order {order}: {ratio}");
        }
    }

    #[test]
    fn phi4_spectrum_has_internal_mode() {
        let (_, op) = phi4_op(0.05, 2);
        let ev = op.spectrum(3).unwrap();
        assert!(ev[0].abs() < 1e-3, "{ev:?}");
        assert!((ev[1] - 1.5).abs() < 1e-3, "{ev:?}");
        assert!(ev[2] > 1.99);
    }

    #[test]
    fn inertia_matches_between_stencils() {
        let (_, op2) = phi4_op(0.05, 2);
        let (_, op4) = phi4_op(0.05, 4);
        for sigma in [-0.5, 0.5, 1.6] {
            assert_eq!(op2.count_below(sigma), op4.count_below(sigma), "sigma {sigma}");
        }
        let e4 = op4.spectrum(2).unwrap();
        assert!((e4[1] - 1.5).abs() < 1e-5, "{e4:?}");
    }

    #[test]
    fn zero_mode_is_the_translation_mode() {
        let (m, op) = phi4_op(0.02, 4);
        let l0 = op.spectrum(1).unwrap()[0];
        let v = op.eigenvector(l0).unwrap();
        let h = op.grid().sample(|x| m.kink().eval(x, 1));
        let c = op.inner(&v, &h) / (op.inner(&h, &h).sqrt() * op.inner(&v, &v).sqrt());
        assert!(c >= 1.0 - 1e-6, "{c}");
    }

    #[test]
    fn free_rows_far_from_pair() {
        let m = Model::builtin("sine_gordon").unwrap();
        let grid = Grid::with_spacing(-60.0, 60.0, 0.05).unwrap();
        let op = DiscreteOperator::assemble(&m.kink(), Background::Pair { x1: -15.0, x2: 15.0 }, grid, 2).unwrap();
        assert!((op.diagonal()[0] - 1.0).abs() < 1e-10);
        assert!((op.diagonal()[grid.n - 1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn grid_padding_is_checked() {
        let m = Model::builtin("sine_gordon").unwrap();
        let grid = Grid::with_spacing(-20.0, 20.0, 0.05).unwrap();
        let bg = Background::Pair { x1: -15.0, x2: 15.0 };
        assert!(matches!(DiscreteOperator::assemble(&m.kink(), bg, grid, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn quotient_limits() {
        let m = Model::builtin("sine_gordon").unwrap();
        let k = m.kink();
        let grid = Grid::with_spacing(-60.0, 60.0, 0.02).unwrap();
        let bg = Background::Pair { x1: -15.0, x2: 15.0 };
        let op = DiscreteOperator::assemble(&k, bg, grid, 2).unwrap();
        let mode = grid.sample(|x| k.eval(x + 15.0, 1));
        assert!(op.quotient(&mode).abs() <= 1e-4);
        let bump = grid.sample(|x| (-((x - 45.0) / 2.0).powi(2)).exp());
        assert!(op.quotient(&bump) >= 0.95);
        let report = coercivity_check(&op, &k, bg, 100, 7).unwrap();
        assert!(report.min_quotient > 0.0);
        let again = coercivity_check(&op, &k, bg, 100, 7).unwrap();
        assert_eq!(report.min_quotient, again.min_quotient);
    }
}
