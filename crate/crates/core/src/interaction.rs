//! The interaction between a kink and an antikink: the field Φ, the force
//! `F(z)`, the amplitude `A`, and the potential energy of the pair.
//!
//! Functions take a [`Kink`] and work in its units. For the normalized kink
//! `F(z) ≈ A²e^{−z}`; in physical units `F(z) = √c F̃(√c z)` with `c = U″(φ₊)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kink_profile::{compute_kappa, Kink, KinkProfile};
use crate::potential::Potential;
use crate::quadrature::{gauss_legendre, Quadrature};
use crate::spline::CubicSpline;

/// Normalized lengths kept on each side of the pair in quadratures.
pub const PAIR_PADDING: f64 = 25.0;
const MIN_PADDING: f64 = 15.0;
const TAIL_LIMIT: f64 = 1e-10;

/// `Φ(x₁, x₂, x) = −U′(φ₊ − H₁ + H₂) − U′(H₁) + U′(H₂)`, `H_j = H(x − x_j)`.
pub fn interaction_field(kink: &Kink, x1: f64, x2: f64, x: f64) -> f64 {
    let u = kink.potential();
    let h1 = kink.eval(x - x1, 0);
    let h2 = kink.eval(x - x2, 0);
    -u.du(kink.phi_plus() - h1 + h2) - u.du(h1) + u.du(h2)
}

/// Integrates `f` over `[a, b]` at two resolutions tied to the profile table
/// and returns the finer value with the difference.
fn two_resolution<F: Fn(f64) -> f64 + Sync>(kink: &Kink, f: F, a: f64, b: f64) -> (f64, f64) {
    let cell = kink.profile().dx() / kink.x_scale();
    let cells = ((b - a) / cell).ceil() as usize;
    let (coarse, fine) = rayon::join(|| gauss_legendre(&f, a, b, cells), || gauss_legendre(&f, a, b, 2 * cells));
    (fine, (fine - coarse).abs())
}

/// `⟨∂ₓH(· − x₁), Φ(x₁, x₂, ·)⟩` or the same with `∂ₓH(· − x₂)` when `second`.
pub fn projected_field(kink: &Kink, x1: f64, x2: f64, second: bool) -> Result<f64> {
    if !(x2 > x1) {
        return Err(Error::Domain(format!("need x2 > x1, got {x1}, {x2}")));
    }
    let pad = PAIR_PADDING / kink.x_scale();
    let centre = if second { x2 } else { x1 };
    let f = |x: f64| kink.eval(x - centre, 1) * interaction_field(kink, x1, x2, x);
    let (v, diff) = two_resolution(kink, f, x1 - pad, x2 + pad);
    let scale = kink.phi_scale().powi(2) * kink.x_scale().powi(2);
    if diff > 1e-15 * scale + 1e-9 * v.abs() {
        return Err(Error::Accuracy { what: "interaction projection quadrature".into(), achieved: diff });
    }
    Ok(v)
}

/// `F(z) = ‖∂ₓH‖⁻²⟨∂ₓH, Φ(0, z, ·)⟩`.
pub fn force(kink: &Kink, z: f64) -> Result<f64> {
    if !(z * kink.x_scale() >= 1.0) {
        return Err(Error::Domain(format!("force needs z >= 1 in normalized units, got {z}")));
    }
    Ok(projected_field(kink, 0.0, z, false)? / kink.constants()?.mass)
}

/// `A` from its definition, evaluated on the potential as given:
/// `φ₊ U″(φ₊)^{1/4} (∫₀^{φ₊}√(2U))^{−1/2} κ`. Cross-checked against
/// `√2 κ̃/‖∂ₓH̃‖` from the normalized profile.
pub fn constant_a(p: &Potential, profile: &KinkProfile) -> Result<f64> {
    let pp = p.phi_plus();
    let (area, _) = Quadrature::default().integrate(|y| p.bogomolny_slope(y), 0.0, pp)?;
    let a = pp * p.curvature().powf(0.25) * area.powf(-0.5) * compute_kappa(p)?;
    let via_profile = 2f64.sqrt() * profile.kappa() / profile.constants()?.mass.sqrt();
    if (a - via_profile).abs() > 1e-8 * a {
        return Err(Error::Inconsistency(format!(
            "A = {a} from the potential but {via_profile} from the profile of `{}`",
            profile.potential().name()
        )));
    }
    Ok(a)
}

/// `A` through the tail-limit value of κ read off the table.
pub fn constant_a_from_tail(profile: &KinkProfile) -> Result<f64> {
    let kappa = profile.tail_kappa(12.0, 14.0)?;
    Ok(2f64.sqrt() * kappa / profile.constants()?.mass.sqrt())
}

/// Leading order of the force in the kink's units: `√c A² e^{−√c z}`.
pub fn force_asymptote(kink: &Kink, a: f64, z: f64) -> f64 {
    let s = kink.x_scale();
    s * a * a * (-s * z).exp()
}

/// Leading order of `E_p(pair) − 2E_p(H)`: `−2κ²e^{−z}` mapped to the kink's units.
pub fn energy_defect_asymptote(kink: &Kink, z: f64) -> f64 {
    let s = kink.x_scale();
    let k = kink.tail_amplitude();
    -2.0 * k * k * s * (-s * z).exp()
}

/// `E_p(φ₊ − H₁ + H₂) − 2E_p(H)` as a single integral of the pointwise
/// defect `−H₁′H₂′ + U(w) − U(H₁) − U(H₂)`, so the `O(1)` energies never
/// get subtracted.
pub fn pair_energy_defect(kink: &Kink, x1: f64, x2: f64) -> Result<f64> {
    pair_energy_defect_padded(kink, x1, x2, PAIR_PADDING)
}

/// As [`pair_energy_defect`] with an explicit padding in normalized lengths.
pub fn pair_energy_defect_padded(kink: &Kink, x1: f64, x2: f64, padding: f64) -> Result<f64> {
    let s = kink.x_scale();
    if !((x2 - x1) * s >= 2.0) {
        return Err(Error::Domain(format!("pair energy needs x2 - x1 >= 2 in normalized units, got {}", x2 - x1)));
    }
    if padding < MIN_PADDING {
        return Err(Error::Domain(format!("pair energy padding {padding} is below {MIN_PADDING}")));
    }
    let u = kink.potential();
    let pp = kink.phi_plus();
    let density = |x: f64| {
        let (h1, h2) = (kink.eval(x - x1, 0), kink.eval(x - x2, 0));
        let (d1, d2) = (kink.eval(x - x1, 1), kink.eval(x - x2, 1));
        -d1 * d2 + u.u(pp - h1 + h2) - u.u(h1) - u.u(h2)
    };
    let (a, b) = (x1 - padding / s, x2 + padding / s);
    // the defect decays like e^{−2√c|x|} past the kinks
    let tail = (density(a).abs() + density(b).abs()) / (2.0 * s);
    if tail > TAIL_LIMIT {
        return Err(Error::Domain(format!("pair energy padding too small: tail estimate {tail:.3e}")));
    }
    let (v, diff) = two_resolution(kink, density, a, b);
    let scale = pp * pp * s;
    if diff > 1e-16 * scale + 1e-9 * v.abs() {
        return Err(Error::Accuracy { what: "pair energy quadrature".into(), achieved: diff });
    }
    Ok(v)
}

/// `E_p(φ₊ − H(· − x₁) + H(· − x₂))`.
pub fn pair_energy(kink: &Kink, x1: f64, x2: f64) -> Result<f64> {
    Ok(2.0 * kink.constants()?.energy + pair_energy_defect(kink, x1, x2)?)
}

/// Static-equation residual and energy defect of `w(x; a) = φ₊ − H(x + a) + H(x − a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipoleResidual {
    pub sup_residual: f64,
    pub energy_defect: f64,
}

pub fn dipole_residual(kink: &Kink, a: f64) -> Result<DipoleResidual> {
    let s = kink.x_scale();
    if !(a * s >= 3.0) {
        return Err(Error::Domain(format!("dipole residual needs a >= 3 in normalized units, got {a}")));
    }
    // −w″ + U′(w) = −Φ(−a, a, ·) because H″ = U′(H)
    let reach = a + PAIR_PADDING / s;
    let step = 0.25 * kink.profile().dx() / s;
    let n = (2.0 * reach / step).ceil() as usize;
    let sup_residual = (0..=n)
        .into_par_iter()
        .map(|i| interaction_field(kink, -a, a, -reach + i as f64 * step).abs())
        .reduce(|| 0.0, f64::max);
    let energy_defect = pair_energy_defect(kink, -a, a)?.abs();
    Ok(DipoleResidual { sup_residual, energy_defect })
}

/// A force law `z ↦ F(z)` usable by the reduced dynamics.
pub trait ForceLaw: Send + Sync {
    fn force(&self, z: f64) -> f64;
    /// `∫_z^∞ F`.
    fn tail_integral(&self, z: f64) -> f64;
    /// Smallest separation where the law is trusted.
    fn z_min(&self) -> f64 {
        f64::NEG_INFINITY
    }
}

/// `F(z) = r A² e^{−r z}` with rate `r` (1 in normalized units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialForce {
    pub a: f64,
    pub rate: f64,
}

impl ExponentialForce {
    pub fn new(a: f64) -> Self {
        Self { a, rate: 1.0 }
    }
}

impl ForceLaw for ExponentialForce {
    fn force(&self, z: f64) -> f64 {
        self.rate * self.a * self.a * (-self.rate * z).exp()
    }

    fn tail_integral(&self, z: f64) -> f64 {
        self.a * self.a * (-self.rate * z).exp()
    }
}

/// `F` sampled on a grid of separations, interpolated through the smooth
/// ratio `ln(F/F_∞)` with `F_∞ = √c A²e^{−√c z}`.
#[derive(Debug, Clone)]
pub struct ForceTable {
    z_grid: Vec<f64>,
    f_values: Vec<f64>,
    a: f64,
    rate: f64,
    log_ratio: CubicSpline,
    // ∫_{z_i}^∞ F at each node
    tails: Vec<f64>,
}

impl ForceTable {
    pub fn build(kink: &Kink, a: f64, z_min: f64, z_max: f64, nodes: usize) -> Result<Self> {
        if nodes < 4 || !(z_max > z_min) {
            return Err(Error::Domain(format!("force table needs z_min < z_max and >= 4 nodes, got [{z_min}, {z_max}], {nodes}")));
        }
        let z_grid: Vec<f64> = (0..nodes).map(|i| z_min + (z_max - z_min) * i as f64 / (nodes - 1) as f64).collect();
        let f_values = z_grid.par_iter().map(|&z| force(kink, z)).collect::<Result<Vec<_>>>()?;
        for (i, w) in f_values.windows(2).enumerate() {
            if !(w[0] > 0.0 && w[1] > 0.0 && w[1] < w[0]) {
                return Err(Error::Inconsistency(format!(
                    "force is not positive and decreasing near z = {}",
                    z_grid[i + 1]
                )));
            }
        }
        let rate = kink.x_scale();
        let log_ratio = z_grid
            .iter()
            .zip(&f_values)
            .map(|(&z, &f)| (f / (rate * a * a * (-rate * z).exp())).ln())
            .collect();
        let log_ratio = CubicSpline::new(z_grid.clone(), log_ratio)?;
        let mut table = Self { z_grid, f_values, a, rate, log_ratio, tails: Vec::new() };
        let mut tails = vec![0.0; nodes];
        tails[nodes - 1] = table.beyond_grid(z_max);
        for i in (0..nodes - 1).rev() {
            tails[i] = tails[i + 1] + gauss_legendre(|s| table.force(s), table.z_grid[i], table.z_grid[i + 1], 2);
        }
        table.tails = tails;
        Ok(table)
    }

    pub fn z_grid(&self) -> &[f64] {
        &self.z_grid
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_values
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn z_max(&self) -> f64 {
        *self.z_grid.last().unwrap()
    }

    fn ratio_log(&self, z: f64) -> f64 {
        let zm = self.z_max();
        if z <= zm {
            self.log_ratio.eval(z)
        } else {
            // the correction decays at least like e^{−√c z} beyond the grid
            self.log_ratio.eval(zm) * (-self.rate * (z - zm)).exp()
        }
    }

    /// `∫_z^∞ F` for `z` at or beyond the last node.
    fn beyond_grid(&self, z: f64) -> f64 {
        let far = self.z_max() + 40.0 / self.rate;
        if z > far {
            return self.a * self.a * (-self.rate * z).exp();
        }
        let q = Quadrature::new(1e-300, 1e-13);
        let near = q.integrate(|s| self.force(s), z, far).map(|r| r.0).unwrap_or(f64::NAN);
        near + self.a * self.a * (-self.rate * far).exp()
    }

    /// Fitted `C` in `|F e^{z}/A² − 1| ≤ C z e^{−z}` (normalized `z`) over the grid.
    pub fn correction_constant(&self) -> f64 {
        self.z_grid
            .iter()
            .map(|&z| {
                let zn = self.rate * z;
                self.ratio_log(z).exp_m1().abs() / (zn * (-zn).exp())
            })
            .fold(0.0, f64::max)
    }
}

impl ForceLaw for ForceTable {
    fn force(&self, z: f64) -> f64 {
        self.rate * self.a * self.a * (-self.rate * z + self.ratio_log(z)).exp()
    }

    fn tail_integral(&self, z: f64) -> f64 {
        let n = self.z_grid.len();
        if z >= self.z_grid[n - 1] {
            return self.beyond_grid(z);
        }
        if z < self.z_grid[0] {
            return self.tails[0] + gauss_legendre(|s| self.force(s), z, self.z_grid[0], 8);
        }
        let i = self.z_grid.partition_point(|&g| g <= z) - 1;
        self.tails[i + 1] + gauss_legendre(|s| self.force(s), z, self.z_grid[i + 1], 1)
    }

    fn z_min(&self) -> f64 {
        self.z_grid[0]
    }
}
