//! Adaptive Gauss–Kronrod quadrature and uniform-grid sums.

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (non-negative half) and weights, with the
// embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of one 15-point panel: Kronrod estimate and |K15 − G7|.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        resk += WGK[j] * sum;
        // odd Kronrod nodes coincide with the Gauss nodes
        if j % 2 == 1 {
            resg += WG[j / 2] * sum;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_panels: 4000 }
    }
}

impl Quadrature {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Default::default() }
    }

    /// Integrates `f` over `[a, b]` by global adaptive bisection of the panel
    /// with the largest error estimate. Returns the value and the error estimate.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<(f64, f64)> {
        if a == b {
            return Ok((0.0, 0.0));
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let (v, e) = gk15(&f, lo, hi);
        // (error, a, b, value)
        let mut panels = vec![(e, lo, hi, v)];
        let mut total = v;
        let mut err = e;
        loop {
            if !total.is_finite() {
                return Err(Error::Accuracy {
                    what: "quadrature produced a non-finite value".into(),
                    achieved: f64::NAN,
                });
            }
            if err <= self.abs_tol.max(self.rel_tol * total.abs()) {
                return Ok((sign * total, err));
            }
            if panels.len() >= self.max_panels {
                return Err(Error::Accuracy {
                    what: format!("adaptive quadrature on [{lo}, {hi}] did not converge"),
                    achieved: err,
                });
            }
            let worst = panels
                .iter()
                .enumerate()
                .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
                .map(|(i, _)| i)
                .unwrap();
            let (pe, pa, pb, pv) = panels.swap_remove(worst);
            let mid = 0.5 * (pa + pb);
            if mid <= pa || mid >= pb {
                // interval exhausted in floating point
                return Err(Error::Accuracy {
                    what: format!("quadrature panel collapsed near {pa}"),
                    achieved: err,
                });
            }
            let (v1, e1) = gk15(&f, pa, mid);
            let (v2, e2) = gk15(&f, mid, pb);
            total += v1 + v2 - pv;
            err += e1 + e2 - pe;
            panels.push((e1, pa, mid, v1));
            panels.push((e2, mid, pb, v2));
            // keep the running error from drifting through cancellation
            if panels.len() % 64 == 0 {
                err = panels.iter().map(|p| p.0).sum();
                total = panels.iter().map(|p| p.3).sum();
            }
        }
    }

    /// Integrates over consecutive breakpoints and sums the pieces.
    pub fn integrate_pieces<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<(f64, f64)> {
        let mut v = 0.0;
        let mut e = 0.0;
        for w in breaks.windows(2) {
            let (pv, pe) = self.integrate(&f, w[0], w[1])?;
            v += pv;
            e += pe;
        }
        Ok((v, e))
    }
}

// 6-point Gauss–Legendre on [−1, 1]
const GL6_X: [f64; 3] = [0.238_619_186_083_196_9, 0.661_209_386_466_264_5, 0.932_469_514_203_152_0];
const GL6_W: [f64; 3] = [0.467_913_934_572_691_0, 0.360_761_573_048_138_6, 0.171_324_492_379_170_3];

/// Composite 6-point Gauss–Legendre over `cells` equal cells of `[a, b]`.
/// Meant for piecewise-smooth integrands whose breaks are finer than any
/// adaptive scheme would resolve cheaply.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cells: usize) -> f64 {
    let h = (b - a) / cells as f64;
    let half = 0.5 * h;
    let mut total = 0.0;
    for c in 0..cells {
        let mid = a + (c as f64 + 0.5) * h;
        let mut s = 0.0;
        for j in 0..3 {
            let d = half * GL6_X[j];
            s += GL6_W[j] * (f(mid - d) + f(mid + d));
        }
        total += s * half;
    }
    total
}

/// Trapezoid sum of samples on a uniform grid.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Trapezoid inner product of two sampled functions on a uniform grid.
pub fn inner(u: &[f64], v: &[f64], dx: f64) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let n = u.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = u[1..n - 1].iter().zip(&v[1..n - 1]).map(|(a, b)| a * b).sum();
    dx * (interior + 0.5 * (u[0] * v[0] + u[n - 1] * v[n - 1]))
}
