//! Adaptive 15-point Gauss–Kronrod quadrature.
//!
//! Intervals are refined by bisecting the one with the largest local error
//! estimate until the global estimate drops below
//! `max(abs_tol, rel_tol * |I|)`. Semi-infinite ranges are mapped onto
//! `[0, 1)` with `x = a + c u / (1 - u)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
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

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and limits shared by every quadrature-backed evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Unbounded Gamma-type supports are cut where the density drops below
    /// `abs_tol * tail_factor` times its reference value.
    pub tail_factor: f64,
    /// Largest box dimension accepted by the mixture evaluators.
    pub max_dimension: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            tail_factor: 1e-3,
            max_dimension: 16,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions == 0 || self.max_dimension == 0 {
            return Err(Error::Config("quadrature limits must be at least 1".into()));
        }
        Ok(())
    }

    pub fn tighter(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..*self
        }
    }
}

/// An integral value together with a bound on its numerical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let value = res_k * half;
    let error = rescale_error((res_k - res_g) * half, res_abs * h, res_asc * h);
    Segment { a, b, value, error }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::exact(0.0));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Config(format!("integrate needs finite limits, got [{a}, {b}]")));
    }
    let first = gk15(&f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    // segments too narrow to split further
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    let mut subdivisions = 1usize;

    loop {
        if !value.is_finite() {
            return Err(Error::Accuracy {
                estimate: value,
                error_estimate: f64::INFINITY,
                tolerance: cfg.abs_tol,
            });
        }
        let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= tol {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        let width = (worst.b - worst.a).abs();
        if width <= 1e3 * f64::EPSILON * (worst.a.abs() + worst.b.abs()) || mid == worst.a || mid == worst.b {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        if subdivisions >= cfg.max_subdivisions {
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        subdivisions += 1;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // re-sum to shed drift from the running updates
    let value: f64 = heap.iter().map(|s| s.value).sum::<f64>() + frozen_value;
    let error: f64 = heap.iter().map(|s| s.error).sum::<f64>() + frozen_error;
    let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
    if error <= tol {
        Ok(Estimate { value, error })
    } else {
        Err(Error::Accuracy {
            estimate: value,
            error_estimate: error,
            tolerance: tol,
        })
    }
}

/// Integrates `f` over `[a, inf)` through `x = a + scale * u / (1 - u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config(format!("semi-infinite map needs a positive scale, got {scale}")));
    }
    let mapped = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - u;
        let x = a + scale * u / one_minus;
        let jac = scale / (one_minus * one_minus);
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v * jac
        }
    };
    integrate(mapped, 0.0, 1.0, cfg)
}

/// Integrates over `[a, b]` where either limit may be infinite.
pub fn integrate_range<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    scale: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate(f, a, b, cfg),
        (true, false) => integrate_to_infinity(f, a, scale, cfg),
        (false, true) => integrate_to_infinity(|x| f(-x), -b, scale, cfg),
        (false, false) => {
            let left = integrate_to_infinity(|x| f(-x), 0.0, scale, cfg)?;
            let right = integrate_to_infinity(&f, 0.0, scale, cfg)?;
            Ok(Estimate {
                value: left.value + right.value,
                error: left.error + right.error,
            })
        }
    }
}
