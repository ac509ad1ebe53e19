//! Parameterized interarrival kernels `n -> Q_n(theta)` and mixing measures
//! over the structural parameter.
//!
//! Gamma laws are written rate-first: `Ga(rate, shape)` has density
//! `rate^shape / Gamma(shape) x^(shape-1) e^(-rate x)`. Many libraries use a
//! scale parameter instead; every constructor and JSON field in this crate
//! means *rate*.
//!
//! The kernel rate for index `n` is `(a n + b) * theta[0]`, where `(a, b)` is
//! the affine [`RateMap`]. A kernel is index-constant exactly when `a == 0`.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Estimate, QuadratureConfig};
use crate::special;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[serde(alias = "Exponential")]
    Exponential,
    #[serde(alias = "Gamma")]
    Gamma,
    #[serde(alias = "Poisson")]
    Poisson,
}

/// Affine index multiplier `n -> a n + b` applied to the base rate `theta[0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateMap {
    pub a: f64,
    pub b: f64,
}

impl RateMap {
    pub const CONSTANT: RateMap = RateMap { a: 0.0, b: 1.0 };

    pub fn multiplier(&self, index: usize) -> f64 {
        self.a * index as f64 + self.b
    }

    pub fn is_constant(&self) -> bool {
        self.a == 0.0
    }
}

impl Default for RateMap {
    fn default() -> Self {
        Self::CONSTANT
    }
}

/// Gamma shape: either a fixed number or a component of theta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Shape {
    Fixed(f64),
    Param {
        param: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: Family,
    #[serde(default)]
    pub rate_map: RateMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
}

impl KernelSpec {
    pub fn exponential() -> Self {
        Self {
            family: Family::Exponential,
            rate_map: RateMap::CONSTANT,
            shape: None,
        }
    }

    pub fn gamma(shape: f64) -> Self {
        Self {
            family: Family::Gamma,
            rate_map: RateMap::CONSTANT,
            shape: Some(Shape::Fixed(shape)),
        }
    }

    /// `Ga(theta[0], theta[param])`.
    pub fn gamma_with_shape_param(param: usize) -> Self {
        Self {
            family: Family::Gamma,
            rate_map: RateMap::CONSTANT,
            shape: Some(Shape::Param { param }),
        }
    }

    pub fn poisson() -> Self {
        Self {
            family: Family::Poisson,
            rate_map: RateMap::CONSTANT,
            shape: None,
        }
    }

    pub fn with_rate_map(mut self, a: f64, b: f64) -> Self {
        self.rate_map = RateMap { a, b };
        self
    }

    pub fn is_index_constant(&self) -> bool {
        self.rate_map.is_constant()
    }

    /// Number of theta components the kernel reads.
    pub fn dimension(&self) -> usize {
        match self.shape {
            Some(Shape::Param { param }) => (param + 1).max(1),
            _ => 1,
        }
    }

    /// Indices of theta that must lie in `(0, inf)`.
    pub fn positive_components(&self) -> Vec<usize> {
        let mut out = vec![0];
        if let Some(Shape::Param { param }) = self.shape {
            if param != 0 {
                out.push(param);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let RateMap { a, b } = self.rate_map;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Config("rate_map coefficients must be finite".into()));
        }
        if a < 0.0 || a + b <= 0.0 {
            return Err(Error::Config(format!(
                "rate_map n -> {a} n + {b} must stay positive for every index n >= 1"
            )));
        }
        match (self.family, self.shape) {
            (Family::Gamma, None) => Err(Error::Config("gamma kernel needs a shape".into())),
            (Family::Gamma, Some(Shape::Fixed(s))) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::domain("shape", s, "gamma shape must be positive"))
            }
            (Family::Exponential | Family::Poisson, Some(_)) => Err(Error::Config(format!(
                "{:?} kernel takes no shape",
                self.family
            ))),
            _ => Ok(()),
        }
    }

    /// Rate of `Q_index(theta)`; the mean for Poisson kernels.
    pub fn rate(&self, index: usize, theta: &[f64]) -> Result<f64> {
        let base = *theta
            .first()
            .ok_or_else(|| Error::Config("empty parameter point".into()))?;
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::domain("theta[0]", base, "kernel rate must be positive"));
        }
        let m = self.rate_map.multiplier(index);
        if !(m > 0.0) {
            return Err(Error::domain(format!("rate_map({index})"), m, "rate multiplier must be positive"));
        }
        Ok(m * base)
    }

    pub fn shape_at(&self, theta: &[f64]) -> Result<f64> {
        match self.shape {
            None => Ok(1.0),
            Some(Shape::Fixed(s)) => Ok(s),
            Some(Shape::Param { param }) => {
                let s = *theta.get(param).ok_or_else(|| {
                    Error::Config(format!("shape reads theta[{param}] but theta has {} components", theta.len()))
                })?;
                if s > 0.0 && s.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::domain(format!("theta[{param}]"), s, "gamma shape must be positive"))
                }
            }
        }
    }

    pub fn has_positive_support(&self) -> bool {
        !matches!(self.family, Family::Poisson)
    }
}

/// `Q_index(theta)((-inf, x])`.
pub fn kernel_cdf(spec: &KernelSpec, index: usize, theta: &[f64], x: f64) -> Result<f64> {
    let rate = spec.rate(index, theta)?;
    let shape = spec.shape_at(theta)?;
    if x.is_nan() {
        return Err(Error::domain("x", x, "cdf argument is NaN"));
    }
    Ok(match spec.family {
        Family::Exponential => {
            if x <= 0.0 {
                0.0
            } else {
                -(-rate * x).exp_m1()
            }
        }
        Family::Gamma => {
            if x <= 0.0 {
                0.0
            } else {
                special::regularized_incomplete_gamma(shape, rate * x)
            }
        }
        Family::Poisson => {
            if x < 0.0 {
                0.0
            } else if x == f64::INFINITY {
                1.0
            } else {
                special::regularized_upper_incomplete_gamma(x.floor() + 1.0, rate)
            }
        }
    })
}

/// Probability that `Q_index(theta)` assigns to `(lo, hi]`.
pub fn kernel_interval_probability(spec: &KernelSpec, index: usize, theta: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let upper = kernel_cdf(spec, index, theta, hi)?;
    let lower = if lo == f64::NEG_INFINITY { 0.0 } else { kernel_cdf(spec, index, theta, lo)? };
    Ok((upper - lower).max(0.0))
}

/// Lebesgue density of continuous kernels.
pub fn kernel_density(spec: &KernelSpec, index: usize, theta: &[f64], x: f64) -> Result<f64> {
    let rate = spec.rate(index, theta)?;
    let shape = spec.shape_at(theta)?;
    match spec.family {
        Family::Exponential => Ok(if x < 0.0 { 0.0 } else { rate * (-rate * x).exp() }),
        Family::Gamma => Ok(special::gamma_density(rate, shape, x)),
        Family::Poisson => Err(Error::Unsupported("Poisson kernel has no Lebesgue density".into())),
    }
}

pub fn kernel_mean(spec: &KernelSpec, index: usize, theta: &[f64]) -> Result<f64> {
    let rate = spec.rate(index, theta)?;
    let shape = spec.shape_at(theta)?;
    Ok(match spec.family {
        Family::Exponential => 1.0 / rate,
        Family::Gamma => shape / rate,
        Family::Poisson => rate,
    })
}

pub fn kernel_sample<R: Rng + ?Sized>(spec: &KernelSpec, index: usize, theta: &[f64], rng: &mut R) -> Result<f64> {
    let rate = spec.rate(index, theta)?;
    let shape = spec.shape_at(theta)?;
    Ok(match spec.family {
        Family::Exponential => sample_exponential(rate, rng),
        Family::Gamma => sample_gamma(rate, shape, rng),
        Family::Poisson => rand_distr::Poisson::new(rate)
            .map_err(|_| Error::domain("theta[0]", rate, "invalid Poisson mean"))?
            .sample(rng),
    })
}

/// Inverse-CDF exponential draw from one open-interval uniform.
pub fn sample_exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln() / rate
}

/// Marsaglia–Tsang squeeze; shapes below one are boosted through
/// `G(shape + 1) * U^(1/shape)`, evaluated in log space so tiny shapes do not
/// underflow before the final exponentiation.
pub fn sample_gamma<R: Rng + ?Sized>(rate: f64, shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let g = standard_gamma_at_least_one(shape + 1.0, rng);
        let u: f64 = rng.sample(Open01);
        return (g.ln() + u.ln() / shape).exp() / rate;
    }
    standard_gamma_at_least_one(shape, rng) / rate
}

fn standard_gamma_at_least_one<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.sample(Open01);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// One-dimensional factor of a product mixing measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density1d {
    Uniform { lo: f64, hi: f64 },
    Gamma { rate: f64, shape: f64 },
    /// Beta(a, b) stretched onto `(lo, hi)`.
    Beta { a: f64, b: f64, lo: f64, hi: f64 },
}

impl Density1d {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Density1d::Uniform { lo, hi } | Density1d::Beta { lo, hi, .. } => (lo, hi),
            Density1d::Gamma { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Density1d::Uniform { lo, hi } => {
                if x > lo && x < hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Density1d::Gamma { rate, shape } => {
                if x > 0.0 {
                    special::gamma_density(rate, shape, x)
                } else {
                    0.0
                }
            }
            Density1d::Beta { a, b, lo, hi } => special::beta_density(a, b, (x - lo) / (hi - lo)) / (hi - lo),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Density1d::Uniform { lo, hi } => 0.5 * (lo + hi),
            Density1d::Gamma { rate, shape } => shape / rate,
            Density1d::Beta { a, b, lo, hi } => lo + (hi - lo) * a / (a + b),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Density1d::Uniform { lo, hi } => {
                let u: f64 = rng.sample(Open01);
                lo + (hi - lo) * u
            }
            Density1d::Gamma { rate, shape } => sample_gamma(rate, shape, rng),
            Density1d::Beta { a, b, lo, hi } => {
                let x = sample_gamma(1.0, a, rng);
                let y = sample_gamma(1.0, b, rng);
                lo + (hi - lo) * x / (x + y)
            }
        }
    }

    fn validate(&self, axis: usize) -> Result<()> {
        let bad = |what: &'static str, v: f64| Err(Error::domain(format!("mixing factor {axis}"), v, what));
        match *self {
            Density1d::Uniform { lo, hi } | Density1d::Beta { lo, hi, .. } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                bad("interval must be finite with lo < hi", hi - lo)
            }
            Density1d::Beta { a, .. } if !(a > 0.0) => bad("beta parameter a must be positive", a),
            Density1d::Beta { b, .. } if !(b > 0.0) => bad("beta parameter b must be positive", b),
            Density1d::Gamma { rate, .. } if !(rate > 0.0 && rate.is_finite()) => bad("gamma rate must be positive", rate),
            Density1d::Gamma { shape, .. } if !(shape > 0.0 && shape.is_finite()) => bad("gamma shape must be positive", shape),
            _ => Ok(()),
        }
    }
}

/// Law of the structural parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixingMeasure {
    Dirac { theta: Vec<f64> },
    /// `Ga(rate, shape)` on `(0, inf)`.
    Gamma { rate: f64, shape: f64 },
    ProductRectangle { factors: Vec<Density1d> },
    Discrete { atoms: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl MixingMeasure {
    pub fn dirac(theta: impl Into<Vec<f64>>) -> Self {
        MixingMeasure::Dirac { theta: theta.into() }
    }

    pub fn gamma(rate: f64, shape: f64) -> Self {
        MixingMeasure::Gamma { rate, shape }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, MixingMeasure::Gamma { .. } | MixingMeasure::ProductRectangle { .. })
    }

    pub fn dimension(&self) -> usize {
        match self {
            MixingMeasure::Dirac { theta } => theta.len(),
            MixingMeasure::Gamma { .. } => 1,
            MixingMeasure::ProductRectangle { factors } => factors.len(),
            MixingMeasure::Discrete { atoms, .. } => atoms.first().map_or(0, Vec::len),
        }
    }

    /// Smallest box containing the support.
    pub fn support(&self) -> Vec<(f64, f64)> {
        match self {
            MixingMeasure::Dirac { theta } => theta.iter().map(|&t| (t, t)).collect(),
            MixingMeasure::Gamma { .. } => vec![(0.0, f64::INFINITY)],
            MixingMeasure::ProductRectangle { factors } => factors.iter().map(Density1d::support).collect(),
            MixingMeasure::Discrete { atoms, weights } => {
                let d = self.dimension();
                let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
                for (atom, &w) in atoms.iter().zip(weights) {
                    if w == 0.0 {
                        continue;
                    }
                    for (slot, &v) in out.iter_mut().zip(atom) {
                        slot.0 = slot.0.min(v);
                        slot.1 = slot.1.max(v);
                    }
                }
                out
            }
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        if theta.len() != self.dimension() {
            return false;
        }
        match self {
            MixingMeasure::Dirac { theta: t0 } => t0.as_slice() == theta,
            MixingMeasure::Discrete { atoms, weights } => {
                atoms.iter().zip(weights).any(|(a, &w)| w > 0.0 && a.as_slice() == theta)
            }
            _ => self
                .support()
                .iter()
                .zip(theta)
                .all(|(&(lo, hi), &t)| t >= lo && t <= hi && t.is_finite()),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            MixingMeasure::Dirac { theta } => theta.clone(),
            MixingMeasure::Gamma { rate, shape } => vec![shape / rate],
            MixingMeasure::ProductRectangle { factors } => factors.iter().map(Density1d::mean).collect(),
            MixingMeasure::Discrete { atoms, weights } => {
                let mut out = vec![0.0; self.dimension()];
                for (atom, &w) in atoms.iter().zip(weights) {
                    for (o, &v) in out.iter_mut().zip(atom) {
                        *o += w * v;
                    }
                }
                out
            }
        }
    }

    /// Factor-wise view of continuous measures.
    pub fn factors(&self) -> Option<Vec<Density1d>> {
        match self {
            MixingMeasure::Gamma { rate, shape } => Some(vec![Density1d::Gamma {
                rate: *rate,
                shape: *shape,
            }]),
            MixingMeasure::ProductRectangle { factors } => Some(factors.clone()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MixingMeasure::Dirac { theta } => {
                if theta.is_empty() || theta.iter().any(|t| !t.is_finite()) {
                    return Err(Error::Config("dirac mixing needs a finite, nonempty theta".into()));
                }
            }
            MixingMeasure::Gamma { rate, shape } => {
                Density1d::Gamma {
                    rate: *rate,
                    shape: *shape,
                }
                .validate(0)?;
            }
            MixingMeasure::ProductRectangle { factors } => {
                if factors.is_empty() {
                    return Err(Error::Config("product_rectangle needs at least one factor".into()));
                }
                for (axis, f) in factors.iter().enumerate() {
                    f.validate(axis)?;
                }
            }
            MixingMeasure::Discrete { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(Error::Config("discrete mixing needs one weight per atom".into()));
                }
                let d = atoms[0].len();
                if d == 0 || atoms.iter().any(|a| a.len() != d || a.iter().any(|v| !v.is_finite())) {
                    return Err(Error::Config("discrete atoms must share one nonzero dimension".into()));
                }
                if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
                    return Err(Error::domain("weights", w, "weights must be nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::domain("weights", total, "weights must sum to one"));
                }
            }
        }
        Ok(())
    }
}

pub fn mixing_sample<R: Rng + ?Sized>(mu: &MixingMeasure, rng: &mut R) -> Vec<f64> {
    match mu {
        MixingMeasure::Dirac { theta } => theta.clone(),
        MixingMeasure::Gamma { rate, shape } => vec![sample_gamma(*rate, *shape, rng)],
        MixingMeasure::ProductRectangle { factors } => factors.iter().map(|f| f.sample(rng)).collect(),
        MixingMeasure::Discrete { atoms, weights } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (atom, &w) in atoms.iter().zip(weights) {
                acc += w;
                if u < acc {
                    return atom.clone();
                }
            }
            // rounding left a sliver above the last cumulative weight
            atoms
                .iter()
                .zip(weights)
                .rev()
                .find(|(_, &w)| w > 0.0)
                .map(|(a, _)| a.clone())
                .unwrap_or_else(|| atoms[atoms.len() - 1].clone())
        }
    }
}

/// Lebesgue density of a continuous mixing measure; 0 outside the support.
pub fn mixing_density(mu: &MixingMeasure, theta: &[f64]) -> Result<f64> {
    let factors = mu
        .factors()
        .ok_or_else(|| Error::Unsupported("mixing density is only defined for continuous measures".into()))?;
    if theta.len() != factors.len() {
        return Err(Error::Config(format!(
            "theta has {} components, mixing measure has {}",
            theta.len(),
            factors.len()
        )));
    }
    Ok(factors.iter().zip(theta).map(|(f, &t)| f.density(t)).product())
}

/// Upper cut for an unbounded Gamma factor: the first point past
/// `max(mode, mean)` where the density falls below `abs_tol * tail_factor`
/// times its value there. Returns the cut and the exact mass beyond it.
pub fn gamma_truncation(rate: f64, shape: f64, cfg: &QuadratureConfig) -> (f64, f64) {
    let mode = if shape > 1.0 { (shape - 1.0) / rate } else { 0.0 };
    let anchor = mode.max(shape / rate);
    let reference = special::gamma_density(rate, shape, anchor);
    let target = cfg.abs_tol * cfg.tail_factor * reference;
    let below = |x: f64| special::gamma_density(rate, shape, x) <= target;
    let mut hi = anchor.max(1.0 / rate) * 2.0;
    while !below(hi) {
        hi *= 2.0;
    }
    let mut lo = anchor;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    (hi, special::regularized_upper_incomplete_gamma(shape, rate * hi))
}

/// Total mass of a continuous mixing measure, computed factor by factor.
pub fn mixing_total_mass(mu: &MixingMeasure, cfg: &QuadratureConfig) -> Result<Estimate> {
    let factors = mu
        .factors()
        .ok_or_else(|| Error::Unsupported("total mass by quadrature needs a continuous measure".into()))?;
    let mut value = 1.0f64;
    let mut error = 0.0;
    for f in &factors {
        let (lo, hi) = f.support();
        let est = quadrature::integrate_range(|x| f.density(x), lo, hi, f.mean().max(1e-3), cfg)?;
        error += est.error * value.max(1.0);
        value *= est.value;
    }
    Ok(Estimate { value, error })
}
