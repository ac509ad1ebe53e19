//! Exact finite-dimensional probabilities of a mixed renewal process.
//!
//! The main route integrates a product of kernel CDF increments against the
//! mixing law:
//!
//! ```text
//! P(W_k in (a_k, b_k], k = 1..r) = ∫ prod_k [F_k(b_k; θ) - F_k(a_k; θ)] μ(dθ)
//! ```
//!
//! Point-mass and discrete mixing laws are summed exactly. Continuous laws
//! are integrated axis by axis (last axis outermost) with adaptive
//! Gauss–Kronrod; unbounded Gamma axes are cut where the density becomes
//! negligible and the exact tail mass is added to the error estimate.
//!
//! [`cylinder_probability_density_form`] is a second, independent route for
//! the Gamma-kernel families: it integrates the kernel *densities* over the
//! box instead of using incomplete-gamma CDFs, and maps unbounded parameter
//! axes to the unit interval instead of truncating them.

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::construction::MrpModel;
use crate::error::{Error, Result};
use crate::kernels::{self, Density1d, Family, MixingMeasure, RateMap, Shape};
use crate::quadrature::{self, Estimate, QuadratureConfig};
use crate::special;

/// Finite-dimensional box `prod_k (a_k, b_k]` on the first `r` interarrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxQuery {
    pub bounds: Vec<(f64, f64)>,
}

impl BoxQuery {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        let q = Self { bounds };
        q.validate()?;
        Ok(q)
    }

    /// `{W_1 <= w_1, ..., W_r <= w_r}`.
    pub fn upper(ws: &[f64]) -> Self {
        Self {
            bounds: ws.iter().map(|&w| (f64::NEG_INFINITY, w)).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    /// Reorders coordinates: coordinate `k` of the result is coordinate
    /// `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            bounds: perm.iter().map(|&i| self.bounds[i]).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::Config("a box query needs at least one coordinate".into()));
        }
        for (k, &(a, b)) in self.bounds.iter().enumerate() {
            if a.is_nan() || b.is_nan() || !(a < b) {
                return Err(Error::Config(format!("coordinate {} has an empty interval ({a}, {b}]", k + 1)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DiracProduct,
    DiscreteSum,
    Quadrature,
    IncompleteGammaMixture,
    DensityForm,
    ClosedForm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::DiracProduct => "dirac-product",
            Method::DiscreteSum => "discrete-sum",
            Method::Quadrature => "quadrature",
            Method::IncompleteGammaMixture => "incomplete-gamma-mixture",
            Method::DensityForm => "density-form",
            Method::ClosedForm => "closed-form",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub probability: f64,
    pub error: f64,
    pub method: Method,
}

fn check_dimension(query: &BoxQuery, cfg: &QuadratureConfig) -> Result<()> {
    query.validate()?;
    cfg.validate()?;
    if query.dimension() > cfg.max_dimension {
        return Err(Error::Config(format!(
            "box dimension {} exceeds the configured cap {}",
            query.dimension(),
            cfg.max_dimension
        )));
    }
    Ok(())
}

fn check_event(model: &MrpModel, event: Option<&[(f64, f64)]>) -> Result<()> {
    if let Some(e) = event {
        if e.len() != model.dimension() {
            return Err(Error::Config(format!(
                "parameter event has {} axes, the mixing measure has {}",
                e.len(),
                model.dimension()
            )));
        }
        if e.iter().any(|&(lo, hi)| lo.is_nan() || hi.is_nan() || lo > hi) {
            return Err(Error::Config("parameter event has an inverted interval".into()));
        }
    }
    Ok(())
}

fn in_event(theta: &[f64], event: Option<&[(f64, f64)]>) -> bool {
    event.is_none_or(|e| e.iter().zip(theta).all(|(&(lo, hi), &t)| t >= lo && t <= hi))
}

/// Integrates `g` against the mixing law restricted to `event`.
///
/// Returns the estimate and the method used. Integrand failures abort the
/// evaluation; inner quadrature failures are folded into the error
/// estimate and reported as an accuracy error at the end.
pub fn integrate_mixture<G>(
    mixing: &MixingMeasure,
    event: Option<&[(f64, f64)]>,
    cfg: &QuadratureConfig,
    g: G,
) -> Result<(Estimate, Method)>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    match mixing {
        MixingMeasure::Dirac { theta } => {
            let v = if in_event(theta, event) { g(theta)? } else { 0.0 };
            Ok((Estimate::exact(v), Method::DiracProduct))
        }
        MixingMeasure::Discrete { atoms, weights } => {
            let mut v = 0.0;
            for (atom, &w) in atoms.iter().zip(weights) {
                if w > 0.0 && in_event(atom, event) {
                    v += w * g(atom)?;
                }
            }
            Ok((Estimate::exact(v), Method::DiscreteSum))
        }
        _ => {
            let factors = mixing.factors().expect("continuous measure");
            let mut ranges = Vec::with_capacity(factors.len());
            let mut tail = 0.0;
            for (axis, f) in factors.iter().enumerate() {
                let (mut lo, mut hi) = f.support();
                if let Some(e) = event {
                    lo = lo.max(e[axis].0);
                    hi = hi.min(e[axis].1);
                }
                if let (Density1d::Gamma { rate, shape }, true) = (f, hi.is_infinite()) {
                    let (cut, mass) = kernels::gamma_truncation(*rate, *shape, cfg);
                    hi = cut.max(lo);
                    tail += mass;
                }
                ranges.push((lo, hi));
            }
            if ranges.iter().any(|&(lo, hi)| lo >= hi) {
                return Ok((Estimate::exact(0.0), Method::Quadrature));
            }
            let failure: RefCell<Option<Error>> = RefCell::new(None);
            let inner_error = Cell::new(0.0f64);
            let mut theta = vec![0.0; factors.len()];
            let est = integrate_axis(&factors, &ranges, factors.len() - 1, &mut theta, cfg, &g, &failure, &inner_error);
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            match est {
                Ok(est) => Ok((
                    Estimate {
                        value: est.value,
                        error: est.error + inner_error.get() + tail,
                    },
                    Method::Quadrature,
                )),
                Err(Error::Accuracy {
                    estimate,
                    error_estimate,
                    tolerance,
                }) => Err(Error::Accuracy {
                    estimate,
                    error_estimate: error_estimate + inner_error.get() + tail,
                    tolerance,
                }),
                Err(e) => Err(e),
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn integrate_axis<G>(
    factors: &[Density1d],
    ranges: &[(f64, f64)],
    axis: usize,
    theta: &mut [f64],
    cfg: &QuadratureConfig,
    g: &G,
    failure: &RefCell<Option<Error>>,
    inner_error: &Cell<f64>,
) -> Result<Estimate>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    let (lo, hi) = ranges[axis];
    let fixed = theta.to_vec();
    let inner_cfg = cfg.tighter(10.0);
    let integrand = |x: f64| -> f64 {
        if failure.borrow().is_some() {
            return 0.0;
        }
        let dens = factors[axis].density(x);
        if dens == 0.0 {
            return 0.0;
        }
        let mut t = fixed.clone();
        t[axis] = x;
        let inner = if axis == 0 {
            g(&t)
        } else {
            match integrate_axis(factors, ranges, axis - 1, &mut t, &inner_cfg, g, failure, inner_error) {
                Ok(est) => {
                    inner_error.set(inner_error.get().max(est.error));
                    Ok(est.value)
                }
                Err(Error::Accuracy {
                    estimate,
                    error_estimate,
                    ..
                }) => {
                    inner_error.set(inner_error.get().max(error_estimate));
                    Ok(estimate)
                }
                Err(e) => Err(e),
            }
        };
        match inner {
            Ok(v) => dens * v,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    quadrature::integrate(integrand, lo, hi, cfg)
}

fn box_product(model: &MrpModel, query: &BoxQuery, theta: &[f64]) -> Result<f64> {
    let mut p = 1.0;
    for (k, &(a, b)) in query.bounds.iter().enumerate() {
        p *= kernels::kernel_interval_probability(&model.kernel, k + 1, theta, a, b)?;
        if p == 0.0 {
            break;
        }
    }
    Ok(p)
}

/// `P(W_k in (a_k, b_k] for k = 1..r)`.
pub fn joint_interarrival_probability(model: &MrpModel, query: &BoxQuery, cfg: &QuadratureConfig) -> Result<ExactValue> {
    joint_probability_on_event(model, query, None, cfg)
}

/// `P({W in box} ∩ {Θ in event})`; `None` means the whole support.
pub fn joint_probability_on_event(
    model: &MrpModel,
    query: &BoxQuery,
    event: Option<&[(f64, f64)]>,
    cfg: &QuadratureConfig,
) -> Result<ExactValue> {
    check_dimension(query, cfg)?;
    check_event(model, event)?;
    let (est, method) = integrate_mixture(&model.mixing, event, cfg, |theta| box_product(model, query, theta))?;
    Ok(ExactValue {
        probability: est.value.clamp(0.0, 1.0),
        error: est.error,
        method,
    })
}

/// Closed form of `P(W_1 <= w1, W_2 <= w2)` for `Q_n(θ) = Exp(nθ)` mixed
/// over `Ga(2, 1)`.
pub fn example16_closed_form(w1: f64, w2: f64) -> Result<f64> {
    if !(w1 >= 0.0) {
        return Err(Error::domain("w1", w1, "argument must be nonnegative"));
    }
    if !(w2 >= 0.0) {
        return Err(Error::domain("w2", w2, "argument must be nonnegative"));
    }
    Ok(w2 / (w2 + 1.0) - 2.0 * (1.0 / (w1 + 2.0) - 1.0 / (w1 + 2.0 * w2 + 2.0)))
}

/// `P(N_t = n)` for an index-constant Exponential or Gamma kernel.
///
/// Given θ the arrival `T_n` is `Ga(rate, n * shape)`, so
/// `P(N_t = n | θ) = P(n s, λ t) - P((n + 1) s, λ t)` with `F_{T_0} = 1`.
pub fn count_pmf(model: &MrpModel, t: f64, n: usize, cfg: &QuadratureConfig) -> Result<ExactValue> {
    if !model.is_proper_mrp {
        return Err(Error::Unsupported(
            "count law needs an index-constant kernel family".into(),
        ));
    }
    if !matches!(model.kernel.family, Family::Exponential | Family::Gamma) {
        return Err(Error::Unsupported(format!("count law for {:?} kernels", model.kernel.family)));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain("t", t, "time must be nonnegative and finite"));
    }
    cfg.validate()?;
    if t == 0.0 {
        return Ok(ExactValue {
            probability: if n == 0 { 1.0 } else { 0.0 },
            error: 0.0,
            method: Method::ClosedForm,
        });
    }
    let g = |theta: &[f64]| -> Result<f64> {
        let rate = model.kernel.rate(1, theta)?;
        let shape = model.kernel.shape_at(theta)?;
        let x = rate * t;
        let upper_next = special::regularized_upper_incomplete_gamma((n as f64 + 1.0) * shape, x);
        if n == 0 {
            return Ok(upper_next);
        }
        let upper_this = special::regularized_upper_incomplete_gamma(n as f64 * shape, x);
        Ok((upper_next - upper_this).max(0.0))
    };
    let (est, method) = integrate_mixture(&model.mixing, None, cfg, g)?;
    Ok(ExactValue {
        probability: est.value.clamp(0.0, 1.0),
        error: est.error,
        method: match method {
            Method::Quadrature => Method::IncompleteGammaMixture,
            m => m,
        },
    })
}

/// Which explicit density integral applies to a model.
#[derive(Debug, Clone, Copy, PartialEq)]
enum DensityForm {
    /// `Ga(θ, 1/2)` kernel, `Ga(γ, α)` mixing.
    HalfShape { rate: f64, shape: f64 },
    /// `Ga(θ_1, θ_2)` kernel, continuous bivariate mixing.
    Bivariate,
}

fn density_form(model: &MrpModel) -> Result<DensityForm> {
    let k = &model.kernel;
    let unsupported = || {
        Error::Unsupported(
            "density form needs a Ga(θ, 1/2) kernel with Gamma mixing or a Ga(θ1, θ2) kernel with bivariate continuous mixing"
                .into(),
        )
    };
    if k.family != Family::Gamma || k.rate_map != RateMap::CONSTANT {
        return Err(unsupported());
    }
    match (k.shape, &model.mixing) {
        (Some(Shape::Fixed(0.5)), MixingMeasure::Gamma { rate, shape }) => Ok(DensityForm::HalfShape {
            rate: *rate,
            shape: *shape,
        }),
        (Some(Shape::Param { param: 1 }), m) if m.is_continuous() && m.dimension() == 2 => Ok(DensityForm::Bivariate),
        _ => Err(unsupported()),
    }
}

/// `sqrt(θ/π) ∫_(a,b] ω^(-1/2) e^(-θω) dω`, via `ω = v² / θ`.
fn half_shape_box_factor(theta: f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let lo = (theta * a.max(0.0)).sqrt();
    let hi = (theta * b.max(0.0)).sqrt();
    if hi <= lo {
        return Ok(0.0);
    }
    let est = quadrature::integrate_range(|v| (-v * v).exp(), lo, hi, 1.0, cfg)?;
    Ok(2.0 / PI.sqrt() * est.value)
}

/// `θ1^θ2 / Γ(θ2) ∫_(a,b] ω^(θ2-1) e^(-θ1 ω) dω`, via `ω = v^(1/θ2) / θ1`.
fn bivariate_box_factor(theta1: f64, theta2: f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let lo = (theta1 * a.max(0.0)).powf(theta2);
    let hi = (theta1 * b.max(0.0)).powf(theta2);
    if hi <= lo {
        return Ok(0.0);
    }
    let inv = 1.0 / theta2;
    let est = quadrature::integrate_range(|v| (-v.powf(inv)).exp(), lo, hi, 1.0, cfg)?;
    Ok(est.value / special::gamma(theta2 + 1.0))
}

/// `P({W in box} ∩ {Θ in event})` from the explicit density integrals of
/// the half-shape and bivariate Gamma constructions.
pub fn cylinder_probability_density_form(
    model: &MrpModel,
    query: &BoxQuery,
    event: Option<&[(f64, f64)]>,
    cfg: &QuadratureConfig,
) -> Result<ExactValue> {
    check_dimension(query, cfg)?;
    check_event(model, event)?;
    let form = density_form(model)?;
    let inner_cfg = cfg.tighter(10.0);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let record = |r: Result<f64>| -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };

    let est = match form {
        DensityForm::HalfShape { rate, shape } => {
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            if let Some(e) = event {
                lo = lo.max(e[0].0);
                hi = hi.min(e[0].1);
            }
            if lo >= hi {
                return Ok(ExactValue {
                    probability: 0.0,
                    error: 0.0,
                    method: Method::DensityForm,
                });
            }
            let log_norm = shape * rate.ln() - special::ln_gamma(shape);
            let integrand = |theta: f64| -> f64 {
                if theta <= 0.0 || failure.borrow().is_some() {
                    return 0.0;
                }
                let mut prod = 1.0;
                for &(a, b) in &query.bounds {
                    prod *= record(half_shape_box_factor(theta, a, b, &inner_cfg));
                    if prod == 0.0 {
                        return 0.0;
                    }
                }
                prod * (log_norm + (shape - 1.0) * theta.ln() - rate * theta).exp()
            };
            quadrature::integrate_range(integrand, lo, hi, shape / rate, cfg)
        }
        DensityForm::Bivariate => {
            let support = model.mixing.support();
            let mean = model.mixing.mean();
            let mut r = [support[0], support[1]];
            if let Some(e) = event {
                for axis in 0..2 {
                    r[axis].0 = r[axis].0.max(e[axis].0);
                    r[axis].1 = r[axis].1.min(e[axis].1);
                }
            }
            if r.iter().any(|&(lo, hi)| lo >= hi) {
                return Ok(ExactValue {
                    probability: 0.0,
                    error: 0.0,
                    method: Method::DensityForm,
                });
            }
            let inner_error = Cell::new(0.0f64);
            let outer = |theta2: f64| -> f64 {
                if failure.borrow().is_some() || theta2 <= 0.0 {
                    return 0.0;
                }
                let inner = |theta1: f64| -> f64 {
                    if theta1 <= 0.0 || failure.borrow().is_some() {
                        return 0.0;
                    }
                    let dens = record(kernels::mixing_density(&model.mixing, &[theta1, theta2]));
                    if dens == 0.0 {
                        return 0.0;
                    }
                    let mut prod = 1.0;
                    for &(a, b) in &query.bounds {
                        prod *= record(bivariate_box_factor(theta1, theta2, a, b, &inner_cfg));
                        if prod == 0.0 {
                            return 0.0;
                        }
                    }
                    prod * dens
                };
                let est = quadrature::integrate_range(inner, r[0].0, r[0].1, mean[0].max(1e-3), &inner_cfg);
                match est {
                    Ok(e) => {
                        inner_error.set(inner_error.get().max(e.error));
                        e.value
                    }
                    Err(Error::Accuracy {
                        estimate,
                        error_estimate,
                        ..
                    }) => {
                        inner_error.set(inner_error.get().max(error_estimate));
                        estimate
                    }
                    Err(e) => record(Err(e)),
                }
            };
            quadrature::integrate_range(outer, r[1].0, r[1].1, mean[1].max(1e-3), cfg).map(|e| Estimate {
                value: e.value,
                error: e.error + inner_error.get(),
            })
        }
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let est = est?;
    Ok(ExactValue {
        probability: est.value.clamp(0.0, 1.0),
        error: est.error,
        method: Method::DensityForm,
    })
}
