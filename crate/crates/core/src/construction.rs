//! Product construction of a mixed renewal process: draw the structural
//! parameter from the mixing measure, then independent interarrivals
//! `W_k ~ Q_k(theta)`.
//!
//! Paths whose arrivals fail to increase strictly (an interarrival lost to
//! rounding, or an exact zero) are discarded and redrawn; they are never
//! stored. Ensembles derive one child seed per path from the root seed, so
//! the output does not depend on how paths are scheduled across threads.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::counting::{arrivals_from_interarrivals, Arrivals, CountingPath};
use crate::error::{Error, Result};
use crate::kernels::{self, KernelSpec, MixingMeasure};
use crate::quadrature::QuadratureConfig;

/// Upper bound on `n_paths * n_events` held in memory by one ensemble.
pub const MAX_ENSEMBLE_VALUES: u64 = 200_000_000;

const MAX_REDRAWS: usize = 10_000;

pub const SEED_RULE: &str = "child = splitmix64(root ^ splitmix64(path_index + 0x9e3779b97f4a7c15))";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of path `index` under root seed `root`.
pub fn child_seed(root: u64, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrpModel {
    pub kernel: KernelSpec,
    pub mixing: MixingMeasure,
    /// `Q_n(theta)` is the same law for every index.
    pub is_proper_mrp: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MrpModel {
    /// Hex SHA-256 of the canonical JSON of kernel and mixing.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&(&self.kernel, &self.mixing)).expect("model serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn dimension(&self) -> usize {
        self.mixing.dimension()
    }
}

/// Cross-validates a kernel family against a mixing measure.
pub fn build_model(kernel: KernelSpec, mixing: MixingMeasure) -> Result<MrpModel> {
    kernel.validate()?;
    mixing.validate()?;
    if !kernel.has_positive_support() {
        return Err(Error::InvalidInterarrivalLaw(format!(
            "{:?} kernel puts mass at 0",
            kernel.family
        )));
    }
    if mixing.dimension() != kernel.dimension() {
        return Err(Error::Config(format!(
            "kernel reads {} parameter component(s) but the mixing measure has dimension {}",
            kernel.dimension(),
            mixing.dimension()
        )));
    }
    let support = mixing.support();
    for comp in kernel.positive_components() {
        let (lo, _) = support[comp];
        let ok = if mixing.is_continuous() { lo >= 0.0 } else { lo > 0.0 };
        if !ok {
            return Err(Error::Config(format!(
                "mixing support reaches theta[{comp}] = {lo}, outside the kernel's admissible region (0, inf)"
            )));
        }
    }
    if mixing.is_continuous() {
        let mass = kernels::mixing_total_mass(&mixing, &QuadratureConfig::default())?;
        if (mass.value - 1.0).abs() > 1e-8 {
            return Err(Error::Config(format!("mixing measure has total mass {}", mass.value)));
        }
    }
    let is_proper_mrp = kernel.is_index_constant();
    let mut warnings = Vec::new();
    if !is_proper_mrp {
        warnings.push(format!(
            "rate map n -> {} n + {} varies with the index; interarrivals are not identically distributed given theta",
            kernel.rate_map.a, kernel.rate_map.b
        ));
    }
    Ok(MrpModel {
        kernel,
        mixing,
        is_proper_mrp,
        warnings,
    })
}

/// One realization truncated after `n` events.
#[derive(Debug, Clone, PartialEq)]
pub struct MrpPath {
    pub theta: Vec<f64>,
    pub interarrivals: Vec<f64>,
    pub arrivals: Arrivals,
}

impl MrpPath {
    pub fn n_events(&self) -> usize {
        self.interarrivals.len()
    }

    pub fn counting_path(&self) -> CountingPath {
        CountingPath::from_arrivals(self.arrivals.clone(), self.arrivals.last().max(f64::MIN_POSITIVE))
            .expect("arrivals of a stored path are valid")
    }
}

fn draw_interarrivals<R: Rng + ?Sized>(model: &MrpModel, theta: &[f64], n_events: usize, rng: &mut R) -> Result<Option<MrpPath>> {
    let mut w = Vec::with_capacity(n_events);
    for k in 1..=n_events {
        w.push(kernels::kernel_sample(&model.kernel, k, theta, rng)?);
    }
    match arrivals_from_interarrivals(&w) {
        Ok(arrivals) => Ok(Some(MrpPath {
            theta: theta.to_vec(),
            interarrivals: w,
            arrivals,
        })),
        Err(Error::InvalidInterarrival { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn check_events(n_events: usize) -> Result<()> {
    if n_events == 0 {
        return Err(Error::Config("n_events must be at least 1".into()));
    }
    Ok(())
}

/// Draws `(path, number of discarded degenerate draws)`.
pub fn sample_path_counted<R: Rng + ?Sized>(model: &MrpModel, n_events: usize, rng: &mut R) -> Result<(MrpPath, usize)> {
    check_events(n_events)?;
    for rejected in 0..MAX_REDRAWS {
        let theta = kernels::mixing_sample(&model.mixing, rng);
        if let Some(path) = draw_interarrivals(model, &theta, n_events, rng)? {
            return Ok((path, rejected));
        }
    }
    Err(Error::Config(format!("no strictly increasing path in {MAX_REDRAWS} draws")))
}

pub fn sample_path<R: Rng + ?Sized>(model: &MrpModel, n_events: usize, rng: &mut R) -> Result<MrpPath> {
    sample_path_counted(model, n_events, rng).map(|(p, _)| p)
}

/// Path under the disintegrating measure at a fixed `theta`.
pub fn sample_conditional_path<R: Rng + ?Sized>(
    model: &MrpModel,
    theta: &[f64],
    n_events: usize,
    rng: &mut R,
) -> Result<MrpPath> {
    check_events(n_events)?;
    if !model.mixing.contains(theta) {
        return Err(Error::Domain {
            component: "theta".into(),
            value: theta.first().copied().unwrap_or(f64::NAN),
            reason: "parameter point outside the mixing support",
        });
    }
    for _ in 0..MAX_REDRAWS {
        if let Some(path) = draw_interarrivals(model, theta, n_events, rng)? {
            return Ok(path);
        }
    }
    Err(Error::Config(format!("no strictly increasing path in {MAX_REDRAWS} draws")))
}

/// Draws a path and observes it on `[0, horizon]`. Returns theta and the
/// counting path. `max_events` guards against runaway rates.
pub fn sample_counting_path<R: Rng + ?Sized>(
    model: &MrpModel,
    horizon: f64,
    max_events: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, CountingPath)> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::domain("horizon", horizon, "horizon must be positive and finite"));
    }
    'draw: for _ in 0..MAX_REDRAWS {
        let theta = kernels::mixing_sample(&model.mixing, rng);
        let mut w = Vec::new();
        let mut t = 0.0;
        for k in 1.. {
            let x = kernels::kernel_sample(&model.kernel, k, &theta, rng)?;
            if t + x > horizon {
                break;
            }
            t += x;
            w.push(x);
            if w.len() > max_events {
                return Err(Error::Capacity {
                    requested: w.len() as u64,
                    limit: max_events as u64,
                });
            }
        }
        match arrivals_from_interarrivals(&w) {
            Ok(arrivals) => return Ok((theta, CountingPath::from_arrivals(arrivals, horizon)?)),
            Err(Error::InvalidInterarrival { .. }) => continue 'draw,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Config(format!("no strictly increasing path in {MAX_REDRAWS} draws")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub model_hash: String,
    pub root_seed: u64,
    pub seed_rule: String,
    pub n_paths: usize,
    pub n_events: usize,
    /// Paths are cut after this many interarrivals.
    pub truncation: usize,
    pub rejected_draws: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub meta: EnsembleMeta,
    pub paths: Vec<MrpPath>,
}

fn thread_path(model: &MrpModel, n_events: usize, root_seed: u64, index: usize) -> Result<(MrpPath, usize)> {
    let mut rng = rng_from_seed(child_seed(root_seed, index as u64));
    sample_path_counted(model, n_events, &mut rng)
}

pub fn simulate_ensemble(model: &MrpModel, n_paths: usize, n_events: usize, root_seed: u64) -> Result<Ensemble> {
    if n_paths == 0 {
        return Err(Error::Config("n_paths must be at least 1".into()));
    }
    check_events(n_events)?;
    let requested = (n_paths as u64).saturating_mul(n_events as u64);
    if requested > MAX_ENSEMBLE_VALUES {
        return Err(Error::Capacity {
            requested,
            limit: MAX_ENSEMBLE_VALUES,
        });
    }

    #[cfg(feature = "parallel")]
    let drawn: Vec<Result<(MrpPath, usize)>> = {
        use rayon::prelude::*;
        (0..n_paths)
            .into_par_iter()
            .map(|i| thread_path(model, n_events, root_seed, i))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let drawn: Vec<Result<(MrpPath, usize)>> = (0..n_paths).map(|i| thread_path(model, n_events, root_seed, i)).collect();

    let mut paths = Vec::with_capacity(n_paths);
    let mut rejected = 0u64;
    for d in drawn {
        let (p, r) = d?;
        rejected += r as u64;
        paths.push(p);
    }
    Ok(Ensemble {
        meta: EnsembleMeta {
            model_hash: model.hash(),
            root_seed,
            seed_rule: SEED_RULE.to_string(),
            n_paths,
            n_events,
            truncation: n_events,
            rejected_draws: rejected,
        },
        paths,
    })
}

impl Ensemble {
    /// Interarrival `k` (1-based) of every path.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.interarrivals[k - 1]).collect()
    }

    /// CSV with columns `path_id, theta_0.., k, W_k, T_k`; one row per event.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let d = self.paths.first().map_or(0, |p| p.theta.len());
        let mut header = String::from("path_id");
        for j in 0..d {
            header.push_str(&format!(",theta_{j}"));
        }
        header.push_str(",k,W_k,T_k\n");
        out.write_all(header.as_bytes())?;
        let mut line = String::new();
        for (id, path) in self.paths.iter().enumerate() {
            let mut theta = String::new();
            for t in &path.theta {
                theta.push(',');
                theta.push_str(&t.to_string());
            }
            for (k, (w, t)) in path.interarrivals.iter().zip(&path.arrivals.times()[1..]).enumerate() {
                line.clear();
                line.push_str(&id.to_string());
                line.push_str(&theta);
                line.push_str(&format!(",{},{},{}\n", k + 1, w, t));
                out.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }

    pub fn manifest(&self, model: &MrpModel) -> serde_json::Value {
        serde_json::json!({
            "schema_version": 1,
            "model": model,
            "model_hash": self.meta.model_hash,
            "root_seed": self.meta.root_seed,
            "seed_rule": self.meta.seed_rule,
            "n_paths": self.meta.n_paths,
            "n_events": self.meta.n_events,
            "truncation": self.meta.truncation,
            "rejected_draws": self.meta.rejected_draws,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Density1d;

    fn exp_gamma() -> MrpModel {
        build_model(KernelSpec::exponential(), MixingMeasure::gamma(2.0, 1.0)).unwrap()
    }

    fn example16() -> MrpModel {
        build_model(KernelSpec::exponential().with_rate_map(1.0, 0.0), MixingMeasure::gamma(2.0, 1.0)).unwrap()
    }

    #[test]
    fn proper_flag() {
        assert!(exp_gamma().is_proper_mrp);
        let m = example16();
        assert!(!m.is_proper_mrp);
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn bivariate_gamma_accepted() {
        let m = build_model(
            KernelSpec::gamma_with_shape_param(1),
            MixingMeasure::ProductRectangle {
                factors: vec![
                    Density1d::Gamma { rate: 1.0, shape: 2.0 },
                    Density1d::Beta {
                        a: 2.0,
                        b: 2.0,
                        lo: 0.0,
                        hi: 1.0,
                    },
                ],
            },
        )
        .unwrap();
        assert!(m.is_proper_mrp);
    }

    #[test]
    fn admissibility_mismatch_rejected() {
        let err = build_model(
            KernelSpec::exponential(),
            MixingMeasure::ProductRectangle {
                factors: vec![Density1d::Uniform { lo: -1.0, hi: 1.0 }],
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(build_model(KernelSpec::exponential(), MixingMeasure::dirac(vec![0.0])).is_err());
        assert!(build_model(KernelSpec::exponential(), MixingMeasure::dirac(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn poisson_kernel_rejected() {
        assert!(matches!(
            build_model(KernelSpec::poisson(), MixingMeasure::dirac(vec![1.0])),
            Err(Error::InvalidInterarrivalLaw(_))
        ));
    }

    #[test]
    fn dirac_theta_and_determinism() {
        let m = build_model(KernelSpec::exponential(), MixingMeasure::dirac(vec![3.0])).unwrap();
        for s in 0..5 {
            let a = sample_path(&m, 4, &mut rng_from_seed(s)).unwrap();
            let b = sample_path(&m, 4, &mut rng_from_seed(s)).unwrap();
            assert_eq!(a.theta, vec![3.0]);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_event_path() {
        let p = sample_conditional_path(&exp_gamma(), &[1.0], 1, &mut rng_from_seed(3)).unwrap();
        assert_eq!(p.interarrivals.len(), 1);
        assert_eq!(p.arrivals.times()[1], p.interarrivals[0]);
        assert_eq!(p.theta, vec![1.0]);
    }

    #[test]
    fn conditional_outside_support() {
        assert!(sample_conditional_path(&exp_gamma(), &[-1.0], 3, &mut rng_from_seed(3)).is_err());
        assert!(sample_path(&exp_gamma(), 0, &mut rng_from_seed(3)).is_err());
    }

    #[test]
    fn example16_conditional_means() {
        let m = example16();
        let mut rng = rng_from_seed(99);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let p = sample_conditional_path(&m, &[1.0], 2, &mut rng).unwrap();
            s1 += p.interarrivals[0];
            s2 += p.interarrivals[1];
        }
        let (m1, m2) = (s1 / n as f64, s2 / n as f64);
        // Exp(n theta): sd = mean
        assert!((m1 - 1.0).abs() < 4.0 * 1.0 / (n as f64).sqrt());
        assert!((m2 - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn ensemble_reproducible_and_single_path() {
        let m = exp_gamma();
        let a = simulate_ensemble(&m, 50, 3, 42).unwrap();
        let b = simulate_ensemble(&m, 50, 3, 42).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_csv(&mut buf_a).unwrap();
        b.write_csv(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        let one = simulate_ensemble(&m, 1, 3, 42).unwrap();
        let direct = sample_path(&m, 3, &mut rng_from_seed(child_seed(42, 0))).unwrap();
        assert_eq!(one.paths[0], direct);
    }

    #[test]
    fn capacity_error() {
        assert!(matches!(
            simulate_ensemble(&exp_gamma(), 1_000_000_000, 10, 1),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn csv_layout() {
        let e = simulate_ensemble(&exp_gamma(), 2, 2, 5).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "path_id,theta_0,k,W_k,T_k");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[4].starts_with("1,"));
    }

    #[test]
    fn counting_path_within_horizon() {
        let m = build_model(KernelSpec::exponential(), MixingMeasure::dirac(vec![2.0])).unwrap();
        let (theta, p) = sample_counting_path(&m, 5.0, 10_000, &mut rng_from_seed(8)).unwrap();
        assert_eq!(theta, vec![2.0]);
        assert!(p.event_times().iter().all(|&t| t <= 5.0));
        assert_eq!(p.count_at(5.0).unwrap(), p.event_times().len());
    }
}
