//! Mixed Poisson behaviour of exponential-kernel models.

use crate::construction::{child_seed, rng_from_seed, sample_counting_path, MrpModel};
use crate::error::{Error, Result};
use crate::exact::count_pmf;
use crate::kernels::Family;
use crate::quadrature::QuadratureConfig;
use crate::report::{Component, Rule, VerificationReport};

use super::gof::{chi_square_gof, chi_square_two_sample};

const MAX_EVENTS_PER_PATH: usize = 10_000_000;
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedPoissonOptions {
    pub t_grid: Vec<f64>,
    /// Increment length for the stationarity comparison.
    pub h: f64,
    pub n_paths: usize,
    pub level: f64,
    pub seed: u64,
}

/// For each `t`: pmf chi-square of `N_t` against the exact mixed Poisson
/// pmf, a 4 SE check of `P(N_t = 0)`, and a two-sample chi-square of
/// `N_{t+h} - N_t` against `N_h`. The two samples of the last comparison
/// come from disjoint halves of the paths so they are independent.
pub fn mixed_poisson_check(model: &MrpModel, opts: &MixedPoissonOptions, cfg: &QuadratureConfig) -> Result<VerificationReport> {
    if model.kernel.family != Family::Exponential || !model.is_proper_mrp {
        return Err(Error::Unsupported(
            "mixed Poisson check needs an exponential kernel with an index-free rate".into(),
        ));
    }
    if opts.t_grid.is_empty() {
        return Err(Error::Config("t_grid is empty".into()));
    }
    for &t in &opts.t_grid {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain("t", t, "times must be finite and nonnegative"));
        }
    }
    if !(opts.h > 0.0 && opts.h.is_finite()) {
        return Err(Error::domain("h", opts.h, "increment must be positive"));
    }
    if opts.n_paths < 2 * MIN_EXPECTED as usize {
        return Err(Error::InsufficientData {
            needed: 2 * MIN_EXPECTED as usize,
            got: opts.n_paths,
        });
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::domain("level", opts.level, "level must lie in (0, 1)"));
    }

    let t_max = opts.t_grid.iter().copied().fold(0.0, f64::max);
    let horizon = t_max + opts.h;
    // per path: counts at each t, at t + h, and at h
    let sample = |i: usize| -> Result<(Vec<u64>, Vec<u64>, u64)> {
        let mut rng = rng_from_seed(child_seed(opts.seed, i as u64));
        let (_, path) = sample_counting_path(model, horizon, MAX_EVENTS_PER_PATH, &mut rng)?;
        let at = opts.t_grid.iter().map(|&t| path.count_at(t).map(|c| c as u64)).collect::<Result<Vec<_>>>()?;
        let shifted = opts
            .t_grid
            .iter()
            .map(|&t| path.count_at(t + opts.h).map(|c| c as u64))
            .collect::<Result<Vec<_>>>()?;
        Ok((at, shifted, path.count_at(opts.h)? as u64))
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<(Vec<u64>, Vec<u64>, u64)> = {
        use rayon::prelude::*;
        (0..opts.n_paths).into_par_iter().map(sample).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<(Vec<u64>, Vec<u64>, u64)> = (0..opts.n_paths).map(sample).collect::<Result<_>>()?;

    let n_pos = opts.t_grid.iter().filter(|&&t| t > 0.0).count();
    let n_tests = opts.t_grid.len() + n_pos;
    let alpha = opts.level / n_tests as f64;
    let n = opts.n_paths as f64;
    let half = opts.n_paths / 2;

    let mut report = VerificationReport::new("mixed_poisson");
    report.level = Some(opts.level);
    report.seeds.push(opts.seed);
    report.size("paths", opts.n_paths as u64);
    let mut min_p = 1.0f64;

    for (j, &t) in opts.t_grid.iter().enumerate() {
        let counts: Vec<u64> = rows.iter().map(|r| r.0[j]).collect();
        let max_obs = counts.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = vec![0u64; max_obs + 1];
        for &c in &counts {
            hist[c as usize] += 1;
        }
        // exact pmf far enough that the unlisted tail cannot hold an expected bin
        let mut probs = Vec::new();
        let mut cum = 0.0;
        let mut k = 0usize;
        while k <= max_obs || (1.0 - cum) * n >= MIN_EXPECTED {
            let p = count_pmf(model, t, k, cfg)?.probability;
            probs.push(p);
            cum += p;
            k += 1;
            if k > max_obs + 100_000 {
                break;
            }
        }
        let chi = chi_square_gof(&hist, &probs, MIN_EXPECTED);
        min_p = min_p.min(chi.p_value);
        report.push(
            Component::new(format!("pmf_t={t}"), chi.statistic, Some(chi.p_value), Rule::PValueAbove { alpha })
                .with_note(format!("df = {}, pooled bins = {}", chi.df, chi.bins)),
        );

        let p0 = probs[0];
        let est0 = hist[0] as f64 / n;
        let se = (p0 * (1.0 - p0) / n).sqrt();
        report.push(
            Component::new(format!("p0_t={t}"), (est0 - p0).abs(), None, Rule::StatisticAtMost { bound: 4.0 * se })
                .with_reference(p0)
                .with_note(format!("estimate = {est0}")),
        );

        if t > 0.0 {
            let inc: Vec<u64> = rows[..half].iter().map(|r| r.1[j] - r.0[j]).collect();
            let base: Vec<u64> = rows[half..].iter().map(|r| r.2).collect();
            let chi = chi_square_two_sample(&inc, &base, 2 * MIN_EXPECTED as u64);
            min_p = min_p.min(chi.p_value);
            report.push(
                Component::new(format!("increment_t={t}"), chi.statistic, Some(chi.p_value), Rule::PValueAbove { alpha })
                    .with_note(format!("N(t+h)-N(t) vs N(h), h = {}, df = {}", opts.h, chi.df)),
            );
        }
    }
    report.statistic = report
        .components
        .iter()
        .filter(|c| c.p_value.is_some())
        .map(|c| c.statistic)
        .fold(0.0, f64::max);
    report.p_value = Some(min_p);
    report.caveat(format!("Bonferroni over {n_tests} chi-square tests, per-test alpha = {alpha:e}"));
    Ok(report)
}
