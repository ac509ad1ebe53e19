//! Conditional law of the interarrivals at a fixed parameter point.

use crate::construction::{child_seed, rng_from_seed, sample_conditional_path, MrpModel};
use crate::error::{Error, Result};
use crate::kernels;
use crate::report::{Component, Rule, VerificationReport};

use super::gof::{chi_square_independence, ks_one_sample};

pub const MIN_CONDITIONAL_SAMPLES: usize = 100;
const GRID: usize = 5;

/// Checks that, given `theta`, `W_1..W_max_index` are independent with
/// the kernel law at each index.
///
/// One-sample KS per index and chi-square independence on a 5x5 grid of
/// empirical quintiles per pair, Bonferroni-corrected over all tests.
pub fn conditional_iid_test(
    model: &MrpModel,
    theta: &[f64],
    n_samples: usize,
    max_index: usize,
    level: f64,
    seed: u64,
) -> Result<VerificationReport> {
    if n_samples < MIN_CONDITIONAL_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_CONDITIONAL_SAMPLES,
            got: n_samples,
        });
    }
    if max_index == 0 {
        return Err(Error::Config("max_index must be at least 1".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("level", level, "level must lie in (0, 1)"));
    }

    let mut columns = vec![Vec::with_capacity(n_samples); max_index];
    for i in 0..n_samples {
        let mut rng = rng_from_seed(child_seed(seed, i as u64));
        let path = sample_conditional_path(model, theta, max_index, &mut rng)?;
        for (col, &w) in columns.iter_mut().zip(&path.interarrivals) {
            col.push(w);
        }
    }

    let n_tests = max_index + max_index * (max_index - 1) / 2;
    let alpha = level / n_tests as f64;
    let mut report = VerificationReport::new("conditional_iid");
    report.level = Some(level);
    report.seeds.push(seed);
    report.size("samples", n_samples as u64);
    report.size("indices", max_index as u64);

    let mut min_p = 1.0f64;
    for (k, col) in columns.iter().enumerate() {
        // surfaces parameter errors once; the closure below cannot fail afterwards
        kernels::kernel_cdf(&model.kernel, k + 1, theta, 1.0)?;
        let ks = ks_one_sample(col, |x| kernels::kernel_cdf(&model.kernel, k + 1, theta, x).unwrap_or(f64::NAN));
        min_p = min_p.min(ks.p_value);
        report.push(Component::new(format!("ks_index_{}", k + 1), ks.statistic, Some(ks.p_value), Rule::PValueAbove { alpha }));
    }

    let bins: Vec<Vec<usize>> = columns.iter().map(|c| quantile_bins(c, GRID)).collect();
    for j in 0..max_index {
        for k in j + 1..max_index {
            let mut table = vec![vec![0u64; GRID]; GRID];
            for (&a, &b) in bins[j].iter().zip(&bins[k]) {
                table[a][b] += 1;
            }
            let chi = chi_square_independence(&table);
            min_p = min_p.min(chi.p_value);
            report.push(
                Component::new(format!("independence_{}_{}", j + 1, k + 1), chi.statistic, Some(chi.p_value), Rule::PValueAbove { alpha })
                    .with_note(format!("df = {}", chi.df)),
            );
        }
    }
    report.statistic = report.components.iter().map(|c| c.statistic).fold(0.0, f64::max);
    report.p_value = Some(min_p);
    report.caveat(format!("Bonferroni over {n_tests} tests, per-test alpha = {alpha:e}"));
    Ok(report)
}

/// Bin index of each value among `g` bins cut at empirical quantiles.
fn quantile_bins(values: &[f64], g: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cuts: Vec<f64> = (1..g).map(|i| sorted[(i * n / g).min(n - 1)]).collect();
    values.iter().map(|&x| cuts.partition_point(|&c| c <= x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::build_model;
    use crate::kernels::{KernelSpec, MixingMeasure};

    #[test]
    fn passes_on_proper_model() {
        let m = build_model(KernelSpec::gamma(0.5), MixingMeasure::gamma(2.0, 3.0)).unwrap();
        let rep = conditional_iid_test(&m, &[1.3], 2_000, 3, 0.01, 9).unwrap();
        assert!(rep.passed, "{}", rep.to_text());
        assert_eq!(rep.components.len(), 6);
        assert!(rep.rejudge());
    }

    #[test]
    fn too_few_samples() {
        let m = build_model(KernelSpec::exponential(), MixingMeasure::gamma(2.0, 3.0)).unwrap();
        assert!(matches!(
            conditional_iid_test(&m, &[1.0], 50, 2, 0.01, 1),
            Err(Error::InsufficientData { needed: 100, got: 50 })
        ));
    }

    #[test]
    fn theta_outside_support() {
        let m = build_model(KernelSpec::exponential(), MixingMeasure::gamma(2.0, 3.0)).unwrap();
        assert!(matches!(conditional_iid_test(&m, &[-1.0], 200, 2, 0.01, 1), Err(Error::Domain { .. })));
    }

    #[test]
    fn quintile_bins_balanced() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b = quantile_bins(&v, 5);
        for g in 0..5 {
            assert_eq!(b.iter().filter(|&&x| x == g).count(), 20);
        }
    }
}
