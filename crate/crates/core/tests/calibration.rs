//! Each check, run on data generated under its own null, rejects at a rate
//! of at most 1.5 times its nominal level over 200 seeds.

use mrplab::construction::{build_model, child_seed, simulate_ensemble};
use mrplab::exact::{joint_interarrival_probability, BoxQuery};
use mrplab::kernels::{KernelSpec, MixingMeasure};
use mrplab::stats::{self, ExchangeabilityOptions, MixedPoissonOptions};
use mrplab::{MrpModel, QuadratureConfig};

const SEEDS: u64 = 200;
const LEVEL: f64 = 0.05;

fn allowed() -> usize {
    (1.5 * LEVEL * SEEDS as f64).floor() as usize
}

fn gamma_half() -> MrpModel {
    build_model(KernelSpec::gamma(0.5), MixingMeasure::gamma(2.0, 3.0)).unwrap()
}

#[test]
fn exchangeability_calibrated() {
    let m = gamma_half();
    let rejections = (0..SEEDS)
        .filter(|&s| {
            let ens = simulate_ensemble(&m, 2_000, 3, child_seed(100, s)).unwrap();
            let opts = ExchangeabilityOptions {
                r: 3,
                n_resamples: 199,
                level: LEVEL,
                seed: s,
                ..Default::default()
            };
            !stats::exchangeability_test(&ens, &opts).unwrap().passed
        })
        .count();
    assert!(rejections <= allowed(), "{rejections} of {SEEDS}");
}

#[test]
fn conditional_iid_calibrated() {
    let m = build_model(KernelSpec::gamma(2.0), MixingMeasure::gamma(1.0, 2.0)).unwrap();
    let rejections = (0..SEEDS)
        .filter(|&s| !stats::conditional_iid_test(&m, &[1.5], 500, 3, LEVEL, child_seed(200, s)).unwrap().passed)
        .count();
    assert!(rejections <= allowed(), "{rejections} of {SEEDS}");
}

#[test]
fn mixed_poisson_calibrated() {
    let m = build_model(KernelSpec::exponential(), MixingMeasure::gamma(1.0, 2.0)).unwrap();
    let cfg = QuadratureConfig::default();
    let rejections = (0..SEEDS)
        .filter(|&s| {
            let opts = MixedPoissonOptions {
                t_grid: vec![0.5, 2.0],
                h: 1.0,
                n_paths: 2_000,
                level: LEVEL,
                seed: child_seed(300, s),
            };
            let rep = stats::mixed_poisson_check(&m, &opts, &cfg).unwrap();
            // the 4 SE components are not level-LEVEL tests; judge the chi-square ones
            rep.components.iter().any(|c| c.p_value.is_some() && !c.passed)
        })
        .count();
    assert!(rejections <= allowed(), "{rejections} of {SEEDS}");
}

#[test]
fn mc_vs_exact_rarely_fails_under_truth() {
    let m = gamma_half();
    let cfg = QuadratureConfig::default();
    let boxes = vec![BoxQuery::upper(&[0.2, 0.4]), BoxQuery { bounds: vec![(0.1, 1.0)] }];
    let exact: Vec<f64> = boxes
        .iter()
        .map(|b| joint_interarrival_probability(&m, b, &cfg).unwrap().probability)
        .collect();
    let failures = (0..SEEDS)
        .filter(|&s| !stats::mc_vs_exact(&simulate_ensemble(&m, 2_000, 2, child_seed(400, s)).unwrap(), &boxes, &exact).unwrap().passed)
        .count();
    // a 4 SE band leaves about 6e-5 per query
    assert!(failures <= 1, "{failures} of {SEEDS}");
}
