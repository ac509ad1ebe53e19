//! Permutation test of exchangeability of the first `r` interarrival times.
//!
//! The statistic is `D = max_{w, pi} |F(w) - F(w o pi)|` over a set of probe
//! points `w` and coordinate permutations `pi`, where `F` is the empirical
//! joint CDF. Its null law is obtained by permuting the coordinates of each
//! path independently and uniformly at random. Paths are first reduced to
//! their tuple of cells relative to every probe coordinate, which leaves `F`
//! at each probe unchanged and lets a resample be drawn as a multinomial
//! split of each tuple's count over the permutation group.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::construction::{rng_from_seed, Ensemble};
use crate::error::{Error, Result};
use crate::report::{Component, Rule, VerificationReport};

/// Largest `r` for which the full permutation group is enumerated.
const FULL_GROUP_MAX_R: usize = 4;
/// Permutations sampled when `r!` is too large to enumerate.
const SAMPLED_PERMUTATIONS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeabilityOptions {
    pub r: usize,
    /// Number of within-path permutation resamples `B`.
    pub n_resamples: usize,
    /// Probe points of length `r`; `f64::INFINITY` leaves a coordinate free.
    /// `None` selects the default grid.
    pub probes: Option<Vec<Vec<f64>>>,
    pub level: f64,
    pub seed: u64,
}

impl Default for ExchangeabilityOptions {
    fn default() -> Self {
        Self {
            r: 2,
            n_resamples: 999,
            probes: None,
            level: 0.01,
            seed: 0,
        }
    }
}

pub fn exchangeability_test(ensemble: &Ensemble, opts: &ExchangeabilityOptions) -> Result<VerificationReport> {
    let rows: Vec<&[f64]> = ensemble.paths.iter().map(|p| p.interarrivals.as_slice()).collect();
    let mut report = exchangeability_test_rows(&rows, opts)?;
    report.seeds.insert(0, ensemble.meta.root_seed);
    Ok(report)
}

/// Same test on raw rows; each row must hold at least `r` values.
pub fn exchangeability_test_rows<T: AsRef<[f64]>>(rows: &[T], opts: &ExchangeabilityOptions) -> Result<VerificationReport> {
    let r = opts.r;
    if r < 2 {
        return Err(Error::Degenerate(format!("exchangeability of {r} coordinate(s) holds trivially")));
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if opts.n_resamples == 0 {
        return Err(Error::Config("n_resamples must be positive".into()));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::domain("level", opts.level, "level must lie in (0, 1)"));
    }
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() < r {
            return Err(Error::Config(format!("path {i} has {} interarrivals, fewer than r = {r}", row.len())));
        }
        if let Some(&x) = row[..r].iter().find(|x| x.is_nan()) {
            return Err(Error::domain("interarrival", x, "NaN in data"));
        }
    }

    let probes = match &opts.probes {
        Some(p) => {
            if p.is_empty() {
                return Err(Error::Config("probe set is empty".into()));
            }
            for probe in p {
                if probe.len() != r || probe.iter().any(|v| v.is_nan()) {
                    return Err(Error::Config(format!("probe {probe:?} must have {r} non-NaN coordinates")));
                }
            }
            p.clone()
        }
        None => default_probes(rows, r)?,
    };

    let mut rng = rng_from_seed(opts.seed);
    let perms = if r <= FULL_GROUP_MAX_R {
        all_permutations(r)
    } else {
        let mut ps = vec![(0..r).collect::<Vec<_>>()];
        while ps.len() < SAMPLED_PERMUTATIONS {
            let mut p: Vec<usize> = (0..r).collect();
            p.shuffle(&mut rng);
            ps.push(p);
        }
        ps
    };

    // cut points: every finite probe coordinate
    let mut cuts: Vec<f64> = probes.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    if cuts.len() >= u16::MAX as usize {
        return Err(Error::Config("too many distinct probe coordinates".into()));
    }
    let cell = |x: f64| cuts.partition_point(|&c| c < x) as u16;
    let probe_index = |v: f64| if v.is_finite() { cuts.partition_point(|&c| c < v) as u16 } else { cuts.len() as u16 };

    // evaluation points: all probe permutations, deduplicated
    let mut points: Vec<Vec<u16>> = Vec::new();
    let mut point_id: HashMap<Vec<u16>, usize> = HashMap::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for probe in &probes {
        let idx: Vec<u16> = probe.iter().map(|&v| probe_index(v)).collect();
        let mut intern = |v: Vec<u16>| {
            *point_id.entry(v.clone()).or_insert_with(|| {
                points.push(v);
                points.len() - 1
            })
        };
        let base = intern(idx.clone());
        for pi in &perms {
            let permuted: Vec<u16> = pi.iter().map(|&k| idx[k]).collect();
            let id = intern(permuted);
            if id != base {
                pairs.push((base, id));
            }
        }
    }

    let mut types: HashMap<Vec<u16>, u64> = HashMap::new();
    for row in rows {
        let t: Vec<u16> = row.as_ref()[..r].iter().map(|&x| cell(x)).collect();
        *types.entry(t).or_insert(0) += 1;
    }
    // sorted so the resampling stream does not depend on hash order
    let mut observed: Vec<(Vec<u16>, u64)> = types.into_iter().collect();
    observed.sort_unstable();
    let n = rows.len() as f64;

    let observed_d = d_statistic(observed.iter().map(|(t, c)| (t.as_slice(), *c)), &points, &pairs, n);

    let mut exceed = 0usize;
    if r <= FULL_GROUP_MAX_R {
        // universe closed under the group: observed tuples and all their images
        let mut universe: Vec<Vec<u16>> = Vec::new();
        let mut uid: HashMap<Vec<u16>, usize> = HashMap::new();
        let images: Vec<Vec<usize>> = observed
            .iter()
            .map(|(t, _)| {
                perms
                    .iter()
                    .map(|pi| {
                        let img: Vec<u16> = pi.iter().map(|&k| t[k]).collect();
                        *uid.entry(img.clone()).or_insert_with(|| {
                            universe.push(img);
                            universe.len() - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let m = perms.len();
        let mut counts = vec![0u64; universe.len()];
        for _ in 0..opts.n_resamples {
            counts.iter_mut().for_each(|c| *c = 0);
            for ((_, c), img) in observed.iter().zip(&images) {
                let mut left = *c;
                for (j, &u) in img.iter().enumerate() {
                    let take = if j + 1 == m { left } else { binomial(left, 1.0 / (m - j) as f64, &mut rng) };
                    counts[u] += take;
                    left -= take;
                    if left == 0 {
                        break;
                    }
                }
            }
            let d = d_statistic(universe.iter().map(|t| t.as_slice()).zip(counts.iter().copied()), &points, &pairs, n);
            if d >= observed_d - 1e-12 {
                exceed += 1;
            }
        }
    } else {
        let mut table: HashMap<Vec<u16>, u64> = HashMap::new();
        for _ in 0..opts.n_resamples {
            table.clear();
            for (t, c) in &observed {
                for _ in 0..*c {
                    let mut img = t.clone();
                    img.shuffle(&mut rng);
                    *table.entry(img).or_insert(0) += 1;
                }
            }
            let d = d_statistic(table.iter().map(|(t, c)| (t.as_slice(), *c)), &points, &pairs, n);
            if d >= observed_d - 1e-12 {
                exceed += 1;
            }
        }
    }

    let p_value = (1 + exceed) as f64 / (opts.n_resamples + 1) as f64;
    let mut report = VerificationReport::new("exchangeability");
    report.statistic = observed_d;
    report.p_value = Some(p_value);
    report.level = Some(opts.level);
    report.seeds.push(opts.seed);
    report.size("paths", rows.len() as u64);
    report.size("resamples", opts.n_resamples as u64);
    report.size("probes", probes.len() as u64);
    report.size("permutations", perms.len() as u64);
    report.push(
        Component::new("max_cdf_asymmetry", observed_d, Some(p_value), Rule::PValueAbove { alpha: opts.level })
            .with_note(format!("r = {r}, null by within-path permutation, B = {}", opts.n_resamples)),
    );
    if r > FULL_GROUP_MAX_R {
        report.caveat(format!("r! too large to enumerate; {SAMPLED_PERMUTATIONS} permutations sampled for the statistic"));
    }
    report.caveat("equivalence of exchangeability and mixing is taken unconditionally (standard Borel state space)");
    Ok(report)
}

/// Pooled quartile grid plus the two asymmetric probes `(2, 1)` and `(1, 2)`,
/// padded with `+inf` beyond the second coordinate. Pooling across
/// coordinates keeps the probe set invariant under within-path permutation.
fn default_probes<T: AsRef<[f64]>>(rows: &[T], r: usize) -> Result<Vec<Vec<f64>>> {
    if r > FULL_GROUP_MAX_R {
        return Err(Error::Config(format!("default probe grid supports r <= {FULL_GROUP_MAX_R}; pass probes explicitly")));
    }
    let mut pooled: Vec<f64> = rows.iter().flat_map(|row| row.as_ref()[..r].iter().copied()).collect();
    pooled.sort_by(f64::total_cmp);
    let q = |p: f64| pooled[((p * pooled.len() as f64).ceil() as usize).clamp(1, pooled.len()) - 1];
    let mut levels = vec![q(0.25), q(0.5), q(0.75)];
    levels.dedup();
    let mut probes: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..r {
        probes = probes
            .into_iter()
            .flat_map(|p| {
                levels.iter().map(move |&l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    for head in [[2.0, 1.0], [1.0, 2.0]] {
        let mut p = head.to_vec();
        p.resize(r, f64::INFINITY);
        probes.push(p);
    }
    Ok(probes)
}

fn d_statistic<'a, I>(table: I, points: &[Vec<u16>], pairs: &[(usize, usize)], n: f64) -> f64
where
    I: Iterator<Item = (&'a [u16], u64)>,
{
    let mut f = vec![0u64; points.len()];
    for (t, c) in table {
        if c == 0 {
            continue;
        }
        for (fi, p) in f.iter_mut().zip(points) {
            if t.iter().zip(p).all(|(a, b)| a <= b) {
                *fi += c;
            }
        }
    }
    pairs
        .iter()
        .map(|&(a, b)| (f[a] as f64 - f[b] as f64).abs() / n)
        .fold(0.0, f64::max)
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

pub(crate) fn all_permutations(r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..r).collect();
    permute(&mut current, 0, &mut out);
    out.sort();
    out
}

fn permute(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == v.len() {
        out.push(v.clone());
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, out);
        v.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{build_model, simulate_ensemble};
    use crate::kernels::{KernelSpec, MixingMeasure};

    #[test]
    fn permutations_enumerated() {
        assert_eq!(all_permutations(3).len(), 6);
        assert_eq!(all_permutations(4).len(), 24);
        assert_eq!(all_permutations(2), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn r_below_two_is_degenerate() {
        let rows = vec![vec![1.0, 2.0]];
        let opts = ExchangeabilityOptions { r: 1, ..Default::default() };
        assert!(matches!(exchangeability_test_rows(&rows, &opts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn symmetric_data_has_zero_statistic() {
        // a set of rows closed under permutation has a symmetric empirical CDF
        let mut rows = Vec::new();
        for base in [[0.3, 1.7, 2.2], [1.0, 1.5, 0.4]] {
            for p in all_permutations(3) {
                rows.push(p.iter().map(|&k| base[k]).collect::<Vec<f64>>());
            }
        }
        let opts = ExchangeabilityOptions { r: 3, n_resamples: 99, ..Default::default() };
        let rep = exchangeability_test_rows(&rows, &opts).unwrap();
        assert_eq!(rep.statistic, 0.0);
        assert_eq!(rep.p_value, Some(1.0));
        assert!(rep.passed);
        // constant rows likewise
        let rows = vec![vec![1.25, 1.25]; 40];
        let rep = exchangeability_test_rows(&rows, &ExchangeabilityOptions::default()).unwrap();
        assert_eq!(rep.statistic, 0.0);
        assert!(rep.passed);
    }

    #[test]
    fn iid_accepts_and_indexed_rate_rejects() {
        let iid = build_model(KernelSpec::gamma(0.5), MixingMeasure::gamma(2.0, 3.0)).unwrap();
        let ens = simulate_ensemble(&iid, 20_000, 2, 11).unwrap();
        let rep = exchangeability_test(&ens, &ExchangeabilityOptions { seed: 3, ..Default::default() }).unwrap();
        assert!(rep.p_value.unwrap() > 0.001, "{}", rep.to_text());
        assert!(rep.rejudge());

        let indexed = build_model(KernelSpec::exponential().with_rate_map(1.0, 0.0), MixingMeasure::gamma(2.0, 1.0)).unwrap();
        let ens = simulate_ensemble(&indexed, 20_000, 2, 11).unwrap();
        let rep = exchangeability_test(&ens, &ExchangeabilityOptions { seed: 3, ..Default::default() }).unwrap();
        assert!(!rep.passed);
        assert!(rep.p_value.unwrap() <= 0.01);
    }

    #[test]
    fn sampled_group_for_large_r() {
        let iid = build_model(KernelSpec::exponential(), MixingMeasure::gamma(1.0, 2.0)).unwrap();
        let ens = simulate_ensemble(&iid, 2_000, 6, 5).unwrap();
        let probes = vec![vec![0.5; 6], vec![1.0, 0.2, f64::INFINITY, 0.7, 2.0, 0.1]];
        let opts = ExchangeabilityOptions { r: 6, n_resamples: 99, probes: Some(probes), ..Default::default() };
        let rep = exchangeability_test(&ens, &opts).unwrap();
        assert!(rep.p_value.unwrap() > 0.001);
        assert_eq!(rep.sample_sizes["permutations"], 24);
    }

    #[test]
    fn probe_length_checked() {
        let rows = vec![vec![1.0, 2.0]; 10];
        let opts = ExchangeabilityOptions { probes: Some(vec![vec![1.0]]), ..Default::default() };
        assert!(matches!(exchangeability_test_rows(&rows, &opts), Err(Error::Config(_))));
    }
}
