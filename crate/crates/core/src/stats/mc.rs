//! Monte Carlo box frequencies against exact probabilities.

use crate::construction::Ensemble;
use crate::error::{Error, Result};
use crate::exact::BoxQuery;
use crate::report::{Component, Rule, VerificationReport};

/// Number of standard errors allowed between estimate and exact value.
pub const SE_MULTIPLIER: f64 = 4.0;

/// Empirical frequency of `query` over the ensemble's paths.
pub fn box_frequency(ensemble: &Ensemble, query: &BoxQuery) -> Result<f64> {
    let r = query.dimension();
    if ensemble.meta.n_events < r {
        return Err(Error::Config(format!(
            "query uses {r} interarrivals but paths hold {}",
            ensemble.meta.n_events
        )));
    }
    if ensemble.paths.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let hits = ensemble
        .paths
        .iter()
        .filter(|p| p.interarrivals.iter().zip(&query.bounds).all(|(&w, &(a, b))| a < w && w <= b))
        .count();
    Ok(hits as f64 / ensemble.paths.len() as f64)
}

/// Passes iff every estimate lies within `4 * sqrt(p (1 - p) / N)` of its
/// exact probability `p`.
pub fn mc_vs_exact(ensemble: &Ensemble, queries: &[BoxQuery], exact: &[f64]) -> Result<VerificationReport> {
    if queries.len() != exact.len() {
        return Err(Error::Config(format!("{} queries but {} exact values", queries.len(), exact.len())));
    }
    let n = ensemble.paths.len() as f64;
    let mut report = VerificationReport::new("mc_vs_exact");
    report.seeds.push(ensemble.meta.root_seed);
    report.size("paths", ensemble.paths.len() as u64);
    report.size("queries", queries.len() as u64);
    let mut worst = 0.0f64;
    for (i, (q, &p)) in queries.iter().zip(exact).enumerate() {
        q.validate()?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain("exact probability", p, "must lie in [0, 1]"));
        }
        let est = box_frequency(ensemble, q)?;
        let se = (p * (1.0 - p) / n).sqrt();
        let diff = (est - p).abs();
        if se > 0.0 {
            worst = worst.max(diff / se);
        } else if diff > 0.0 {
            worst = f64::INFINITY;
        }
        report.push(
            Component::new(format!("query_{i}"), diff, None, Rule::StatisticAtMost { bound: SE_MULTIPLIER * se })
                .with_reference(p)
                .with_note(format!("estimate = {est}")),
        );
    }
    report.statistic = worst;
    report.caveat("no multiplicity correction across queries; the 4 SE band is per query");
    Ok(report)
}
