//! Interarrival, arrival and counting representations of one path, and the
//! counting-process axiom validator for sampled step functions.
//!
//! Arrival times are accumulated with Neumaier compensation and kept as a
//! `(time, residual)` pair per event. Differencing uses the residuals, so
//! `W -> T -> W` reproduces the interarrivals bit for bit on realistic data
//! (long paths included).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{Component, Rule, VerificationReport};

/// Arrival times `T_0 = 0 < T_1 < ... < T_n` with compensation residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrivals {
    times: Vec<f64>,
    residuals: Vec<f64>,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

impl Arrivals {
    /// Arrivals from observed event times (no residual information).
    pub fn from_event_times(event_times: &[f64]) -> Result<Self> {
        let mut times = Vec::with_capacity(event_times.len() + 1);
        times.push(0.0);
        for (i, &t) in event_times.iter().enumerate() {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::Ingestion(format!("event time #{} = {t} is not a positive finite number", i + 1)));
            }
            if t <= times[times.len() - 1] {
                return Err(Error::Ingestion(format!(
                    "event times must be strictly increasing; #{} = {t} follows {}",
                    i + 1,
                    times[times.len() - 1]
                )));
            }
            times.push(t);
        }
        let residuals = vec![0.0; times.len()];
        Ok(Self { times, residuals })
    }

    /// `T_0..T_n`, including the leading zero.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `T_1..T_n`.
    pub fn event_times(&self) -> &[f64] {
        &self.times[1..]
    }

    pub fn n_events(&self) -> usize {
        self.times.len() - 1
    }

    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn interarrivals(&self) -> Vec<f64> {
        interarrivals_from_arrivals(self)
    }
}

/// `T_n = W_1 + ... + W_n`, with `T_0 = 0`.
pub fn arrivals_from_interarrivals(interarrivals: &[f64]) -> Result<Arrivals> {
    let mut times = Vec::with_capacity(interarrivals.len() + 1);
    let mut residuals = Vec::with_capacity(interarrivals.len() + 1);
    times.push(0.0);
    residuals.push(0.0);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (i, &w) in interarrivals.iter().enumerate() {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidInterarrival { index: i + 1, value: w });
        }
        let t = sum + w;
        if sum.abs() >= w.abs() {
            comp += (sum - t) + w;
        } else {
            comp += (w - t) + sum;
        }
        sum = t;
        let (hi, lo) = two_sum(sum, comp);
        if hi <= times[i] {
            // the increment vanished in the rounding of T
            return Err(Error::InvalidInterarrival { index: i + 1, value: w });
        }
        times.push(hi);
        residuals.push(lo);
    }
    Ok(Arrivals { times, residuals })
}

/// `W_k = T_k - T_{k-1}`, evaluated on the compensated representation.
pub fn interarrivals_from_arrivals(arrivals: &Arrivals) -> Vec<f64> {
    arrivals
        .times
        .windows(2)
        .zip(arrivals.residuals.windows(2))
        .map(|(t, r)| {
            let (d, e) = two_sum(t[1], -t[0]);
            d + (e + (r[1] - r[0]))
        })
        .collect()
}

/// Observed counting path: event times up to an observation horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingPath {
    arrivals: Arrivals,
    horizon: f64,
}

impl CountingPath {
    pub fn new(event_times: &[f64], horizon: f64) -> Result<Self> {
        Self::from_arrivals(Arrivals::from_event_times(event_times)?, horizon)
    }

    pub fn from_arrivals(arrivals: Arrivals, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || horizon < arrivals.last() {
            return Err(Error::Config(format!(
                "horizon {horizon} must be positive and at least the last event time {}",
                arrivals.last()
            )));
        }
        Ok(Self { arrivals, horizon })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn event_times(&self) -> &[f64] {
        self.arrivals.event_times()
    }

    /// `N_t = #{k : T_k <= t}`.
    pub fn count_at(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(Error::domain("t", t, "time must be nonnegative"));
        }
        if t > self.horizon {
            return Err(Error::OutOfHorizon { t, horizon: self.horizon });
        }
        Ok(self.event_times().partition_point(|&tk| tk <= t))
    }

    /// `(t, N_t)` at the origin, at every jump, and at the horizon.
    pub fn step_samples(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.arrivals.n_events() + 2);
        out.push((0.0, 0.0));
        for (k, &t) in self.event_times().iter().enumerate() {
            out.push((t, (k + 1) as f64));
        }
        if self.horizon > self.arrivals.last() {
            out.push((self.horizon, self.arrivals.n_events() as f64));
        }
        out
    }
}

/// Recovers `T_n = inf{t : N_t = n}` from the step function.
pub fn arrivals_from_counting(path: &CountingPath) -> Arrivals {
    // the infimum of {N_t = n} is attained at the n-th jump of the
    // right-continuous step function, i.e. at the stored event time.
    let jumps = path.event_times();
    let mut times = Vec::with_capacity(jumps.len() + 1);
    let mut residuals = Vec::with_capacity(jumps.len() + 1);
    times.push(0.0);
    residuals.push(0.0);
    for n in 1..=jumps.len() {
        let idx = jumps.partition_point(|&t| {
            // N_t < n  <=>  fewer than n jumps at or before t
            jumps.partition_point(|&u| u <= t) < n
        });
        times.push(jumps[idx]);
        residuals.push(path.arrivals.residuals[idx + 1]);
    }
    Arrivals { times, residuals }
}

/// Checks the counting-process axioms on `(t, N_t)` samples sorted by `t`.
///
/// Right-continuity and unit jumps can only be judged on the sample grid:
/// a jump of two or more between adjacent samples is reported as a
/// violation, which assumes the grid resolves every interarrival.
pub fn validate_counting_axioms(samples: &[(f64, f64)]) -> Result<VerificationReport> {
    if let Some(i) = samples.iter().position(|(t, _)| !t.is_finite()) {
        return Err(Error::Ingestion(format!("sample #{i} has a non-finite time")));
    }
    if let Some(i) = samples.windows(2).position(|w| w[1].0 < w[0].0) {
        return Err(Error::Ingestion(format!("samples are not sorted by t at row {}", i + 1)));
    }
    let mut report = VerificationReport::new("counting-axioms");
    report.size("samples", samples.len() as u64);

    // (n1)
    let origin: Vec<f64> = samples.iter().filter(|(t, _)| *t == 0.0).map(|(_, n)| *n).collect();
    if origin.is_empty() {
        report.push(
            Component::new("n1: N_0 = 0", 0.0, None, Rule::Informational).with_note("no sample at t = 0; not observable"),
        );
    } else {
        let worst = origin.iter().fold(0.0f64, |m, n| m.max(n.abs()));
        report.push(Component::new("n1: N_0 = 0", worst, None, Rule::StatisticAtMost { bound: 0.0 }).with_reference(0.0));
    }

    // (n2)
    let bad_values = samples
        .iter()
        .filter(|(_, n)| !(n.is_finite() && *n >= 0.0 && n.fract() == 0.0))
        .count();
    report.push(Component::new("n2: N_t in N_0", bad_values as f64, None, Rule::StatisticAtMost { bound: 0.0 }));

    // (n3): on the grid, N_t must equal the smallest later value, so the
    // sampled function is nondecreasing and single-valued at repeated t.
    let mut drops = 0usize;
    let mut suffix_min = f64::INFINITY;
    for (i, &(t, n)) in samples.iter().enumerate().rev() {
        if n > suffix_min {
            drops += 1;
        }
        if i + 1 < samples.len() && samples[i + 1].0 == t && samples[i + 1].1 != n {
            drops += 1;
        }
        suffix_min = suffix_min.min(n);
    }
    report.push(Component::new(
        "n3: right-continuous nondecreasing",
        drops as f64,
        None,
        Rule::StatisticAtMost { bound: 0.0 },
    ));

    // (n4)
    let mut running_max = f64::NEG_INFINITY;
    let mut max_jump = 0.0f64;
    for &(_, n) in samples {
        if running_max.is_finite() {
            max_jump = max_jump.max(n - running_max);
        }
        running_max = running_max.max(n);
    }
    report.push(
        Component::new("n4: unit jumps", max_jump, None, Rule::StatisticAtMost { bound: 1.0 })
            .with_note("grid assumed finer than the smallest interarrival"),
    );

    // (n5)
    let observed_max = samples.iter().map(|(_, n)| *n).fold(0.0f64, f64::max);
    report.push(
        Component::new("n5: sup N_t = infinity", observed_max, None, Rule::Informational)
            .with_note("not falsifiable on finite data; observed maximum reported"),
    );

    report.statistic = report
        .components
        .iter()
        .filter(|c| !c.passed)
        .count() as f64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_sums() {
        let a = arrivals_from_interarrivals(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(a.times(), &[0.0, 1.0, 3.0, 6.0]);
        assert_eq!(arrivals_from_interarrivals(&[]).unwrap().times(), &[0.0]);
    }

    #[test]
    fn nonpositive_interarrival_names_index() {
        match arrivals_from_interarrivals(&[1.0, 0.0, 2.0]) {
            Err(Error::InvalidInterarrival { index, .. }) => assert_eq!(index, 2),
            other => panic!("{other:?}"),
        }
        assert!(arrivals_from_interarrivals(&[1.0, -3.0]).is_err());
    }

    #[test]
    fn differencing_is_exact_for_decimal_inputs() {
        let w = vec![0.1, 0.2, 0.3, 0.7, 1e-3, 123.456];
        let a = arrivals_from_interarrivals(&w).unwrap();
        assert_eq!(a.interarrivals(), w);
    }

    #[test]
    fn long_path_round_trip() {
        let w: Vec<f64> = (0..1_000_000u64).map(|i| 0.1 + ((i * 7919) % 1000) as f64 * 1.37e-3).collect();
        let a = arrivals_from_interarrivals(&w).unwrap();
        let back = a.interarrivals();
        assert!(back.iter().zip(&w).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn count_at_examples() {
        let p = CountingPath::new(&[1.0, 3.0, 6.0], 10.0).unwrap();
        assert_eq!(p.count_at(3.0).unwrap(), 2);
        assert_eq!(p.count_at(0.0).unwrap(), 0);
        assert_eq!(p.count_at(2.999).unwrap(), 1);
        assert_eq!(p.count_at(10.0).unwrap(), 3);
        assert!(matches!(p.count_at(10.5), Err(Error::OutOfHorizon { .. })));
        assert!(p.count_at(-1.0).is_err());
    }

    #[test]
    fn counting_to_arrivals() {
        let p = CountingPath::new(&[1.0, 3.0, 6.0], 6.0).unwrap();
        assert_eq!(arrivals_from_counting(&p).times(), &[0.0, 1.0, 3.0, 6.0]);
        let p = CountingPath::new(&[5.0], 5.0).unwrap();
        assert_eq!(arrivals_from_counting(&p).times(), &[0.0, 5.0]);
    }

    #[test]
    fn ties_are_rejected() {
        assert!(matches!(CountingPath::new(&[1.0, 1.0], 2.0), Err(Error::Ingestion(_))));
        assert!(CountingPath::new(&[1.0, 2.0], 1.5).is_err());
    }

    #[test]
    fn step_samples_pass_axioms() {
        let p = CountingPath::new(&[0.5, 0.8, 2.0, 2.1], 3.0).unwrap();
        let r = validate_counting_axioms(&p.step_samples()).unwrap();
        assert!(r.passed, "{}", r.to_text());
        assert!(r.rejudge());
    }

    #[test]
    fn double_jump_violates_unit_jumps() {
        // event at 2.0 duplicated: N goes 1 -> 3 between grid points
        let samples = vec![(0.0, 0.0), (1.0, 1.0), (1.5, 1.0), (2.0, 3.0), (2.5, 3.0)];
        let r = validate_counting_axioms(&samples).unwrap();
        assert!(!r.passed);
        let n4 = r.components.iter().find(|c| c.name.starts_with("n4")).unwrap();
        assert!(!n4.passed);
        assert_eq!(n4.statistic, 2.0);
    }

    #[test]
    fn nonzero_origin_violates_n1() {
        let r = validate_counting_axioms(&[(0.0, 1.0), (1.0, 1.0)]).unwrap();
        let n1 = r.components.iter().find(|c| c.name.starts_with("n1")).unwrap();
        assert!(!n1.passed);
        assert!(!r.passed);
    }

    #[test]
    fn decreasing_and_fractional_counts() {
        let r = validate_counting_axioms(&[(0.0, 0.0), (1.0, 2.0), (2.0, 1.0), (3.0, 1.5)]).unwrap();
        let names: Vec<_> = r.components.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        assert!(names.iter().any(|n| n.starts_with("n2")));
        assert!(names.iter().any(|n| n.starts_with("n3")));
    }

    #[test]
    fn unsorted_input_is_an_ingestion_error() {
        assert!(matches!(validate_counting_axioms(&[(1.0, 0.0), (0.5, 0.0)]), Err(Error::Ingestion(_))));
    }
}
