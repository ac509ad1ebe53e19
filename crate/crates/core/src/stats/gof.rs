//! Kolmogorov–Smirnov and Pearson chi-square building blocks.

use crate::special;

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form converges fast for small lambda
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        let mut k = 1i32;
        loop {
            let term = y.powi(k * k);
            s += term;
            if term < 1e-17 {
                break;
            }
            k += 2;
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with the Stephens small-sample correction.
pub fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sn = effective_n.sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS distance of `data` against `cdf`. `data` need not be sorted.
pub fn ks_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> KsResult {
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    }
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    }
}

/// Upper tail of the chi-square law with `df` degrees of freedom.
pub fn chi_square_p_value(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    if statistic <= 0.0 {
        return 1.0;
    }
    special::regularized_upper_incomplete_gamma(df as f64 / 2.0, statistic / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub bins: usize,
}

/// Pearson goodness of fit of category counts against probabilities.
///
/// Categories are merged left to right until each merged bin expects at
/// least `min_expected` observations; the final bin absorbs the remaining
/// probability mass `1 - sum(probs)` and any leftover categories.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> ChiSquareResult {
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let len = observed.len().max(probs.len());
    let mut bins: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc = (0.0, 0.0);
    for i in 0..len {
        acc.0 += observed.get(i).copied().unwrap_or(0) as f64;
        acc.1 += probs.get(i).copied().unwrap_or(0.0) * nf;
        if acc.1 >= min_expected {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    let leftover_mass = (1.0 - probs.iter().sum::<f64>()).max(0.0) * nf;
    acc.1 += leftover_mass;
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match bins.last_mut() {
            Some(last) if acc.1 < min_expected => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            _ => bins.push(acc),
        }
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let df = bins.len().saturating_sub(1);
    ChiSquareResult {
        statistic,
        df,
        p_value: if statistic.is_finite() { chi_square_p_value(statistic, df) } else { 0.0 },
        bins: bins.len(),
    }
}

/// Pearson test of independence on a contingency table.
pub fn chi_square_independence(table: &[Vec<u64>]) -> ChiSquareResult {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let ncol = table.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..ncol).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let n: f64 = rows.iter().sum();
    let mut statistic = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                statistic += (o as f64 - e).powi(2) / e;
            }
        }
    }
    let live_rows = rows.iter().filter(|&&r| r > 0.0).count();
    let live_cols = cols.iter().filter(|&&c| c > 0.0).count();
    let df = live_rows.saturating_sub(1) * live_cols.saturating_sub(1);
    ChiSquareResult {
        statistic,
        df,
        p_value: chi_square_p_value(statistic, df),
        bins: live_rows * live_cols,
    }
}

/// Two-sample chi-square homogeneity test on nonnegative integer samples.
/// Categories are merged from the right until every merged category holds
/// at least `min_count` combined observations.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_count: u64) -> ChiSquareResult {
    let max = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ca = vec![0u64; max + 1];
    let mut cb = vec![0u64; max + 1];
    for &x in a {
        ca[x as usize] += 1;
    }
    for &x in b {
        cb[x as usize] += 1;
    }
    let (mut ma, mut mb) = (Vec::new(), Vec::new());
    let (mut sa, mut sb) = (0u64, 0u64);
    for k in 0..=max {
        sa += ca[k];
        sb += cb[k];
        if sa + sb >= min_count {
            ma.push(sa);
            mb.push(sb);
            sa = 0;
            sb = 0;
        }
    }
    if sa + sb > 0 {
        match (ma.last_mut(), mb.last_mut()) {
            (Some(la), Some(lb)) => {
                *la += sa;
                *lb += sb;
            }
            _ => {
                ma.push(sa);
                mb.push(sb);
            }
        }
    }
    chi_square_independence(&[ma, mb])
}
