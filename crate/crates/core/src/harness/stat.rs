//! Goodness-of-fit tests and summary statistics used by the experiments.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Significance level of every distributional test.
pub const ALPHA: f64 = 0.001;

/// Smallest pooled count of a chi-square bin.
pub const MIN_BIN_COUNT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (xs.first().copied().unwrap_or(f64::NAN), f64::INFINITY);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Two-sample chi-square homogeneity test on integer-valued samples.
///
/// Adjacent values are pooled, from the lowest upwards, until each bin holds at
/// least [`MIN_BIN_COUNT`] observations of the two samples together; an
/// undersized last bin is merged into its neighbour.
pub fn chi2_two_sample(a: &[usize], b: &[usize]) -> TestResult {
    let top = a.iter().chain(b).copied().max().unwrap_or(0);
    let mut ca = vec![0usize; top + 1];
    let mut cb = vec![0usize; top + 1];
    a.iter().for_each(|&x| ca[x] += 1);
    b.iter().for_each(|&x| cb[x] += 1);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut ra, mut rb) = (0usize, 0usize);
    for v in 0..=top {
        ra += ca[v];
        rb += cb[v];
        if ra + rb >= MIN_BIN_COUNT {
            bins.push((ra as f64, rb as f64));
            ra = 0;
            rb = 0;
        }
    }
    if ra + rb > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += ra as f64;
                last.1 += rb as f64;
            }
            None => bins.push((ra as f64, rb as f64)),
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic: f64 = bins.iter().map(|&(r, s)| (ka * r - kb * s).powi(2) / (r + s)).sum();
    let df = bins.len().saturating_sub(1);
    let p_value = if df == 0 { 1.0 } else { ChiSquared::new(df as f64).expect("positive df").sf(statistic) };
    TestResult { statistic, p_value, df }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let s = effective_n.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov-Smirnov test against a continuous cdf.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> TestResult {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    TestResult { statistic: d, p_value: ks_p_value(d, n), df: 0 }
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    TestResult { statistic: d, p_value: ks_p_value(d, n * m / (n + m)), df: 0 }
}
