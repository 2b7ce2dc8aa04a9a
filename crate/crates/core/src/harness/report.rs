//! Experiment reports and their JSON form.

use std::time::Duration;

use serde::Serialize;

use super::stat::{TestResult, ALPHA};

/// How a check's `error` field is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Standard error; the check passes within three of them.
    StdErr,
    /// p-value of a distributional test; passes above the significance level.
    PValue,
    /// Absolute tolerance.
    Tolerance,
    /// Required minimum of a count.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub statistic: String,
    pub n: usize,
    pub observed: f64,
    pub reference: Option<f64>,
    pub error: f64,
    pub error_kind: ErrorKind,
    pub pass: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Check {
    fn new(criterion: u8, name: &str, statistic: &str) -> Self {
        Check {
            criterion,
            name: name.to_string(),
            statistic: statistic.to_string(),
            n: 0,
            observed: f64::NAN,
            reference: None,
            error: f64::NAN,
            error_kind: ErrorKind::Tolerance,
            pass: false,
            elapsed: Duration::ZERO,
        }
    }

    /// `|observed - reference| <= tol`.
    pub fn exact(criterion: u8, name: &str, observed: f64, reference: f64, tol: f64) -> Self {
        Check {
            observed,
            reference: Some(reference),
            error: tol,
            pass: (observed - reference).abs() <= tol,
            ..Self::new(criterion, name, "value")
        }
    }

    /// Monte Carlo mean within three standard errors of an exact reference.
    pub fn mean(criterion: u8, name: &str, n: usize, mean: f64, se: f64, reference: f64) -> Self {
        Check {
            n,
            observed: mean,
            reference: Some(reference),
            error: se,
            error_kind: ErrorKind::StdErr,
            pass: (mean - reference).abs() <= 3.0 * se,
            ..Self::new(criterion, name, "mean")
        }
    }

    /// Two independent Monte Carlo means within three combined standard errors.
    pub fn two_means(criterion: u8, name: &str, n: usize, a: (f64, f64), b: (f64, f64)) -> Self {
        let se = (a.1 * a.1 + b.1 * b.1).sqrt();
        Check {
            n,
            observed: a.0,
            reference: Some(b.0),
            error: se,
            error_kind: ErrorKind::StdErr,
            pass: (a.0 - b.0).abs() <= 3.0 * se,
            ..Self::new(criterion, name, "mean difference")
        }
    }

    pub fn test(criterion: u8, name: &str, statistic: &str, n: usize, t: TestResult) -> Self {
        Check {
            n,
            observed: t.statistic,
            error: t.p_value,
            error_kind: ErrorKind::PValue,
            pass: t.p_value > ALPHA,
            ..Self::new(criterion, name, statistic)
        }
    }

    /// `observed >= required`.
    pub fn at_least(criterion: u8, name: &str, statistic: &str, n: usize, observed: f64, required: f64) -> Self {
        Check {
            n,
            observed,
            error: required,
            error_kind: ErrorKind::Threshold,
            pass: observed >= required,
            ..Self::new(criterion, name, statistic)
        }
    }

    /// `observed <= allowed`.
    pub fn at_most(criterion: u8, name: &str, statistic: &str, n: usize, observed: f64, allowed: f64) -> Self {
        Check { pass: observed <= allowed, ..Self::at_least(criterion, name, statistic, n, observed, allowed) }
    }

    /// A check that could not be evaluated.
    pub fn failed(criterion: u8, name: &str, message: &str) -> Self {
        Self::new(criterion, name, &format!("error: {message}"))
    }

    pub fn with_statistic(mut self, statistic: &str) -> Self {
        self.statistic = statistic.to_string();
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub title: String,
    pub seed: u64,
    pub n: usize,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Report {
    pub fn new(experiment: &str, title: &str, seed: u64, checks: Vec<Check>, elapsed: Duration) -> Self {
        Report {
            experiment: experiment.to_string(),
            title: title.to_string(),
            seed,
            n: checks.iter().map(|c| c.n).sum(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            elapsed,
        }
    }
}

/// Pretty JSON of a report list; byte-identical for identical inputs.
pub fn to_json(reports: &[Report]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        assert!(Check::exact(1, "x", 0.5, 0.5, 1e-12).pass);
        assert!(!Check::exact(1, "x", 0.5, 0.6, 1e-12).pass);
        assert!(Check::mean(2, "m", 10, 1.0, 0.1, 1.29).pass);
        assert!(!Check::mean(2, "m", 10, 1.0, 0.1, 1.31).pass);
        assert!(Check::two_means(3, "d", 10, (1.0, 0.3), (2.0, 0.4)).pass);
        assert!(!Check::at_most(4, "f", "fraction", 10, 0.01, 0.005).pass);
        assert!(!Check::failed(4, "f", "boom").pass);
    }

    #[test]
    fn json_omits_timing_and_writes_null_reference() {
        let mut c = Check::at_least(11, "k", "count", 100, 95.0, 90.0);
        c.elapsed = Duration::from_millis(5);
        let r = Report::new("E8", "metric", 1, vec![c], Duration::from_secs(3));
        let j = to_json(&[r]);
        assert!(j.contains("\"reference\": null"));
        assert!(!j.contains("elapsed"));
    }
}
