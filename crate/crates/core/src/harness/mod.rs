//! Reproducible verification experiments E1 to E8.

pub mod config;
mod experiments;
pub mod report;
pub mod stat;

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{child_seed, stream, Rng};

pub use config::{Config, Tolerances, DEFAULT_SEED, EXPERIMENTS};
pub use report::{to_json, Check, ErrorKind, Report};

/// Run one experiment by id (`E1` to `E8`).
pub fn run_experiment(id: &str, cfg: &Config, seed: u64) -> Result<Report> {
    let index = EXPERIMENTS.iter().position(|e| *e == id).ok_or_else(|| Error::Config(format!("unknown experiment '{id}'")))?;
    let ctx = Ctx { cfg, seed: child_seed(seed, index as u64 + 1) };
    let start = Instant::now();
    let (title, checks) = experiments::run(index, &ctx);
    Ok(Report::new(id, title, seed, checks, start.elapsed()))
}

/// Run `all` or a single id.
pub fn run_selection(selection: &str, cfg: &Config, seed: u64) -> Result<Vec<Report>> {
    if selection == "all" {
        EXPERIMENTS.iter().map(|id| run_experiment(id, cfg, seed)).collect()
    } else {
        Ok(vec![run_experiment(selection, cfg, seed)?])
    }
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a Config,
    pub seed: u64,
}

impl Ctx<'_> {
    /// Sample size, unless the configuration overrides it.
    pub fn n(&self, default: usize) -> usize {
        self.cfg.replicates.unwrap_or(default)
    }

    pub fn tail(&self) -> f64 {
        self.cfg.tolerances.tail
    }

    /// Evaluate `f` on `n` independent streams of sub-experiment `tag`, in order.
    pub fn replicate<T, F>(&self, tag: u64, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut Rng) -> T + Sync,
    {
        let seed = child_seed(self.seed, tag);
        (0..n as u64).into_par_iter().map(|i| f(&mut stream(seed, i))).collect()
    }
}

/// Run a group of checks, stamping each with the group's wall time; errors become failed checks.
pub(crate) fn timed<F>(criterion: u8, name: &str, f: F) -> Vec<Check>
where
    F: FnOnce() -> Result<Vec<Check>>,
{
    let start = Instant::now();
    let mut checks = f().unwrap_or_else(|e| vec![Check::failed(criterion, name, &e.to_string())]);
    let elapsed: Duration = start.elapsed();
    checks.iter_mut().for_each(|c| c.elapsed = elapsed);
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_is_a_config_error() {
        assert!(matches!(run_experiment("E9", &Config::default(), 1), Err(Error::Config(_))));
        assert!(matches!(run_selection("bogus", &Config::default(), 1), Err(Error::Config(_))));
    }

    #[test]
    fn exact_laws_pass_and_repeat() {
        let cfg = Config::default();
        let a = run_experiment("E1", &cfg, 3).unwrap();
        let b = run_experiment("E1", &cfg, 3).unwrap();
        assert!(a.pass);
        assert_eq!(to_json(&[a]), to_json(&[b]));
    }

    #[test]
    fn small_runs_are_reproducible() {
        let cfg = Config { replicates: Some(500), ..Config::default() };
        let a = to_json(&[run_experiment("E2", &cfg, 11).unwrap()]);
        assert_eq!(a, to_json(&[run_experiment("E2", &cfg, 11).unwrap()]));
        assert_ne!(a, to_json(&[run_experiment("E2", &cfg, 12).unwrap()]));
        assert!(a.contains("\"n\": 500"));
    }

    #[test]
    fn sampler_errors_become_failed_checks() {
        let cfg = Config { mechanism: Some(crate::Mechanism::new(-1.0, 1.0, None, vec![]).unwrap()), replicates: Some(100), ..Config::default() };
        let r = run_experiment("E3", &cfg, 1).unwrap();
        assert!(!r.pass);
        assert!(r.checks.iter().all(|c| c.statistic.starts_with("error")));
    }
}
