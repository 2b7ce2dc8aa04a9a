//! Runs every acceptance criterion at its stated tolerance and prints one verdict per criterion.

use std::process::{Command, ExitCode};
use std::time::Duration;

use crtprune::harness::{run_selection, to_json, Check, Config, Report, DEFAULT_SEED};

const TITLES: [&str; 12] = [
    "offspring laws exact",
    "mean leaves",
    "backward martingale constancy",
    "pruning marginal",
    "growth consistency",
    "leaf pgf",
    "ascension",
    "size-bias and spine identities",
    "measure-change weights",
    "intensity martingale",
    "metric module",
    "determinism",
];

fn time_limit(criterion: u8, reports: &[Report], checks: &[&Check]) -> Option<(Duration, Duration)> {
    match criterion {
        1 => Some((reports[0].elapsed, Duration::from_secs(1))),
        2 => Some((checks.iter().map(|c| c.elapsed).max().unwrap_or_default(), Duration::from_secs(15))),
        11 => Some((reports[7].elapsed, Duration::from_secs(300))),
        _ => None,
    }
}

fn binary_json() -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_crtprune"))
        .args(["verify", "--experiment", "all", "--out", "-"])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("exit status {}", out.status));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cfg = Config::default();
    let reports = match run_selection("all", &cfg, DEFAULT_SEED) {
        Ok(r) => r,
        Err(e) => {
            println!("[FAIL] suite did not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut all_pass = true;
    for criterion in 1..=11u8 {
        let checks: Vec<&Check> = reports.iter().flat_map(|r| &r.checks).filter(|c| c.criterion == criterion).collect();
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        let mut pass = !checks.is_empty() && failed.is_empty();
        let mut detail = format!("{} checks", checks.len());
        if let Some((took, limit)) = time_limit(criterion, &reports, &checks) {
            pass &= took < limit;
            detail.push_str(&format!(", {:.2} s of {} s", took.as_secs_f64(), limit.as_secs()));
        }
        if !failed.is_empty() {
            detail.push_str(&format!(", failing: {}", failed.join("; ")));
        }
        all_pass &= pass;
        println!("[{}] criterion {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" }, TITLES[criterion as usize - 1]);
    }

    let expected = to_json(&reports);
    let (pass, detail) = match (binary_json(), binary_json()) {
        (Ok(a), Ok(b)) if a == expected && b == expected => (true, format!("two CLI runs match the in-process report, {} bytes", a.len())),
        (Ok(a), Ok(b)) => (false, format!("outputs differ (cli {} / {} bytes, in-process {})", a.len(), b.len(), expected.len())),
        (Err(e), _) | (_, Err(e)) => (false, e),
    };
    all_pass &= pass;
    println!("[{}] criterion 12: {} ({detail})", if pass { "PASS" } else { "FAIL" }, TITLES[11]);

    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
