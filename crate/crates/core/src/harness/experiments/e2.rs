//! Mean leaf counts and the martingale along one pruning trajectory.

use super::super::stat::mean_se;
use super::super::{timed, Check, Ctx};
use super::{as_f64, mechanism, split_exceeded};
use crate::dynamics::mark_tree_at_eta;
use crate::error::Result;
use crate::gw::GaltonWatson;
use crate::stats::{martingale_r, mean_leaves};

/// Pruning times of the trajectory; the first one is the base tree.
const GRID: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

pub(super) fn run(ctx: &Ctx) -> Vec<Check> {
    let mech = mechanism(ctx);
    let lam = ctx.cfg.lambda.unwrap_or(1.0);
    let theta = ctx.cfg.theta.unwrap_or(1.0);
    let caps = ctx.cfg.caps;
    let mut checks = timed(2, "mean leaf count", || {
        let eta = mech.invert(lam)?;
        let gw = GaltonWatson::pruned(&mech, theta, eta, ctx.tail())?;
        let n = ctx.n(100_000);
        let (leaves, dropped) = split_exceeded(ctx.replicate(1, n, |rng| gw.sample(rng, caps).map(|t| t.leaf_count())));
        let (m, se) = mean_se(&as_f64(&leaves));
        let mut out = vec![
            Check::mean(2, "mean leaf count", leaves.len(), m, se, mean_leaves(&mech, lam, theta)?),
            Check::at_most(2, "runs over caps", "count", n, dropped as f64, 0.0),
        ];
        if ctx.cfg.mechanism.is_none() && ctx.cfg.lambda.is_none() && ctx.cfg.theta.is_none() {
            out.push(Check::exact(2, "u^2 closed form", mean_leaves(&mech, 1.0, 1.0)?, 1.5, 1e-12));
        }
        Ok(out)
    });
    checks.extend(timed(3, "martingale trajectory", || trajectory(ctx)));
    checks
}

fn trajectory(ctx: &Ctx) -> Result<Vec<Check>> {
    let mech = mechanism(ctx);
    let lam = ctx.cfg.lambda.unwrap_or(1.0);
    let eta = mech.invert(lam)?;
    let base = GaltonWatson::pruned(&mech, GRID[0], eta, ctx.tail())?;
    let shifted = mech.shift(GRID[0])?;
    let offsets: Vec<f64> = GRID.iter().map(|g| g - GRID[0]).collect();
    let horizon = offsets[offsets.len() - 1];
    let n = ctx.n(100_000);
    let runs = ctx.replicate(2, n, |rng| -> Result<Vec<f64>> {
        let t = base.sample(rng, ctx.cfg.caps)?;
        let marked = mark_tree_at_eta(&t, &shifted, eta, horizon, rng)?;
        let pruned = marked.prune_trajectory(&offsets)?;
        GRID.iter().zip(&pruned).map(|(&theta, tree)| martingale_r(tree, &mech, lam, theta)).collect()
    });
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    let stats: Vec<(f64, f64)> = (0..GRID.len()).map(|k| mean_se(&runs.iter().map(|r| r[k]).collect::<Vec<_>>())).collect();
    let mut checks: Vec<Check> = GRID
        .iter()
        .zip(&stats)
        .map(|(theta, &(m, se))| Check::mean(3, &format!("E[R] at theta={theta}"), n, m, se, 1.0 / eta))
        .collect();
    for i in 0..GRID.len() {
        for j in i + 1..GRID.len() {
            let name = format!("E[R] at theta={} vs {}", GRID[i], GRID[j]);
            checks.push(Check::two_means(3, &name, n, stats[i], stats[j]));
        }
    }
    Ok(checks)
}
