//! Measure-change identities and the martingale in the intensity direction.

use super::super::stat::mean_se;
use super::super::{timed, Check, Ctx};
use crate::error::Result;
use crate::gw::{GaltonWatson, TimedTree};
use crate::mechanism::Mechanism;
use crate::stats::{girsanov_weight, mart_q, qq_girsanov_weight};

const LEVEL: f64 = 0.5;
const INTENSITIES: [f64; 3] = [1.0, 2.0, 4.0];

pub(super) fn run(ctx: &Ctx) -> Vec<Check> {
    let mut checks = timed(9, "super-critical change of measure", || supercritical(ctx));
    checks.extend(timed(9, "pruning change of measure", || pruning(ctx)));
    checks.extend(timed(10, "intensity martingale", || intensity(ctx)));
    checks
}

/// `u^2 - u`.
fn supercritical_mechanism() -> Result<Mechanism> {
    Mechanism::new(-1.0, 1.0, None, vec![])
}

fn supercritical(ctx: &Ctx) -> Result<Vec<Check>> {
    let mech = supercritical_mechanism()?;
    let lam = 2.0;
    let q0 = mech.q0()?;
    let plain = GaltonWatson::new(&mech, lam, ctx.tail())?;
    let shifted = GaltonWatson::new(&mech.shift(q0)?, lam, ctx.tail())?;
    let caps = ctx.cfg.caps;
    let n = ctx.n(200_000);
    let direct = ctx.replicate(1, n, |rng| plain.sample_to_height(rng, LEVEL, caps).map(|t| t.leaves_at_level(LEVEL)));
    let direct: Vec<usize> = direct.into_iter().collect::<std::result::Result<_, _>>()?;
    let weighted = ctx.replicate(2, n, |rng| -> Result<(usize, f64)> {
        let t = shifted.sample_to_height(rng, LEVEL, caps)?;
        Ok((t.leaves_at_level(LEVEL), girsanov_weight(&t, &mech, lam, LEVEL)?))
    });
    let weighted: Vec<(usize, f64)> = weighted.into_iter().collect::<Result<_>>()?;

    let (mean_level, se_level) = mean_se(&direct.iter().map(|&l| l as f64).collect::<Vec<_>>());
    let mut checks = vec![Check::mean(9, "u^2-u: E[L(0.5)] = e^0.5", n, mean_level, se_level, LEVEL.exp())];
    let events: [(&str, fn(usize) -> bool); 5] = [
        ("L(0.5)=0", |l| l == 0),
        ("L(0.5)=1", |l| l == 1),
        ("L(0.5)=2", |l| l == 2),
        ("L(0.5)=3", |l| l == 3),
        ("L(0.5)<=3", |l| l <= 3),
    ];
    for (label, event) in events {
        let plain_side = mean_se(&direct.iter().map(|&l| if event(l) { 1.0 } else { 0.0 }).collect::<Vec<_>>());
        let weighted_side = mean_se(&weighted.iter().map(|&(l, w)| if event(l) { w } else { 0.0 }).collect::<Vec<_>>());
        checks.push(Check::two_means(9, &format!("u^2-u: P({label}) vs weighted shifted tree"), n, weighted_side, plain_side));
    }
    Ok(checks)
}

fn pruning(ctx: &Ctx) -> Result<Vec<Check>> {
    let mech = Mechanism::quadratic(1.0);
    let (lam, theta, q) = (1.0, 0.0, 1.0);
    let eta = mech.invert(lam)?;
    let low = GaltonWatson::pruned(&mech, theta, eta, ctx.tail())?;
    let high = GaltonWatson::pruned(&mech, q, eta, ctx.tail())?;
    let caps = ctx.cfg.caps;
    let n = ctx.n(200_000);
    let weighted = ctx.replicate(3, n, |rng| -> Result<(f64, f64)> {
        let t = low.sample_to_height(rng, LEVEL, caps)?;
        Ok((t.tip_count().min(10) as f64, qq_girsanov_weight(&t, &mech, lam, theta, q, LEVEL)?))
    });
    let weighted: Vec<(f64, f64)> = weighted.into_iter().collect::<Result<_>>()?;
    let direct = ctx.replicate(4, n, |rng| high.sample_to_height(rng, LEVEL, caps).map(|t| t.tip_count().min(10) as f64));
    let direct: Vec<f64> = direct.into_iter().collect::<std::result::Result<_, _>>()?;
    let lhs = mean_se(&weighted.iter().map(|&(f, w)| f * w).collect::<Vec<_>>());
    let rhs = mean_se(&direct);
    let (mw, sew) = mean_se(&weighted.iter().map(|&(_, w)| w).collect::<Vec<_>>());
    Ok(vec![
        Check::two_means(9, "u^2: E_q[min(tips, 10)] vs weighted theta tree", n, lhs, rhs),
        Check::mean(9, "u^2: E_theta[weight] = 1", n, mw, sew, 1.0),
    ])
}

fn intensity(ctx: &Ctx) -> Result<Vec<Check>> {
    let mech = supercritical_mechanism()?;
    let q0 = mech.q0()?;
    let top = INTENSITIES[INTENSITIES.len() - 1];
    let gw = GaltonWatson::at_eta(&mech.shift(q0)?, mech.invert(top)? - q0, ctx.tail())?;
    let caps = ctx.cfg.caps;
    let n = ctx.n(200_000);
    let runs = ctx.replicate(5, n, |rng| -> Result<Vec<f64>> {
        let timed = TimedTree::attach_uniform_times(gw.sample(rng, caps)?, top, rng);
        INTENSITIES.iter().map(|&z| mart_q(&timed, z, LEVEL, &mech)).collect()
    });
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    // Conditioned on marks at the largest intensity only; smaller spans may be empty, with Q = 1.
    let eta = mech.invert(top)?;
    let reference = eta / (eta - q0);
    let stats: Vec<(f64, f64)> = (0..INTENSITIES.len()).map(|k| mean_se(&runs.iter().map(|r| r[k]).collect::<Vec<_>>())).collect();
    let mut checks: Vec<Check> = INTENSITIES
        .iter()
        .zip(&stats)
        .map(|(z, &(m, se))| Check::mean(10, &format!("E[Q_z] at z={z}"), n, m, se, reference))
        .collect();
    for i in 0..INTENSITIES.len() {
        for j in i + 1..INTENSITIES.len() {
            let name = format!("E[Q_z] at z={} vs {}", INTENSITIES[i], INTENSITIES[j]);
            checks.push(Check::two_means(10, &name, n, stats[i], stats[j]));
        }
    }
    Ok(checks)
}
