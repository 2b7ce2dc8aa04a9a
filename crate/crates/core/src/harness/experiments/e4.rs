//! Backward growth against direct samples at the smaller pruning time.

use super::super::stat::{chi2_two_sample, ks_two_sample};
use super::super::{timed, Check, Ctx};
use super::mechanism;
use crate::dynamics::{growth_offspring_law, Growth};
use crate::error::Result;
use crate::gw::GaltonWatson;
use crate::mechanism::Mechanism;

pub(super) fn run(ctx: &Ctx) -> Vec<Check> {
    let mut checks = timed(5, "grown vs direct", || {
        let mech = mechanism(ctx);
        let lam = ctx.cfg.lambda.unwrap_or(1.0);
        let theta = ctx.cfg.theta.unwrap_or(1.0);
        let q = ctx.cfg.q.unwrap_or(0.5);
        let eta = mech.invert(lam)?;
        let start = GaltonWatson::pruned(&mech, theta, eta, ctx.tail())?;
        let growth = Growth::at_eta(&mech, eta, q, theta, ctx.tail())?;
        let direct = GaltonWatson::pruned(&mech, q, eta, ctx.tail())?;
        let caps = ctx.cfg.caps;
        let n = ctx.n(200_000);
        let grown = ctx.replicate(1, n, |rng| -> Result<(usize, f64)> {
            let t = growth.step(&start.sample(rng, caps)?, rng, caps)?;
            Ok((t.leaf_count(), t.total_length()))
        });
        let grown: Vec<(usize, f64)> = grown.into_iter().collect::<Result<_>>()?;
        let direct = ctx.replicate(2, n, |rng| -> Result<(usize, f64)> {
            let t = direct.sample(rng, caps)?;
            Ok((t.leaf_count(), t.total_length()))
        });
        let direct: Vec<(usize, f64)> = direct.into_iter().collect::<Result<_>>()?;
        let leaves = |v: &[(usize, f64)]| v.iter().map(|x| x.0).collect::<Vec<_>>();
        let lengths = |v: &[(usize, f64)]| v.iter().map(|x| x.1).collect::<Vec<_>>();
        Ok(vec![
            Check::test(5, "grown leaf count", "chi2", n, chi2_two_sample(&leaves(&grown), &leaves(&direct))),
            Check::test(5, "grown total length", "ks", n, ks_two_sample(&lengths(&grown), &lengths(&direct))),
        ])
    });
    checks.extend(timed(5, "growth law", || {
        let law = growth_offspring_law(&Mechanism::quadratic(1.0), 1.0, 0.0, 1.0, ctx.tail())?;
        Ok(vec![
            Check::exact(5, "u^2 P(K=0), q=0, theta=1", law.p(0), 1.0 / 3.0, 1e-12),
            Check::exact(5, "u^2 P(K=1), q=0, theta=1", law.p(1), 2.0 / 3.0, 1e-12),
        ])
    }));
    checks
}
