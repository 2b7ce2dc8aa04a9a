//! Pruned trees against direct samples of the pruned law.

use super::super::stat::chi2_two_sample;
use super::super::{timed, Check, Ctx};
use crate::dynamics::mark_tree_at_eta;
use crate::error::Result;
use crate::gw::GaltonWatson;
use crate::mechanism::{Atom, Mechanism};

/// Pruning time of the base trees.
const BASE: f64 = 0.25;

pub(super) fn run(ctx: &Ctx) -> Vec<Check> {
    let theta = ctx.cfg.theta.unwrap_or(1.0);
    let lam = ctx.cfg.lambda.unwrap_or(1.0);
    let cases: Vec<(String, Result<Mechanism>)> = match &ctx.cfg.mechanism {
        Some(m) => vec![("configured".to_string(), Ok(m.clone()))],
        None => vec![
            ("u^2".to_string(), Ok(Mechanism::quadratic(1.0))),
            ("u^2 + atom".to_string(), Mechanism::new(0.0, 1.0, None, vec![Atom { r: 1.0, m: 1.0 }])),
        ],
    };
    let mut checks = Vec::new();
    for (k, (label, mech)) in cases.into_iter().enumerate() {
        let name = format!("{label} leaf count");
        checks.extend(timed(4, &name, || {
            let mech = mech?;
            let eta = mech.invert(lam)?;
            let base = GaltonWatson::pruned(&mech, BASE, eta, ctx.tail())?;
            let shifted = mech.shift(BASE)?;
            let direct = GaltonWatson::pruned(&mech, theta, eta, ctx.tail())?;
            let n = ctx.n(200_000);
            let caps = ctx.cfg.caps;
            let pruned = ctx.replicate(10 * k as u64 + 1, n, |rng| -> Result<usize> {
                let t = base.sample(rng, caps)?;
                Ok(mark_tree_at_eta(&t, &shifted, eta, theta - BASE, rng)?.prune_at(theta - BASE)?.leaf_count())
            });
            let pruned: Vec<usize> = pruned.into_iter().collect::<Result<_>>()?;
            let direct = ctx.replicate(10 * k as u64 + 2, n, |rng| -> Result<usize> { Ok(direct.sample(rng, caps)?.leaf_count()) });
            let direct: Vec<usize> = direct.into_iter().collect::<Result<_>>()?;
            Ok(vec![Check::test(4, &name, "chi2", n, chi2_two_sample(&pruned, &direct))])
        }));
    }
    checks
}
