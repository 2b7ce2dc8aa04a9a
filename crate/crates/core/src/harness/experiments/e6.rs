//! Ascension law, compactness and spine trees for the critical quadratic mechanism.

use rand_distr::{Binomial, Distribution};

use super::super::stat::{ks_one_sample, mean_se};
use super::super::{timed, Check, Ctx};
use super::{as_f64, split_exceeded};
use crate::ascension::{sample_infinite_spine_truncated, AscensionLaw};
use crate::error::{Error, Result};
use crate::gw::{extinction_probability, law_at, Caps, GaltonWatson, OffspringLaw, SpineSampler};
use crate::mechanism::Mechanism;
use crate::rng::Rng;
use crate::stats::leaf_moments;

/// Pruning time at which compactness is simulated.
const COMPACT_AT: f64 = -0.25;
/// Height of the truncated infinite spine.
const SPINE_HEIGHT: f64 = 3.0;

pub(super) fn run(ctx: &Ctx) -> Vec<Check> {
    let mech = Mechanism::quadratic(1.0);
    let mut checks = timed(7, "ascension law", || ascension_law(ctx, &mech));
    checks.extend(timed(7, "compactness", || compactness(ctx, &mech)));
    checks.extend(timed(8, "spine trees", || spine(ctx, &mech)));
    checks.extend(timed(8, "infinite spine", || {
        let n = ctx.n(2_000);
        let caps = ctx.cfg.caps;
        let runs = ctx.replicate(5, n, |rng| match sample_infinite_spine_truncated(&mech, 1.0, SPINE_HEIGHT, rng, caps) {
            Ok(s) => Ok(Ok(s.grafts)),
            Err(Error::Exceeded) => Ok(Err(crate::gw::Exceeded)),
            Err(e) => Err(e),
        });
        let (grafts, dropped) = split_exceeded(runs.into_iter().collect::<Result<Vec<_>>>()?);
        let (m, se) = mean_se(&as_f64(&grafts));
        let rate = mech.dpsi(mech.invert(1.0)?);
        Ok(vec![
            Check::mean(8, "infinite spine grafts below height 3", grafts.len(), m, se, rate * SPINE_HEIGHT),
            Check::at_most(8, "infinite spine runs over caps", "fraction", n, dropped as f64 / n as f64, 0.01),
        ])
    }));
    checks
}

fn ascension_law(ctx: &Ctx, mech: &Mechanism) -> Result<Vec<Check>> {
    let law = AscensionLaw::new(mech, 1.0)?;
    let eta = law.eta();
    let lo = law.theta_lambda();
    let mut worst = 0.0_f64;
    for k in 1..100 {
        let theta = lo * k as f64 / 100.0;
        worst = worst.max((law.pdf(theta)? - 2.0 / eta).abs());
    }
    let n = ctx.n(100_000);
    let times = ctx.replicate(1, n, |rng| law.sample_time(rng));
    let times: Vec<f64> = times.into_iter().collect::<Result<_>>()?;
    let uniform = |x: f64| ((x + eta / 2.0) / (eta / 2.0)).clamp(0.0, 1.0);
    let extinction = extinction_probability(&law_at(&mech.shift(COMPACT_AT)?, eta, ctx.tail())?)?;
    let cdf = law.cdf(COMPACT_AT)?;
    Ok(vec![
        Check::exact(7, "theta_lambda = -eta/2", lo, -eta / 2.0, ctx.cfg.tolerances.root_find),
        Check::exact(7, "density equals 2/eta", worst, 0.0, 1e-10).with_statistic("max abs difference").with_n(99),
        Check::test(7, "ascension times uniform on (-eta/2, 0)", "ks", n, ks_one_sample(&times, uniform)),
        Check::exact(7, "cdf(-0.25) vs extinction probability", cdf, extinction, 1e-10),
        Check::exact(7, "cdf(-0.25)", cdf, 0.5, 1e-10),
    ])
}

/// Whether a Galton-Watson process with offspring law `law` dies out before
/// `cap` individuals, simulated generation by generation.
fn dies_out(law: &OffspringLaw, cap: usize, rng: &mut Rng) -> bool {
    let probs = law.probs();
    let mut size: u64 = 1;
    let mut total: u64 = 1;
    while size > 0 {
        if total > cap as u64 {
            return false;
        }
        let mut remaining = size;
        let mut rest = 1.0;
        let mut next: u64 = 0;
        for (k, &p) in probs.iter().enumerate() {
            if remaining == 0 || rest <= 0.0 {
                break;
            }
            let draw = if p >= rest { remaining } else { Binomial::new(remaining, (p / rest).clamp(0.0, 1.0)).map(|b| b.sample(rng)).unwrap_or(0) };
            next += draw * k as u64;
            remaining -= draw;
            rest -= p;
        }
        if remaining > 0 {
            // Offspring in the truncated tail: at least one past the support.
            next += remaining * probs.len() as u64;
        }
        size = next;
        total += next;
    }
    true
}

fn compactness(ctx: &Ctx, mech: &Mechanism) -> Result<Vec<Check>> {
    let eta = mech.invert(1.0)?;
    let law = law_at(&mech.shift(COMPACT_AT)?, eta, ctx.tail())?;
    let cap = 1_000_000;
    let n = ctx.n(100_000);
    let compact = ctx.replicate(2, n, |rng| dies_out(&law, cap, rng));
    let freq = compact.iter().filter(|&&c| c).count() as f64 / n as f64;
    let target = AscensionLaw::new(mech, 1.0)?.cdf(COMPACT_AT)?;
    Ok(vec![Check::exact(7, "P(compact) at theta=-0.25, capped simulation", freq, target, 0.01).with_statistic("frequency").with_n(n)])
}

/// Ratio `sum(y) / sum(x)` with its delta-method standard error.
fn ratio_se(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, _) = mean_se(x);
    let (my, _) = mean_se(y);
    let r = my / mx;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - r * a).collect();
    let (_, se) = mean_se(&resid);
    (r, se / mx)
}

fn spine(ctx: &Ctx, mech: &Mechanism) -> Result<Vec<Check>> {
    let (theta, lam) = (1.0, 1.0);
    let eta = mech.invert(lam)?;
    let sampler = SpineSampler::at_eta(mech, theta, eta, ctx.tail())?;
    let caps: Caps = ctx.cfg.caps;
    let n = ctx.n(100_000);
    let runs = ctx.replicate(3, n, |rng| sampler.sample(rng, caps).map(|s| (s.tree.leaf_count(), s.spine.len(), s.grafts, s.spine_length())));
    let runs: Vec<(usize, usize, usize, f64)> = runs.into_iter().collect::<std::result::Result<_, _>>()?;
    let leaves: Vec<f64> = runs.iter().map(|r| r.0 as f64).collect();
    let single: Vec<f64> = runs.iter().map(|r| if r.1 == 1 { 1.0 } else { 0.0 }).collect();
    let grafts: Vec<f64> = runs.iter().map(|r| r.2 as f64).collect();
    let lengths: Vec<f64> = runs.iter().map(|r| r.3).collect();

    let (m1, m2) = leaf_moments(mech, eta, theta)?;
    let plain = GaltonWatson::pruned(mech, theta, eta, ctx.tail())?;
    let counts = ctx.replicate(4, n, |rng| plain.sample(rng, caps).map(|t| t.leaf_count() as f64));
    let counts: Vec<f64> = counts.into_iter().collect::<std::result::Result<_, _>>()?;
    let squares: Vec<f64> = counts.iter().map(|x| x * x).collect();
    let gw_ratio = ratio_se(&counts, &squares);

    let (ml, sel) = mean_se(&leaves);
    let (ms, ses) = mean_se(&single);
    let (mg, seg) = mean_se(&grafts);
    let (rate, se_rate) = ratio_se(&lengths, &grafts);
    let a = sampler.stop_probability();

    let asc = AscensionLaw::new(mech, lam)?;
    let given = asc.spine_sampler_at(COMPACT_AT)?;
    let (c1, c2) = leaf_moments(mech, asc.eta_at(COMPACT_AT)?, mech.conjugate(COMPACT_AT)?)?;
    let at = ctx.replicate(6, n, |rng| given.sample(rng, caps).map(|s| s.tree.leaf_count() as f64));
    let at: Vec<f64> = at.into_iter().collect::<std::result::Result<_, _>>()?;
    let (mc, sec) = mean_se(&at);
    let conditional = Check::mean(8, "tree at ascension given A=-0.25: leaf mean", n, mc, sec, c2 / c1);
    let hand_rate = (1.0 - a) * sampler.galton_watson().rate();
    Ok(vec![
        Check::exact(8, "E[L^2]/E[L] closed form", m2 / m1, 2.5, 1e-12),
        Check::mean(8, "spine leaf mean vs E[L^2]/E[L]", n, ml, sel, m2 / m1),
        Check::two_means(8, "spine leaf mean vs plain Galton-Watson ratio", n, (ml, sel), gw_ratio),
        Check::exact(8, "stop probability a", a, 0.5, 1e-12),
        Check::mean(8, "single-segment frequency vs a", n, ms, ses, a),
        Check::mean(8, "grafts per spine vs (1-a)/a", n, mg, seg, (1.0 - a) / a),
        Check::mean(8, "graft rate per unit spine length", n, rate, se_rate, hand_rate),
        Check::exact(8, "graft rate hand value", hand_rate, 2.0, 1e-12),
        conditional,
    ])
}
