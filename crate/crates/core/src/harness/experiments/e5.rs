//! Leaf generating functions: closed forms, marginals and Monte Carlo.

use super::super::stat::mean_se;
use super::super::{timed, Check, Ctx};
use crate::dynamics::Growth;
use crate::error::Result;
use crate::gw::GaltonWatson;
use crate::mechanism::Mechanism;
use crate::stats::{joint_leaf_pgf, leaf_pgf};

const POINTS: [(f64, f64); 4] = [(0.3, 0.6), (0.8, 0.1), (0.5, 0.5), (0.9, 0.9)];

/// Leaf pgf of the `u^2` tree at `lam = 1`.
fn quadratic_closed_form(theta: f64, zeta: f64) -> f64 {
    let eta = 1.0;
    (eta + theta - (theta * theta * zeta + (1.0 - zeta) * (theta + eta) * (theta + eta)).sqrt()) / eta
}

pub(super) fn run(ctx: &Ctx) -> Vec<Check> {
    let mech = Mechanism::quadratic(1.0);
    let fixed_point = ctx.cfg.tolerances.fixed_point;
    let mut checks = timed(6, "closed form", || {
        let (mut worst, mut residual) = (0.0_f64, 0.0_f64);
        for theta in [0.5, 1.0] {
            for k in 0..10 {
                let zeta = k as f64 / 10.0;
                let s = leaf_pgf(&mech, 1.0, theta, zeta)?;
                worst = worst.max((s.value - quadratic_closed_form(theta, zeta)).abs());
                residual = residual.max(s.residual);
            }
        }
        Ok(vec![
            Check::exact(6, "leaf pgf vs closed form", worst, 0.0, 1e-10).with_statistic("max abs difference").with_n(20),
            Check::at_most(6, "leaf pgf fixed-point residual", "max residual", 20, residual, fixed_point),
        ])
    });
    checks.extend(timed(6, "marginals", || {
        let below_one = 1.0 - 1e-12;
        let (theta, q) = (1.0, 0.5);
        let mut worst = 0.0_f64;
        for k in 0..10 {
            let x = k as f64 / 10.0;
            let z_marginal = joint_leaf_pgf(&mech, 1.0, q, theta, x, below_one)? - leaf_pgf(&mech, 1.0, theta, x)?.value;
            let zeta_marginal = joint_leaf_pgf(&mech, 1.0, q, theta, below_one, x)? - leaf_pgf(&mech, 1.0, q, x)?.value;
            worst = worst.max(z_marginal.abs()).max(zeta_marginal.abs());
        }
        Ok(vec![Check::exact(6, "joint pgf marginals", worst, 0.0, 1e-8).with_statistic("max abs difference").with_n(20)])
    }));
    checks.extend(timed(6, "joint pgf Monte Carlo", || {
        let (theta, q) = (1.0, 0.5);
        let eta = mech.invert(1.0)?;
        let start = GaltonWatson::pruned(&mech, theta, eta, ctx.tail())?;
        let growth = Growth::at_eta(&mech, eta, q, theta, ctx.tail())?;
        let caps = ctx.cfg.caps;
        let n = ctx.n(100_000);
        let pairs = ctx.replicate(1, n, |rng| -> Result<(i32, i32)> {
            let t = start.sample(rng, caps)?;
            let grown = growth.step(&t, rng, caps)?;
            Ok((t.leaf_count() as i32, grown.leaf_count() as i32))
        });
        let pairs: Vec<(i32, i32)> = pairs.into_iter().collect::<Result<_>>()?;
        POINTS
            .iter()
            .map(|&(zeta, z)| {
                let xs: Vec<f64> = pairs.iter().map(|&(a, b)| zeta.powi(a) * z.powi(b)).collect();
                let (m, se) = mean_se(&xs);
                Ok(Check::mean(6, &format!("joint pgf at ({zeta}, {z})"), n, m, se, joint_leaf_pgf(&mech, 1.0, q, theta, zeta, z)?))
            })
            .collect()
    }));
    checks
}
