//! The experiment bodies; each returns its checks, tagged by acceptance criterion.

mod e1;
mod e2;
mod e3;
mod e4;
mod e5;
mod e6;
mod e7;
mod e8;

use super::{Check, Ctx};
use crate::gw::Exceeded;
use crate::mechanism::Mechanism;

pub(super) fn run(index: usize, ctx: &Ctx) -> (&'static str, Vec<Check>) {
    match index {
        0 => ("offspring laws and landmarks", e1::run(ctx)),
        1 => ("leaf-count martingale", e2::run(ctx)),
        2 => ("pruning consistency", e3::run(ctx)),
        3 => ("backward growth", e4::run(ctx)),
        4 => ("leaf generating functions", e5::run(ctx)),
        5 => ("ascension time and spine trees", e6::run(ctx)),
        6 => ("Girsanov identities and the lambda martingale", e7::run(ctx)),
        7 => ("Prohorov and GHP distances", e8::run(ctx)),
        _ => unreachable!("experiment index {index}"),
    }
}

/// The configured mechanism, or `u^2`.
fn mechanism(ctx: &Ctx) -> Mechanism {
    ctx.cfg.mechanism.clone().unwrap_or_else(|| Mechanism::quadratic(1.0))
}

/// Values of the runs that stayed within the caps, and the number that did not.
fn split_exceeded<T>(runs: Vec<Result<T, Exceeded>>) -> (Vec<T>, usize) {
    let total = runs.len();
    let kept: Vec<T> = runs.into_iter().filter_map(|r| r.ok()).collect();
    let dropped = total - kept.len();
    (kept, dropped)
}

fn as_f64(xs: &[usize]) -> Vec<f64> {
    xs.iter().map(|&x| x as f64).collect()
}
