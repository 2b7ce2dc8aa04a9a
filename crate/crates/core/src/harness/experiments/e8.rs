//! Prohorov distance against brute force, and the GHP trend on excursion trees.

use rand::Rng as _;

use super::super::{timed, Check, Ctx};
use crate::error::Result;
use crate::metric::oracle::prohorov_brute;
use crate::metric::{prohorov_atomic, AtomicMeasure, DistanceTable, Excursion, Lca, TreePoint};
use crate::rng::Rng;
use crate::tree::Tree;

const INSTANCES: usize = 100;
const MAX_ATOMS: usize = 8;
const EXCURSIONS: usize = 100;
const STEPS: usize = 20_000;
const MARK_DRAWS: usize = 15;
/// Each level is compared with the next, four times as intense.
const LAMS: [f64; 4] = [5.0, 20.0, 80.0, 320.0];

pub(super) fn run(ctx: &Ctx) -> Vec<Check> {
    let mut checks = timed(11, "Prohorov vs brute force", || {
        let diffs = ctx.replicate(1, INSTANCES, |rng| {
            let (mu, nu, table) = instance(rng);
            (prohorov_atomic(&mu, &nu, &table, 1e-13) - prohorov_brute(&mu, &nu, &table)).abs()
        });
        let worst = diffs.iter().copied().fold(0.0, f64::max);
        Ok(vec![Check::exact(11, "prohorov_atomic vs subset enumeration", worst, 0.0, 1e-9)
            .with_statistic("max abs difference")
            .with_n(INSTANCES)])
    });
    checks.extend(timed(11, "GHP trend", || {
        let runs = ctx.replicate(2, EXCURSIONS, |rng| -> Result<bool> {
            let medians = excursion_medians(rng)?;
            Ok(medians.windows(2).all(|w| w[1] < w[0]))
        });
        let decreasing = runs.into_iter().collect::<Result<Vec<_>>>()?.iter().filter(|&&d| d).count();
        Ok(vec![Check::at_least(
            11,
            "median GHP bound decreasing over lambda in {5, 20, 80}",
            "replicates decreasing",
            EXCURSIONS,
            decreasing as f64,
            0.9 * EXCURSIONS as f64,
        )])
    }));
    checks
}

/// Median over mark draws of the bound between the trees at `lam` and `4 lam`, for each `lam`.
fn excursion_medians(rng: &mut Rng) -> Result<Vec<f64>> {
    let excursion = Excursion::sample(STEPS, rng)?;
    let mut values = vec![Vec::with_capacity(MARK_DRAWS); LAMS.len() - 1];
    for _ in 0..MARK_DRAWS {
        let family = excursion.subtrees(&LAMS, rng, true)?;
        for (k, v) in values.iter_mut().enumerate() {
            v.push(family.ghp_pair(k, k + 1)?);
        }
    }
    Ok(values
        .into_iter()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        })
        .collect())
}

/// Two random atomic measures with at most [`MAX_ATOMS`] atoms together, on a
/// random line or tree metric.
fn instance(rng: &mut Rng) -> (AtomicMeasure, AtomicMeasure, DistanceTable) {
    let points = rng.random_range(2..=MAX_ATOMS);
    let table = if rng.random::<bool>() {
        let xs: Vec<f64> = (0..points).map(|_| 2.0 * rng.random::<f64>()).collect();
        DistanceTable::from_fn(points, |i, j| (xs[i] - xs[j]).abs())
    } else {
        let mut t = Tree::new();
        for i in 1..points {
            let parent = rng.random_range(0..i);
            t.add_child(parent, rng.random::<f64>());
        }
        let lca = Lca::new(&t);
        let at: Vec<TreePoint> = (0..points).map(|v| TreePoint::at_node(lca.depths(), v)).collect();
        DistanceTable::from_fn(points, |i, j| lca.distance(at[i], at[j]))
    };
    let k_mu = rng.random_range(1..MAX_ATOMS);
    let k_nu = rng.random_range(1..=MAX_ATOMS - k_mu);
    let mut atoms = |k: usize| {
        let scale = 0.5 + rng.random::<f64>();
        let raw: Vec<(usize, f64)> = (0..k).map(|_| (rng.random_range(0..points), 0.05 + rng.random::<f64>())).collect();
        let total: f64 = raw.iter().map(|a| a.1).sum();
        AtomicMeasure::new(raw.into_iter().map(|(p, m)| (p, scale * m / total)).collect()).expect("positive masses")
    };
    let mu = atoms(k_mu);
    let nu = atoms(k_nu);
    (mu, nu, table)
}
