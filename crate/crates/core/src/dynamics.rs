//! Pruning marks, pruned trees and backward growth steps.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::error::{domain, Error, Result};
use crate::gw::{Caps, GaltonWatson, OffspringLaw, MAX_SUPPORT};
use crate::mechanism::Mechanism;
use crate::numerics::solve_increasing;
use crate::rng::Rng;
use crate::tree::{SubtreeMask, Tree};

/// Earliest skeleton mark on an edge: its time and its distance from the parent end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMark {
    pub time: f64,
    pub position: f64,
}

/// Mark time of a branch node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeMark {
    At(f64),
    /// Finite but later than the horizon.
    BeyondHorizon,
    /// The defective atom at infinity.
    Never,
}

impl NodeMark {
    pub fn before(&self, theta: f64) -> bool {
        matches!(*self, NodeMark::At(t) if t < theta)
    }
}

#[derive(Debug, Clone)]
pub struct MarkedTree {
    base: Tree,
    mech: Mechanism,
    eta: f64,
    horizon: f64,
    edge_marks: Vec<Option<EdgeMark>>,
    node_marks: Vec<Option<NodeMark>>,
}

/// Mark `t`, a tree of `mech` at intensity `lam`, up to pruning time `horizon`.
pub fn mark_tree(t: &Tree, mech: &Mechanism, lam: f64, horizon: f64, rng: &mut Rng) -> Result<MarkedTree> {
    let eta = mech.invert(lam)?;
    mark_tree_at_eta(t, mech, eta, horizon, rng)
}

pub fn mark_tree_at_eta(t: &Tree, mech: &Mechanism, eta: f64, horizon: f64, rng: &mut Rng) -> Result<MarkedTree> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(domain("horizon must be positive and finite"));
    }
    if !(eta > 0.0) {
        return Err(domain("eta must be positive"));
    }
    let d_eta = mech.dpsi(eta);
    let d_max = mech.dpsi(eta + horizon);
    let mut edge_marks = vec![None; t.len()];
    let mut node_marks = vec![None; t.len()];
    for c in 1..t.len() {
        let len = t.edge_length(c);
        let e: f64 = Exp1.sample(rng);
        let target = d_eta + e / len;
        if target <= d_max {
            let time = solve_increasing(
                |s| mech.dpsi(eta + s) - target,
                |s| mech.d2psi(eta + s),
                0.0,
                horizon,
                1e-14 * target.abs().max(1.0),
                "edge mark",
            )?;
            edge_marks[c] = Some(EdgeMark { time, position: len * rng.random::<f64>() });
        }
        let kappa = t.children(c).len();
        if kappa >= 2 {
            node_marks[c] = Some(sample_node_mark(mech, eta, kappa, horizon, rng)?);
        }
    }
    Ok(MarkedTree { base: t.clone(), mech: mech.clone(), eta, horizon, edge_marks, node_marks })
}

/// Invert `P(xi > z) = |psi^(k)(eta + z)| / |psi^(k)(eta)|` at a uniform level.
fn sample_node_mark(mech: &Mechanism, eta: f64, kappa: usize, horizon: f64, rng: &mut Rng) -> Result<NodeMark> {
    let u: f64 = rng.random();
    let defect = if kappa == 2 { 2.0 * mech.beta() / mech.d2psi(eta) } else { 0.0 };
    if u < defect {
        return Ok(NodeMark::Never);
    }
    let l0 = mech.ln_abs_derivative(eta, kappa);
    let ln_survival = |z: f64| mech.ln_abs_derivative(eta + z, kappa) - l0;
    let ln_u = u.ln();
    if ln_survival(horizon) > ln_u {
        return Ok(NodeMark::BeyondHorizon);
    }
    let z = solve_increasing(
        |z| ln_u - ln_survival(z),
        |z| (mech.ln_abs_derivative(eta + z, kappa + 1) - mech.ln_abs_derivative(eta + z, kappa)).exp(),
        0.0,
        horizon,
        1e-14,
        "node mark",
    )?;
    Ok(NodeMark::At(z))
}

impl MarkedTree {
    pub fn base(&self) -> &Tree {
        &self.base
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn edge_marks(&self) -> &[Option<EdgeMark>] {
        &self.edge_marks
    }

    pub fn node_marks(&self) -> &[Option<NodeMark>] {
        &self.node_marks
    }

    /// Replace the earliest mark of an edge; used to check that later marks are immaterial.
    pub fn with_edge_mark(mut self, child: usize, mark: Option<EdgeMark>) -> Self {
        self.edge_marks[child] = mark;
        self
    }

    fn check(&self, theta: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&theta) {
            return Err(Error::Horizon { theta, horizon: self.horizon });
        }
        Ok(())
    }

    /// The part of the base tree surviving at pruning time `theta`, as a mask.
    pub fn prune_mask(&self, theta: f64) -> Result<SubtreeMask> {
        self.check(theta)?;
        let t = &self.base;
        let mut retained = vec![0.0; t.len()];
        let mut alive = vec![false; t.len()];
        alive[0] = true;
        for c in 1..t.len() {
            let p = t.parent(c).unwrap();
            if !alive[p] {
                continue;
            }
            match self.edge_marks[c] {
                Some(m) if m.time < theta => retained[c] = m.position,
                _ => {
                    retained[c] = t.edge_length(c);
                    alive[c] = !self.node_marks[c].is_some_and(|m| m.before(theta));
                }
            }
        }
        SubtreeMask::from_retained(t, retained)
    }

    /// The tree pruned at `theta` with leaf mass `1 / psi_theta(eta)`.
    pub fn prune_at(&self, theta: f64) -> Result<Tree> {
        let mask = self.prune_mask(theta)?;
        let (mut t, _) = mask.materialize(&self.base, false);
        t.set_leaf_mass(1.0 / (self.mech.psi(theta + self.eta) - self.mech.psi(theta)));
        Ok(t)
    }

    pub fn prune_trajectory(&self, grid: &[f64]) -> Result<Vec<Tree>> {
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(domain("pruning grid must be sorted"));
        }
        grid.iter().map(|&theta| self.prune_at(theta)).collect()
    }
}

/// Law of the number of trees grafted on a leaf when growing from `theta` down to `q`.
pub fn growth_offspring_law(mech: &Mechanism, lam: f64, q: f64, theta: f64, tail_tol: f64) -> Result<OffspringLaw> {
    let eta = mech.invert(lam)?;
    growth_law_at(mech, eta, q, theta, tail_tol)
}

pub fn growth_law_at(mech: &Mechanism, eta: f64, q: f64, theta: f64, tail_tol: f64) -> Result<OffspringLaw> {
    if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
        return Err(domain(format!("tail tolerance {tail_tol} outside (0, 1e-6]")));
    }
    if !(theta > q) {
        return Err(domain("growth needs theta > q"));
    }
    let theta_l = mech.theta_lambda_at(eta)?;
    if !(q > theta_l) || !mech.in_domain(q) {
        return Err(domain(format!("q = {q} must exceed theta_lambda = {theta_l}")));
    }
    let denom = mech.psi(theta + eta) - mech.psi(theta);
    let p0 = (mech.psi(q + eta) - mech.psi(q)) / denom;
    let p1 = eta * (mech.dpsi(theta + eta) - mech.dpsi(q + eta)) / denom;
    let mut probs = vec![p0, p1];
    let mut sum = p0 + p1;
    if 1.0 - sum >= tail_tol {
        let low = mech.jump_series(q + eta, eta);
        let high = mech.jump_series(theta + eta, eta);
        for (i, (a, b)) in low.zip(high).enumerate() {
            let p = ((a - b) / denom).max(0.0);
            probs.push(p);
            sum += p;
            if 1.0 - sum < tail_tol {
                break;
            }
            if i + 2 >= MAX_SUPPORT {
                return Err(Error::Truncation(MAX_SUPPORT));
            }
        }
    }
    let mean = eta * (mech.dpsi(theta) - mech.dpsi(q)) / denom;
    OffspringLaw::from_probs(probs, (1.0 - sum).max(0.0), mean, true)
}

/// Backward step from pruning time `theta` to `q < theta`.
#[derive(Debug, Clone)]
pub struct Growth {
    law: OffspringLaw,
    target: GaltonWatson,
}

impl Growth {
    pub fn new(mech: &Mechanism, lam: f64, q: f64, theta: f64, tail_tol: f64) -> Result<Self> {
        let eta = mech.invert(lam)?;
        Self::at_eta(mech, eta, q, theta, tail_tol)
    }

    pub fn at_eta(mech: &Mechanism, eta: f64, q: f64, theta: f64, tail_tol: f64) -> Result<Self> {
        let law = growth_law_at(mech, eta, q, theta, tail_tol)?;
        let target = GaltonWatson::pruned(mech, q, eta, tail_tol)?;
        Ok(Growth { law, target })
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }

    /// Graft `K` copies of the tree at `q` on every genuine leaf of `t`.
    pub fn step(&self, t: &Tree, rng: &mut Rng, caps: Caps) -> Result<Tree> {
        let mut work = t.clone();
        let generations = t.generations();
        let mut nodes = t.len();
        for leaf in t.leaves() {
            let k = self.law.sample(rng);
            if k > 0 {
                self.target.graft_copies(&mut work, leaf, generations[leaf], k, rng, &mut nodes, caps)?;
            }
        }
        let (mut out, _) = work.contract_unary(|_| false);
        out.set_leaf_mass(self.target.leaf_mass());
        Ok(out)
    }
}

pub fn grow_step(t: &Tree, mech: &Mechanism, lam: f64, q: f64, theta: f64, rng: &mut Rng, caps: Caps) -> Result<Tree> {
    Growth::new(mech, lam, q, theta, crate::gw::DEFAULT_TAIL_TOL)?.step(t, rng, caps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gw::DEFAULT_TAIL_TOL;
    use crate::mechanism::{Atom, StablePart};
    use crate::rng::from_seed;

    #[test]
    fn single_edge_cut_geometry() {
        let t = Tree::segment(1.0);
        let mut rng = from_seed(1);
        let m = mark_tree(&t, &Mechanism::quadratic(1.0), 1.0, 2.0, &mut rng)
            .unwrap()
            .with_edge_mark(1, Some(EdgeMark { time: 0.3, position: 0.4 }));
        let p = m.prune_at(0.5).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.edge_length(1), 0.4);
        assert_eq!(p.leaf_count(), 1);
        assert_eq!(m.prune_at(0.2).unwrap().edge_length(1), 1.0);
        assert_eq!(m.prune_at(2.5).unwrap_err(), Error::Horizon { theta: 2.5, horizon: 2.0 });
    }

    #[test]
    fn quadratic_node_marks_are_infinite() {
        let gw = GaltonWatson::new(&Mechanism::quadratic(1.0), 1.0, DEFAULT_TAIL_TOL).unwrap();
        let mut rng = from_seed(2);
        for _ in 0..50 {
            let t = gw.sample(&mut rng, Caps::default()).unwrap();
            let m = mark_tree(&t, gw.mechanism(), 1.0, 5.0, &mut rng).unwrap();
            assert!(m.node_marks().iter().flatten().all(|x| *x == NodeMark::Never));
        }
    }

    #[test]
    fn prune_at_zero_is_base() {
        let mech = Mechanism::new(0.0, 1.0, None, vec![Atom { r: 1.0, m: 1.0 }]).unwrap();
        let gw = GaltonWatson::new(&mech, 1.0, DEFAULT_TAIL_TOL).unwrap();
        let mut rng = from_seed(3);
        for _ in 0..50 {
            let t = gw.sample(&mut rng, Caps::default()).unwrap();
            let m = mark_tree(&t, &mech, 1.0, 3.0, &mut rng).unwrap();
            let p = m.prune_at(0.0).unwrap();
            assert_eq!(p.nodes(), t.nodes());
            assert!((p.leaf_mass() - t.leaf_mass()).abs() < 1e-12);
        }
    }

    #[test]
    fn growth_law_quadratic_example() {
        let law = growth_offspring_law(&Mechanism::quadratic(1.0), 1.0, 0.0, 1.0, DEFAULT_TAIL_TOL).unwrap();
        assert!((law.p(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((law.p(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!(law.probs().iter().skip(2).all(|&p| p == 0.0));
    }

    #[test]
    fn growth_law_near_identity() {
        let law = growth_offspring_law(&Mechanism::quadratic(1.0), 1.0, 0.5, 0.5 + 1e-9, DEFAULT_TAIL_TOL).unwrap();
        assert!((law.p(0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn growth_law_stable_sums_to_one() {
        let mech = Mechanism::new(0.0, 1.0, Some(StablePart { c: 1.0, gamma: 1.5 }), vec![]).unwrap();
        let law = growth_offspring_law(&mech, 1.0, 0.2, 1.0, 1e-12).unwrap();
        let s: f64 = law.probs().iter().sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn growth_refuses_boundary() {
        let q = Mechanism::quadratic(1.0);
        assert!(growth_offspring_law(&q, 1.0, -0.5, 1.0, DEFAULT_TAIL_TOL).is_err());
        assert!(growth_offspring_law(&q, 1.0, 1.0, 0.5, DEFAULT_TAIL_TOL).is_err());
    }

    #[test]
    fn growth_embeds_input() {
        let mech = Mechanism::quadratic(1.0);
        let base = GaltonWatson::pruned(&mech, 1.0, 1.0, DEFAULT_TAIL_TOL).unwrap();
        let grow = Growth::new(&mech, 1.0, 0.5, 1.0, DEFAULT_TAIL_TOL).unwrap();
        let mut rng = from_seed(4);
        for _ in 0..100 {
            let t = base.sample(&mut rng, Caps::default()).unwrap();
            let g = grow.step(&t, &mut rng, Caps::default()).unwrap();
            g.validate().unwrap();
            assert!(g.total_length() >= t.total_length() - 1e-12);
            assert!((g.leaf_mass() - 0.5).abs() < 1e-15);
        }
    }
}
