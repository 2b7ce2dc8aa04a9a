//! Offspring laws and samplers for Galton-Watson real trees.

use rand::Rng as _;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mechanism::Mechanism;
use crate::numerics::{minimal_fixed_point, FixedPoint};
use crate::rng::Rng;
use crate::tree::{NodeId, Tree};

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Largest support an offspring law may reach before truncation fails.
pub const MAX_SUPPORT: usize = 1_000_000;

/// Size limits for samplers of possibly infinite trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub max_nodes: usize,
    pub max_depth: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_nodes: 1_000_000, max_depth: 100_000 }
    }
}

/// A sampler hit its caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exceeded;

impl From<Exceeded> for Error {
    fn from(_: Exceeded) -> Self {
        Error::Exceeded
    }
}

/// Truncated law on the non-negative integers with an alias table for sampling.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    probs: Vec<f64>,
    tail_mass: f64,
    mean: f64,
    allows_one: bool,
    alias: WeightedAliasIndex<f64>,
}

impl OffspringLaw {
    /// `probs[n]` is the mass of `n`; the sampler renormalizes over the listed support.
    pub fn from_probs(probs: Vec<f64>, tail_mass: f64, mean: f64, allows_one: bool) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(domain("offspring probabilities must be finite and non-negative"));
        }
        if !allows_one && probs.get(1).copied().unwrap_or(0.0) != 0.0 {
            return Err(domain("offspring law must give no mass to 1"));
        }
        let alias = WeightedAliasIndex::new(probs.clone()).map_err(|e| domain(format!("alias table: {e}")))?;
        Ok(OffspringLaw { probs, tail_mass, mean, allows_one, alias })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn p(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Exact mean of the untruncated law.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn truncated_mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn allows_one(&self) -> bool {
        self.allows_one
    }

    pub fn pgf(&self, r: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, &p| acc * r + p)
    }

    pub fn pgf_derivative(&self, r: f64) -> f64 {
        self.probs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (n, &p)| acc * r + n as f64 * p)
    }

    pub fn pgf_second_derivative(&self, r: f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (n, &p)| acc * r + (n * (n - 1)) as f64 * p)
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        self.alias.sample(rng)
    }

    /// Law of `K* = N - 1` where `N` is drawn with weights `n p(n)`.
    pub fn size_biased(&self) -> Result<OffspringLaw> {
        let total: f64 = self.truncated_mean();
        if !(total > 0.0) {
            return Err(domain("size-biased law needs a positive mean"));
        }
        let probs: Vec<f64> = (1..self.probs.len()).map(|n| n as f64 * self.probs[n] / total).collect();
        let mean = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        OffspringLaw::from_probs(probs, 0.0, mean, true)
    }
}

/// Offspring law of the Galton-Watson tree for `mech` at intensity `lam`.
pub fn offspring_law(mech: &Mechanism, lam: f64, tail_tol: f64) -> Result<OffspringLaw> {
    let eta = mech.invert(lam)?;
    law_at(mech, eta, tail_tol)
}

fn check_tail_tol(tail_tol: f64) -> Result<()> {
    if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
        return Err(domain(format!("tail tolerance {tail_tol} outside (0, 1e-6]")));
    }
    Ok(())
}

/// Offspring law `p(n) = |psi^(n)(eta)| eta^(n-1) / (psi'(eta) n!)` of `mech` at `eta`.
pub fn law_at(mech: &Mechanism, eta: f64, tail_tol: f64) -> Result<OffspringLaw> {
    check_tail_tol(tail_tol)?;
    if !(eta > 0.0) {
        return Err(domain(format!("eta = {eta} must be positive")));
    }
    let scale = eta * mech.dpsi(eta);
    if !(scale > 0.0) {
        return Err(domain("psi' must be positive at eta"));
    }
    let mut probs = vec![mech.psi(eta) / scale, 0.0];
    let mut sum = probs[0];
    let quad = mech.beta() * eta * eta;
    for (i, t) in mech.jump_series(eta, eta).enumerate() {
        let n = i + 2;
        let p = (t + if n == 2 { quad } else { 0.0 }) / scale;
        probs.push(p);
        sum += p;
        if 1.0 - sum < tail_tol {
            break;
        }
        if n >= MAX_SUPPORT {
            return Err(Error::Truncation(MAX_SUPPORT));
        }
    }
    let mean = 1.0 - mech.dpsi(0.0) / mech.dpsi(eta);
    OffspringLaw::from_probs(probs, (1.0 - sum).max(0.0), mean, false)
}

/// Minimal fixed point of the pgf of `law` in `[0, 1]`.
pub fn extinction_probability(law: &OffspringLaw) -> Result<f64> {
    extinction_solve(law).map(|fp| fp.value)
}

pub fn extinction_solve(law: &OffspringLaw) -> Result<FixedPoint> {
    minimal_fixed_point(|r| law.pgf(r), |r| law.pgf_derivative(r), 1e-12, 100_000, "extinction probability")
}

/// Galton-Watson real tree with exponential lifetimes: the tree of `mech` at `eta`.
#[derive(Debug, Clone)]
pub struct GaltonWatson {
    mech: Mechanism,
    eta: f64,
    rate: f64,
    law: OffspringLaw,
}

struct Budget {
    nodes: usize,
    caps: Caps,
}

impl GaltonWatson {
    /// The tree of `mech` at intensity `lam`.
    pub fn new(mech: &Mechanism, lam: f64, tail_tol: f64) -> Result<Self> {
        let eta = mech.invert(lam)?;
        Self::at_eta(mech, eta, tail_tol)
    }

    /// The tree of `mech` at intensity `mech(eta)`.
    pub fn at_eta(mech: &Mechanism, eta: f64, tail_tol: f64) -> Result<Self> {
        let law = law_at(mech, eta, tail_tol)?;
        Ok(GaltonWatson { mech: mech.clone(), eta, rate: mech.dpsi(eta), law })
    }

    /// The tree of `psi_theta` at intensity `psi_theta(eta)`: the law of the
    /// sub-tree pruned at `theta`.
    pub fn pruned(mech: &Mechanism, theta: f64, eta: f64, tail_tol: f64) -> Result<Self> {
        Self::at_eta(&mech.shift(theta)?, eta, tail_tol)
    }

    pub fn mechanism(&self) -> &Mechanism {
        &self.mech
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Lifetime rate `psi'(eta)`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }

    pub fn intensity(&self) -> f64 {
        self.mech.psi(self.eta)
    }

    pub fn leaf_mass(&self) -> f64 {
        1.0 / self.intensity()
    }

    pub fn lifetime(&self, rng: &mut Rng) -> f64 {
        let e: f64 = Exp1.sample(rng);
        e / self.rate
    }

    /// Sample one tree; root degree one.
    pub fn sample(&self, rng: &mut Rng, caps: Caps) -> std::result::Result<Tree, Exceeded> {
        let mut t = Tree::new().with_leaf_mass(self.leaf_mass());
        let mut budget = Budget { nodes: 1, caps };
        self.grow_into(&mut t, 0, 0, f64::INFINITY, rng, &mut budget)?;
        Ok(t)
    }

    /// Sample the tree restricted to heights at most `a`.
    pub fn sample_to_height(&self, rng: &mut Rng, a: f64, caps: Caps) -> std::result::Result<Tree, Exceeded> {
        let mut t = Tree::new().with_leaf_mass(self.leaf_mass());
        let mut budget = Budget { nodes: 1, caps };
        self.grow_into(&mut t, 0, 0, a, rng, &mut budget)?;
        Ok(t)
    }

    /// Root joined to `K*` independent copies, `K*` size-biased.
    pub fn sample_gstar(&self, kstar: &OffspringLaw, rng: &mut Rng, caps: Caps) -> std::result::Result<Tree, Exceeded> {
        let mut t = Tree::new().with_leaf_mass(self.leaf_mass());
        let mut budget = Budget { nodes: 1, caps };
        let k = kstar.sample(rng);
        for _ in 0..k {
            self.grow_into(&mut t, 0, 0, f64::INFINITY, rng, &mut budget)?;
        }
        Ok(t)
    }

    /// Add one copy below `at` (at generation `generation`), cut at absolute height `limit`.
    fn grow_into(
        &self,
        t: &mut Tree,
        at: NodeId,
        generation: usize,
        limit: f64,
        rng: &mut Rng,
        budget: &mut Budget,
    ) -> std::result::Result<(), Exceeded> {
        let base = if limit.is_finite() { height_of(t, at) } else { 0.0 };
        let mut stack: Vec<(NodeId, usize, f64)> = vec![(at, generation, base)];
        let mut first = true;
        while let Some((parent, gen, depth)) = stack.pop() {
            let k = if first { 1 } else { self.law.sample(rng) };
            first = false;
            for _ in 0..k {
                budget.nodes += 1;
                if budget.nodes > budget.caps.max_nodes || gen + 1 > budget.caps.max_depth {
                    return Err(Exceeded);
                }
                let len = self.lifetime(rng);
                if depth + len > limit {
                    let id = t.add_child(parent, limit - depth);
                    t.mark_truncated(id);
                } else {
                    let id = t.add_child(parent, len);
                    stack.push((id, gen + 1, depth + len));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn graft_copies(
        &self,
        t: &mut Tree,
        at: NodeId,
        generation: usize,
        count: usize,
        rng: &mut Rng,
        nodes: &mut usize,
        caps: Caps,
    ) -> std::result::Result<(), Exceeded> {
        let mut budget = Budget { nodes: *nodes, caps };
        for _ in 0..count {
            self.grow_into(t, at, generation, f64::INFINITY, rng, &mut budget)?;
        }
        *nodes = budget.nodes;
        Ok(())
    }
}

fn height_of(t: &Tree, mut v: NodeId) -> f64 {
    let mut h = 0.0;
    while let Some(p) = t.parent(v) {
        h += t.edge_length(v);
        v = p;
    }
    h
}

/// Tree with a distinguished spine, the spine listed from the root downwards.
#[derive(Debug, Clone)]
pub struct SpineTree {
    pub tree: Tree,
    pub spine: Vec<NodeId>,
    /// Number of spine nodes that carry grafted subtrees.
    pub grafts: usize,
}

impl SpineTree {
    pub fn spine_length(&self) -> f64 {
        self.spine.iter().map(|&v| self.tree.edge_length(v)).sum()
    }
}

/// Sampler of the spine tree of `psi_theta` at `eta`, for sub-critical `psi_theta`.
///
/// Segments are exponential with rate `psi_theta'(eta)`; after each segment the
/// spine stops with probability `psi_theta'(0) / psi_theta'(eta)`, otherwise a
/// size-biased bush is grafted and the spine continues. The tip is a genuine leaf.
#[derive(Debug, Clone)]
pub struct SpineSampler {
    gw: GaltonWatson,
    kstar: OffspringLaw,
    stop: f64,
}

impl SpineSampler {
    pub fn new(mech: &Mechanism, lam: f64, theta: f64, tail_tol: f64) -> Result<Self> {
        let eta = mech.invert(lam)?;
        Self::at_eta(mech, theta, eta, tail_tol)
    }

    pub fn at_eta(mech: &Mechanism, theta: f64, eta: f64, tail_tol: f64) -> Result<Self> {
        let shifted = mech.shift(theta)?;
        let d0 = shifted.dpsi(0.0);
        if !(d0 > 0.0) {
            return Err(domain("spine trees need a sub-critical shifted mechanism"));
        }
        let gw = GaltonWatson::at_eta(&shifted, eta, tail_tol)?;
        let kstar = gw.law.size_biased()?;
        let stop = d0 / gw.rate;
        Ok(SpineSampler { gw, kstar, stop })
    }

    /// Stop probability per segment.
    pub fn stop_probability(&self) -> f64 {
        self.stop
    }

    pub fn galton_watson(&self) -> &GaltonWatson {
        &self.gw
    }

    pub fn kstar(&self) -> &OffspringLaw {
        &self.kstar
    }

    pub fn sample(&self, rng: &mut Rng, caps: Caps) -> std::result::Result<SpineTree, Exceeded> {
        let mut tree = Tree::new().with_leaf_mass(self.gw.leaf_mass());
        let mut spine = Vec::new();
        let mut nodes = 1;
        let mut grafts = 0;
        let mut current = 0;
        loop {
            nodes += 1;
            if nodes > caps.max_nodes || spine.len() + 1 > caps.max_depth {
                return Err(Exceeded);
            }
            let node = tree.add_child(current, self.gw.lifetime(rng));
            spine.push(node);
            if rng.random::<f64>() < self.stop {
                break;
            }
            let k = self.kstar.sample(rng);
            self.gw.graft_copies(&mut tree, node, spine.len(), k, rng, &mut nodes, caps)?;
            grafts += 1;
            current = node;
        }
        Ok(SpineTree { tree, spine, grafts })
    }
}

/// Retain each genuine leaf with probability `p` and span the survivors.
pub fn thin_and_span(t: &Tree, p: f64, rng: &mut Rng) -> Option<Tree> {
    let kept: Vec<NodeId> = t.leaves().into_iter().filter(|_| rng.random::<f64>() < p).collect();
    if kept.is_empty() {
        return None;
    }
    Some(t.span(&kept).expect("kept leaves are tips"))
}

/// Tree whose genuine leaves carry independent uniform times on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct TimedTree {
    pub tree: Tree,
    pub leaf_times: Vec<(NodeId, f64)>,
    pub horizon: f64,
}

impl TimedTree {
    pub fn attach_uniform_times(tree: Tree, horizon: f64, rng: &mut Rng) -> Self {
        let leaf_times = tree.leaves().into_iter().map(|v| (v, horizon * rng.random::<f64>())).collect();
        TimedTree { tree, leaf_times, horizon }
    }

    pub fn count_up_to(&self, z: f64) -> usize {
        self.leaf_times.iter().filter(|(_, s)| *s <= z).count()
    }

    /// Span of the leaves with time at most `z`.
    pub fn span_up_to(&self, z: f64) -> Option<Tree> {
        let kept: Vec<NodeId> = self.leaf_times.iter().filter(|(_, s)| *s <= z).map(|(v, _)| *v).collect();
        if kept.is_empty() {
            return None;
        }
        Some(self.tree.span(&kept).expect("timed leaves are tips"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::StablePart;
    use crate::rng::from_seed;

    fn stable15() -> Mechanism {
        Mechanism::new(0.0, 0.0, Some(StablePart { c: 1.0, gamma: 1.5 }), vec![]).unwrap()
    }

    #[test]
    fn quadratic_law_is_binary() {
        let law = offspring_law(&Mechanism::quadratic(1.0), 1.0, DEFAULT_TAIL_TOL).unwrap();
        assert!((law.p(0) - 0.5).abs() < 1e-15);
        assert_eq!(law.p(1), 0.0);
        assert!((law.p(2) - 0.5).abs() < 1e-15);
        assert_eq!(law.mean(), 1.0);
    }

    #[test]
    fn stable_law_matches_hand_values() {
        let law = offspring_law(&stable15(), 1.0, 1e-6).unwrap();
        assert!((law.p(0) - 2.0 / 3.0).abs() < 1e-14);
        assert!((law.p(2) - 0.25).abs() < 1e-14);
        assert!((law.p(3) - 1.0 / 24.0).abs() < 1e-14);
        assert!(law.tail_mass() < 1e-6);
    }

    #[test]
    fn stable_law_at_tight_tolerance_overflows_support() {
        assert_eq!(offspring_law(&stable15(), 1.0, 1e-12).unwrap_err(), Error::Truncation(MAX_SUPPORT));
    }

    #[test]
    fn bad_tail_tolerance_is_rejected() {
        assert!(offspring_law(&Mechanism::quadratic(1.0), 1.0, 1e-3).is_err());
        assert!(offspring_law(&Mechanism::quadratic(1.0), 0.0, 1e-12).is_err());
    }

    #[test]
    fn extinction_examples() {
        let q = Mechanism::quadratic(1.0);
        let critical = offspring_law(&q, 1.0, DEFAULT_TAIL_TOL).unwrap();
        assert!((extinction_probability(&critical).unwrap() - 1.0).abs() < 1e-5);
        let sup = law_at(&q.shift(-0.25).unwrap(), 1.0, DEFAULT_TAIL_TOL).unwrap();
        assert!((extinction_probability(&sup).unwrap() - 0.5).abs() < 1e-12);
        let sub = law_at(&q.shift(1.0).unwrap(), 1.0, DEFAULT_TAIL_TOL).unwrap();
        assert!((extinction_probability(&sub).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_bias_of_binary_law_is_one() {
        let law = offspring_law(&Mechanism::quadratic(1.0), 1.0, DEFAULT_TAIL_TOL).unwrap();
        let k = law.size_biased().unwrap();
        assert_eq!(k.p(1), 1.0);
        let mut rng = from_seed(1);
        assert!((0..100).all(|_| k.sample(&mut rng) == 1));
    }

    #[test]
    fn samples_respect_structure() {
        let gw = GaltonWatson::new(&Mechanism::quadratic(1.0), 1.0, DEFAULT_TAIL_TOL).unwrap();
        let mut rng = from_seed(3);
        for _ in 0..200 {
            if let Ok(t) = gw.sample(&mut rng, Caps::default()) {
                t.validate().unwrap();
                assert_eq!(t.children(0).len(), 1);
                assert_eq!(t.leaf_mass(), 1.0);
                assert!(t.nodes().iter().skip(1).all(|n| n.children.is_empty() || n.children.len() == 2));
            }
        }
    }

    #[test]
    fn caps_produce_exceeded() {
        let sup = Mechanism::new(-1.0, 1.0, None, vec![]).unwrap();
        let gw = GaltonWatson::new(&sup, 1.0, DEFAULT_TAIL_TOL).unwrap();
        let mut rng = from_seed(5);
        let caps = Caps { max_nodes: 50, max_depth: 100 };
        let exceeded = (0..200).filter(|_| gw.sample(&mut rng, caps).is_err()).count();
        assert!(exceeded > 0);
    }

    #[test]
    fn height_limited_samples_stay_below() {
        let gw = GaltonWatson::new(&Mechanism::quadratic(1.0), 1.0, DEFAULT_TAIL_TOL).unwrap();
        let mut rng = from_seed(9);
        for _ in 0..200 {
            let t = gw.sample_to_height(&mut rng, 0.7, Caps::default()).unwrap();
            assert!(t.height() <= 0.7 + 1e-12);
        }
    }

    #[test]
    fn spine_tree_stop_probability() {
        let s = SpineSampler::new(&Mechanism::quadratic(1.0), 1.0, 1.0, DEFAULT_TAIL_TOL).unwrap();
        assert!((s.stop_probability() - 0.5).abs() < 1e-15);
        let mut rng = from_seed(2);
        let st = s.sample(&mut rng, Caps::default()).unwrap();
        st.tree.validate().unwrap();
        assert!(st.tree.is_leaf(*st.spine.last().unwrap()));
        assert!(SpineSampler::new(&Mechanism::quadratic(1.0), 1.0, 0.0, DEFAULT_TAIL_TOL).is_err());
    }

    #[test]
    fn thinning_with_probability_one_is_identity() {
        let gw = GaltonWatson::new(&Mechanism::quadratic(1.0), 1.0, DEFAULT_TAIL_TOL).unwrap();
        let mut rng = from_seed(4);
        for _ in 0..50 {
            let t = gw.sample(&mut rng, Caps::default()).unwrap();
            let s = thin_and_span(&t, 1.0, &mut rng).unwrap();
            assert!(s.isometric(&t, 1e-12));
        }
    }
}
