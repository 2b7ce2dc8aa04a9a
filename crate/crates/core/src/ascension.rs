//! Ascension time of a critical mechanism and the tree observed at that time.

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};

use crate::error::{domain, Error, Result};
use crate::gw::{Caps, Exceeded, GaltonWatson, SpineSampler, SpineTree, DEFAULT_TAIL_TOL};
use crate::mechanism::{Criticality, Mechanism};
use crate::numerics::solve_increasing;
use crate::rng::Rng;
use crate::tree::Tree;

/// Width of the bracket returned by inverse-cdf sampling.
pub const INVERSION_TOL: f64 = 1e-10;

/// Law of the ascension time on `(theta_lambda, 0)`.
#[derive(Debug, Clone)]
pub struct AscensionLaw {
    mech: Mechanism,
    lam: f64,
    eta: f64,
    theta_lambda: f64,
}

fn require_critical(mech: &Mechanism) -> Result<()> {
    if mech.criticality() != Criticality::Critical {
        return Err(domain("ascension needs a critical mechanism"));
    }
    if mech.stable().is_some() {
        return Err(domain("a stable part leaves no room below zero"));
    }
    Ok(())
}

impl AscensionLaw {
    pub fn new(mech: &Mechanism, lam: f64) -> Result<Self> {
        require_critical(mech)?;
        if !(lam > 0.0) {
            return Err(domain("intensity must be positive"));
        }
        let eta = mech.invert(lam)?;
        let theta_lambda = mech.theta_lambda_at(eta)?;
        Ok(AscensionLaw { mech: mech.clone(), lam, eta, theta_lambda })
    }

    pub fn lam(&self) -> f64 {
        self.lam
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn theta_lambda(&self) -> f64 {
        self.theta_lambda
    }

    pub fn mechanism(&self) -> &Mechanism {
        &self.mech
    }

    fn check(&self, theta: f64) -> Result<()> {
        if !(theta >= self.theta_lambda && theta <= 0.0) {
            return Err(domain(format!("theta = {theta} outside [{}, 0]", self.theta_lambda)));
        }
        Ok(())
    }

    /// Conjugate point solved to relative precision, so the density stays accurate near zero.
    fn conjugate(&self, theta: f64) -> Result<f64> {
        if theta == 0.0 {
            return Ok(0.0);
        }
        let target = self.mech.psi(theta);
        let mut hi = -theta;
        while self.mech.psi(hi) < target {
            hi *= 2.0;
        }
        let tol = 4.0 * f64::EPSILON * target;
        solve_increasing(|x| self.mech.psi(x) - target, |x| self.mech.dpsi(x), 0.0, hi, tol, "conjugate")
    }

    /// `1 - (theta_bar - theta) / eta`.
    pub fn cdf(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        if theta == 0.0 {
            return Ok(1.0);
        }
        let bar = self.conjugate(theta)?;
        Ok((1.0 - (bar - theta) / self.eta).clamp(0.0, 1.0))
    }

    /// `(1 - psi'(theta) / psi'(theta_bar)) / eta`.
    pub fn pdf(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        let bar = self.conjugate(theta)?;
        let db = self.mech.dpsi(bar);
        if db == 0.0 {
            return Ok(0.0);
        }
        Ok(((1.0 - self.mech.dpsi(theta) / db) / self.eta).max(0.0))
    }

    /// `eta F(theta) = eta - theta_bar + theta`.
    pub fn eta_at(&self, theta: f64) -> Result<f64> {
        Ok(self.eta * self.cdf(theta)?)
    }

    /// Inverse-cdf draw by bisection.
    pub fn sample_time(&self, rng: &mut Rng) -> Result<f64> {
        let u: f64 = rng.random();
        let (mut lo, mut hi) = (self.theta_lambda, 0.0);
        let mut iterations = 0;
        while hi - lo > INVERSION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid)? < u {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
            if iterations > 200 {
                return Err(Error::Convergence { what: "ascension inversion", iterations });
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Spine sampler for the tree at ascension given `A = theta`.
    pub fn spine_sampler_at(&self, theta: f64) -> Result<SpineSampler> {
        if !(theta > self.theta_lambda && theta < 0.0) {
            return Err(domain(format!("theta = {theta} outside ({}, 0)", self.theta_lambda)));
        }
        let bar = self.conjugate(theta)?;
        SpineSampler::at_eta(&self.mech, bar, self.eta_at(theta)?, DEFAULT_TAIL_TOL)
    }

    /// Tree at ascension conditioned on `A = theta`.
    pub fn sample_tree_at(&self, theta: f64, rng: &mut Rng, caps: Caps) -> Result<SpineTree> {
        Ok(self.spine_sampler_at(theta)?.sample(rng, caps)?)
    }

    /// Ascension time together with the tree at that time.
    pub fn sample_tree(&self, rng: &mut Rng, caps: Caps) -> Result<(f64, SpineTree)> {
        let a = self.sample_time(rng)?;
        Ok((a, self.sample_tree_at(a, rng, caps)?))
    }
}

pub fn ascension_cdf(mech: &Mechanism, lam: f64, theta: f64) -> Result<f64> {
    AscensionLaw::new(mech, lam)?.cdf(theta)
}

pub fn sample_ascension_time(mech: &Mechanism, lam: f64, rng: &mut Rng) -> Result<f64> {
    AscensionLaw::new(mech, lam)?.sample_time(rng)
}

pub fn sample_ascension_tree(mech: &Mechanism, lam: f64, rng: &mut Rng, caps: Caps) -> Result<(f64, SpineTree)> {
    AscensionLaw::new(mech, lam)?.sample_tree(rng, caps)
}

/// Infinite spine cut at height `a`: Poisson graft points with rate `psi'(eta)`,
/// each carrying a size-biased bush. The spine tip is a truncation point.
pub fn sample_infinite_spine_truncated(mech: &Mechanism, lam: f64, a: f64, rng: &mut Rng, caps: Caps) -> Result<SpineTree> {
    require_critical(mech)?;
    if !(a > 0.0) {
        return Err(domain("height cap must be positive"));
    }
    let gw = GaltonWatson::new(mech, lam, DEFAULT_TAIL_TOL)?;
    let kstar = gw.law().size_biased()?;
    let rate = gw.rate() * a;
    let count = if rate > 0.0 {
        Poisson::new(rate).map_err(|e| domain(e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    if count + 2 > caps.max_nodes || count + 1 > caps.max_depth {
        return Err(Exceeded.into());
    }
    let mut points: Vec<f64> = (0..count).map(|_| a * rng.random::<f64>()).collect();
    points.sort_by(f64::total_cmp);
    let mut tree = Tree::new().with_leaf_mass(gw.leaf_mass());
    let mut spine = Vec::with_capacity(count + 1);
    let mut current = 0;
    let mut level = 0.0;
    let mut nodes = count + 2;
    for &p in &points {
        current = tree.add_child(current, p - level);
        level = p;
        spine.push(current);
        let k = kstar.sample(rng);
        gw.graft_copies(&mut tree, current, spine.len(), k, rng, &mut nodes, caps)?;
    }
    let tip = tree.add_child(current, a - level);
    tree.mark_truncated(tip);
    spine.push(tip);
    Ok(SpineTree { tree, spine, grafts: count })
}
