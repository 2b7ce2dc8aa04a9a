//! Leaf statistics: generating functions, martingales and measure-change weights.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::gw::TimedTree;
use crate::mechanism::Mechanism;
use crate::numerics::minimal_fixed_point;
use crate::tree::Tree;

/// Iteration cap of the leaf generating-function solver.
pub const PGF_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgfSolve {
    pub zeta: f64,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Reduced generating function of the tree pruned at `theta` (intensity fixed through `eta`).
#[derive(Debug, Clone)]
struct ShiftedPgf<'a> {
    mech: &'a Mechanism,
    theta: f64,
    eta: f64,
    rate: f64,
}

impl<'a> ShiftedPgf<'a> {
    fn new(mech: &'a Mechanism, theta: f64, eta: f64) -> Self {
        ShiftedPgf { mech, theta, eta, rate: mech.dpsi(theta + eta) }
    }

    fn psi_theta(&self, u: f64) -> f64 {
        self.mech.psi(self.theta + u) - self.mech.psi(self.theta)
    }

    fn g(&self, r: f64) -> f64 {
        r + self.psi_theta((1.0 - r) * self.eta) / (self.eta * self.rate)
    }

    fn dg(&self, r: f64) -> f64 {
        1.0 - self.mech.dpsi(self.theta + (1.0 - r) * self.eta) / self.rate
    }

    fn solve(&self, zeta: f64) -> Result<PgfSolve> {
        let g0 = self.g(0.0);
        let fp = minimal_fixed_point(
            |x| self.g(x) + g0 * (zeta - 1.0),
            |x| self.dg(x),
            1e-13,
            PGF_MAX_ITERATIONS,
            "leaf generating function",
        )?;
        Ok(PgfSolve { zeta, value: fp.value, residual: fp.residual, iterations: fp.iterations })
    }
}

fn checked_eta(mech: &Mechanism, lam: f64, theta: f64) -> Result<f64> {
    let eta = mech.invert(lam)?;
    let theta_l = mech.theta_lambda_at(eta)?;
    if !(theta > theta_l) || !mech.in_domain(theta) {
        return Err(domain(format!("theta = {theta} must exceed theta_lambda = {theta_l}")));
    }
    Ok(eta)
}

/// Mean leaf count `psi_theta(eta) / (eta psi'(theta))`, infinite when `psi'(theta) <= 0`.
pub fn mean_leaves(mech: &Mechanism, lam: f64, theta: f64) -> Result<f64> {
    let eta = checked_eta(mech, lam, theta)?;
    let d = mech.dpsi(theta);
    if d <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((mech.psi(theta + eta) - mech.psi(theta)) / (eta * d))
}

/// First and second moments of the leaf count of the sub-critical tree pruned at `theta`.
pub fn leaf_moments(mech: &Mechanism, eta: f64, theta: f64) -> Result<(f64, f64)> {
    let rate = mech.dpsi(theta + eta);
    let d0 = mech.dpsi(theta);
    if !(d0 > 0.0) {
        return Err(domain("leaf moments need a sub-critical shifted mechanism"));
    }
    let g0 = (mech.psi(theta + eta) - mech.psi(theta)) / (eta * rate);
    let gap = d0 / rate;
    let g2 = eta * mech.d2psi(theta) / rate;
    let m1 = g0 / gap;
    let factorial2 = g2 * m1 * m1 / gap;
    Ok((m1, factorial2 + m1))
}

/// Generating function `E[zeta^L]` of the leaf count at pruning time `theta`.
pub fn leaf_pgf(mech: &Mechanism, lam: f64, theta: f64, zeta: f64) -> Result<PgfSolve> {
    if !(0.0..1.0).contains(&zeta) {
        return Err(domain("zeta must lie in [0, 1)"));
    }
    let eta = checked_eta(mech, lam, theta)?;
    ShiftedPgf::new(mech, theta, eta).solve(zeta)
}

/// Joint generating function `E[zeta^{L_theta} z^{L_q}]` for `theta > q`.
pub fn joint_leaf_pgf(mech: &Mechanism, lam: f64, q: f64, theta: f64, zeta: f64, z: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&zeta) || !(0.0..1.0).contains(&z) {
        return Err(domain("zeta and z must lie in [0, 1)"));
    }
    if !(theta > q) {
        return Err(domain("joint pgf needs theta > q"));
    }
    let eta = checked_eta(mech, lam, q)?;
    let hq = ShiftedPgf::new(mech, q, eta).solve(z)?.value;
    let psi_shift = |s: f64, u: f64| mech.psi(s + u) - mech.psi(s);
    let denom = psi_shift(theta, eta);
    let growth = |r: f64| 1.0 - (psi_shift(theta, eta * (1.0 - r)) - psi_shift(q, eta * (1.0 - r))) / denom;
    let w = growth(hq) + growth(0.0) * (z - 1.0);
    Ok(ShiftedPgf::new(mech, theta, eta).solve(zeta * w)?.value)
}

/// `psi'(theta) L / psi_theta(eta)`.
pub fn martingale_r(t: &Tree, mech: &Mechanism, lam: f64, theta: f64) -> Result<f64> {
    let q0 = mech.q0()?;
    if !(theta > q0) {
        return Err(domain(format!("theta = {theta} must exceed q0 = {q0}")));
    }
    let eta = mech.invert(lam)?;
    Ok(mech.dpsi(theta) * t.leaf_count() as f64 / (mech.psi(theta + eta) - mech.psi(theta)))
}

fn supercritical_q0(mech: &Mechanism) -> Result<f64> {
    let q0 = mech.q0()?;
    if !(q0 > 0.0) {
        return Err(domain("measure change needs a super-critical mechanism"));
    }
    Ok(q0)
}

/// `(eta / (eta - q0))^(L(a, t) - 1)` for a super-critical mechanism.
pub fn girsanov_weight(t: &Tree, mech: &Mechanism, lam: f64, a: f64) -> Result<f64> {
    let q0 = supercritical_q0(mech)?;
    if !(a > 0.0) {
        return Err(domain("level must be positive"));
    }
    let eta = mech.invert(lam)?;
    Ok((eta / (eta - q0)).powi(t.leaves_at_level(a) as i32 - 1))
}

/// Likelihood ratio of the tree at `q` against the tree at `theta`, both restricted to level `a`.
pub fn qq_girsanov_weight(t: &Tree, mech: &Mechanism, lam: f64, theta: f64, q: f64, a: f64) -> Result<f64> {
    if !(q >= theta) {
        return Err(domain("weight needs q >= theta"));
    }
    if !(a > 0.0) {
        return Err(domain("level must be positive"));
    }
    if q == theta {
        return Ok(1.0);
    }
    let eta = mech.invert(lam)?;
    let r = t.restrict(a);
    let psi_q = mech.psi(q + eta) - mech.psi(q);
    let psi_t = mech.psi(theta + eta) - mech.psi(theta);
    let mut log_w = r.leaf_count() as f64 * (psi_q / psi_t).ln();
    log_w += (mech.dpsi(theta + eta) - mech.dpsi(q + eta)) * r.total_length();
    for v in r.branch_nodes() {
        let k = r.children(v).len();
        log_w += mech.ln_abs_derivative(q + eta, k) - mech.ln_abs_derivative(theta + eta, k);
    }
    Ok(log_w.exp())
}

/// `(eta_z / (eta_z - q0))^(L(a, span of leaves with time <= z))` with `eta_z = psi^{-1}(z)`.
pub fn mart_q(timed: &TimedTree, z: f64, a: f64, mech: &Mechanism) -> Result<f64> {
    let q0 = supercritical_q0(mech)?;
    if !(z > 0.0 && z <= timed.horizon) {
        return Err(domain(format!("z = {z} outside (0, {}]", timed.horizon)));
    }
    let eta = mech.invert(z)?;
    let level = timed.span_up_to(z).map_or(0, |s| s.leaves_at_level(a));
    Ok((eta / (eta - q0)).powi(level as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gw::{law_at, DEFAULT_TAIL_TOL};
    use crate::mechanism::StablePart;

    fn quad_closed_form(eta: f64, theta: f64, zeta: f64) -> f64 {
        (eta + theta - (theta * theta * zeta + (1.0 - zeta) * (theta + eta).powi(2)).sqrt()) / eta
    }

    #[test]
    fn mean_leaves_examples() {
        let q = Mechanism::quadratic(1.0);
        assert!((mean_leaves(&q, 1.0, 1.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(mean_leaves(&q, 1.0, 0.0).unwrap(), f64::INFINITY);
        let b = Mechanism::quadratic(2.5);
        let eta = (3.0_f64 / 2.5).sqrt();
        assert!((mean_leaves(&b, 3.0, 0.7).unwrap() - (eta + 1.4) / 1.4).abs() < 1e-13);
        assert!(mean_leaves(&q, 1.0, -0.5).is_err());
    }

    #[test]
    fn leaf_pgf_quadratic_example() {
        let s = leaf_pgf(&Mechanism::quadratic(1.0), 1.0, 1.0, 0.5).unwrap();
        assert!((s.value - (2.0 - 2.5_f64.sqrt())).abs() < 1e-12);
        assert!(s.residual < 1e-12);
        assert_eq!(leaf_pgf(&Mechanism::quadratic(1.0), 1.0, 1.0, 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn leaf_pgf_matches_closed_form_on_grid() {
        let q = Mechanism::quadratic(1.0);
        for &theta in &[0.5, 1.0, -0.2] {
            for i in 0..10 {
                let zeta = i as f64 / 10.0;
                let v = leaf_pgf(&q, 1.0, theta, zeta).unwrap().value;
                assert!((v - quad_closed_form(1.0, theta, zeta)).abs() < 1e-10, "theta={theta} zeta={zeta}");
            }
        }
    }

    #[test]
    fn leaf_pgf_limit_is_extinction_probability() {
        let q = Mechanism::quadratic(1.0);
        let theta = -0.25;
        let near_one = leaf_pgf(&q, 1.0, theta, 1.0 - 1e-13).unwrap().value;
        let ext = crate::gw::extinction_probability(&law_at(&q.shift(theta).unwrap(), 1.0, DEFAULT_TAIL_TOL).unwrap()).unwrap();
        assert!((near_one - ext).abs() < 1e-10);
        assert!((near_one - 0.5).abs() < 1e-10);
    }

    #[test]
    fn leaf_pgf_slope_is_mean() {
        let m = Mechanism::new(0.0, 1.0, Some(StablePart { c: 0.5, gamma: 1.5 }), vec![]).unwrap();
        let h = 1e-6;
        let a = leaf_pgf(&m, 1.0, 0.7, 1.0 - h).unwrap().value;
        let b = leaf_pgf(&m, 1.0, 0.7, 1.0 - 2.0 * h).unwrap().value;
        let slope = (3.0 - 4.0 * a + b) / (2.0 * h);
        let mean = mean_leaves(&m, 1.0, 0.7).unwrap();
        assert!((slope / mean - 1.0).abs() < 1e-4);
    }

    #[test]
    fn joint_pgf_marginals() {
        let q = Mechanism::quadratic(1.0);
        for &(zeta, z) in &[(0.3, 0.6), (0.8, 0.1), (0.5, 0.5)] {
            let near = joint_leaf_pgf(&q, 1.0, 0.5, 1.0, 1.0 - 1e-12, z).unwrap();
            let hq = leaf_pgf(&q, 1.0, 0.5, z).unwrap().value;
            assert!((near - hq).abs() < 1e-8);
            let near = joint_leaf_pgf(&q, 1.0, 0.5, 1.0, zeta, 1.0 - 1e-12).unwrap();
            let ht = leaf_pgf(&q, 1.0, 1.0, zeta).unwrap().value;
            assert!((near - ht).abs() < 1e-8);
        }
    }

    #[test]
    fn leaf_moments_quadratic() {
        let (m1, m2) = leaf_moments(&Mechanism::quadratic(1.0), 1.0, 1.0).unwrap();
        assert!((m1 - 1.5).abs() < 1e-15);
        assert!((m2 - 3.75).abs() < 1e-14);
    }

    #[test]
    fn martingale_r_arithmetic() {
        let mut t = Tree::new();
        let n = t.add_child(0, 1.0);
        let m = t.add_child(n, 1.0);
        t.add_child(n, 1.0);
        t.add_child(m, 1.0);
        t.add_child(m, 1.0);
        assert_eq!(t.leaf_count(), 3);
        assert!((martingale_r(&t, &Mechanism::quadratic(1.0), 1.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(martingale_r(&t, &Mechanism::quadratic(1.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn girsanov_examples() {
        let sup = Mechanism::new(-1.0, 1.0, None, vec![]).unwrap();
        let low = Tree::segment(0.2);
        assert!((girsanov_weight(&low, &sup, 2.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
        let mut t = Tree::new();
        let n = t.add_child(0, 0.3);
        t.add_child(n, 1.0);
        t.add_child(n, 1.0);
        assert!((girsanov_weight(&t, &sup, 2.0, 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!(girsanov_weight(&t, &Mechanism::quadratic(1.0), 2.0, 0.5).is_err());
    }

    #[test]
    fn qq_weight_examples() {
        let q = Mechanism::quadratic(1.0);
        let t = Tree::segment(0.3);
        assert_eq!(qq_girsanov_weight(&t, &q, 1.0, 0.5, 0.5, 1.0).unwrap(), 1.0);
        let (theta, qq, l) = (0.2_f64, 0.9_f64, 0.3_f64);
        let eta = 1.0;
        let ratio = ((qq + eta) * (qq + eta) - qq * qq) / ((theta + eta) * (theta + eta) - theta * theta);
        let expected = ratio * ((2.0 * theta - 2.0 * qq) * l).exp();
        assert!((qq_girsanov_weight(&t, &q, 1.0, theta, qq, 1.0).unwrap() - expected).abs() < 1e-14);
    }
}
