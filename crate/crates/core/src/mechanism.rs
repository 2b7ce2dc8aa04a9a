//! Branching mechanisms with closed-form derivatives.
//!
//! A mechanism is `psi(u) = alpha u + beta u^2 + c u^gamma + sum_i m_i (exp(-r_i u) - 1 + r_i u)`,
//! optionally shifted: the shifted mechanism is `psi(u + s) - psi(s)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::solve_increasing;

/// Highest derivative order accepted by [`Mechanism::evaluate`].
pub const MAX_ORDER: usize = 64;

/// Residual tolerance used by all scalar inversions.
pub const ROOT_TOL: f64 = 1e-13;

/// Stable component `c u^gamma` with `gamma` in (1, 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StablePart {
    pub c: f64,
    pub gamma: f64,
}

/// Point mass `m` of the Levy measure at jump size `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub r: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Sub,
    Critical,
    Super,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Landmarks {
    pub theta_star: Option<f64>,
    pub q0: f64,
    pub criticality: Criticality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mechanism {
    alpha: f64,
    beta: f64,
    stable: Option<StablePart>,
    atoms: Vec<Atom>,
    shift: f64,
}

fn expm1_plus(y: f64) -> f64 {
    // exp(-y) - 1 + y without cancellation for small y.
    if y.abs() < 1e-3 {
        let y2 = y * y;
        y2 * (0.5 - y / 6.0 + y2 / 24.0 - y2 * y / 120.0)
    } else {
        (-y).exp_m1() + y
    }
}

impl Mechanism {
    pub fn new(alpha: f64, beta: f64, stable: Option<StablePart>, atoms: Vec<Atom>) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(domain("alpha must be finite"));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(domain("beta must be finite and non-negative"));
        }
        let stable = match stable {
            Some(s) if s.c == 0.0 => None,
            Some(s) => {
                if !(s.c > 0.0) || !s.c.is_finite() {
                    return Err(domain("stable coefficient must be positive"));
                }
                if !(s.gamma > 1.0 && s.gamma < 2.0) {
                    return Err(domain("stable index must lie in (1, 2)"));
                }
                Some(s)
            }
            None => None,
        };
        for a in &atoms {
            if !(a.r > 0.0 && a.r.is_finite() && a.m > 0.0 && a.m.is_finite()) {
                return Err(domain("atoms need positive finite jump size and mass"));
            }
        }
        if beta == 0.0 && stable.is_none() {
            return Err(domain("need beta > 0 or a stable part (infinite variation)"));
        }
        Ok(Mechanism { alpha, beta, stable, atoms, shift: 0.0 })
    }

    /// `psi(u) = beta u^2`.
    pub fn quadratic(beta: f64) -> Self {
        Self::new(0.0, beta, None, Vec::new()).expect("quadratic mechanism")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn stable(&self) -> Option<StablePart> {
        self.stable
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Accumulated shift of this mechanism relative to its base.
    pub fn offset(&self) -> f64 {
        self.shift
    }

    /// Smallest admissible argument, `-inf` without a stable part.
    pub fn domain_min(&self) -> f64 {
        if self.stable.is_some() {
            -self.shift
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn in_domain(&self, u: f64) -> bool {
        u.is_finite() && u >= self.domain_min()
    }

    /// `k`-th derivative of the shifted mechanism at `u`, with domain and order checks.
    pub fn evaluate(&self, u: f64, k: usize) -> Result<f64> {
        if k > MAX_ORDER {
            return Err(Error::Order(k));
        }
        if !self.in_domain(u) {
            return Err(domain(format!("argument {u} outside the mechanism domain")));
        }
        Ok(self.derivative(u, k))
    }

    pub fn psi(&self, u: f64) -> f64 {
        let s = self.shift;
        let x = u + s;
        let mut v = self.alpha * u + self.beta * u * (u + 2.0 * s);
        if let Some(st) = self.stable {
            v += st.c * (x.powf(st.gamma) - s.powf(st.gamma));
        }
        for a in &self.atoms {
            if s == 0.0 {
                v += a.m * expm1_plus(a.r * u);
            } else {
                v += a.m * ((-a.r * s).exp() * (-a.r * u).exp_m1() + a.r * u);
            }
        }
        v
    }

    pub fn dpsi(&self, u: f64) -> f64 {
        let x = u + self.shift;
        let mut v = self.alpha + 2.0 * self.beta * x;
        if let Some(st) = self.stable {
            v += st.c * st.gamma * x.powf(st.gamma - 1.0);
        }
        for a in &self.atoms {
            v -= a.m * a.r * (-a.r * x).exp_m1();
        }
        v
    }

    pub fn d2psi(&self, u: f64) -> f64 {
        self.derivative(u, 2)
    }

    /// `k`-th derivative without checks; any order is accepted.
    pub fn derivative(&self, u: f64, k: usize) -> f64 {
        match k {
            0 => return self.psi(u),
            1 => return self.dpsi(u),
            _ => {}
        }
        let x = u + self.shift;
        let mut v = if k == 2 { 2.0 * self.beta } else { 0.0 };
        if let Some(st) = self.stable {
            let mut falling = st.c;
            for j in 0..k {
                falling *= st.gamma - j as f64;
            }
            v += falling * x.powf(st.gamma - k as f64);
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for a in &self.atoms {
            v += sign * a.m * (k as f64 * a.r.ln() - a.r * x).exp();
        }
        v
    }

    /// `ln |psi^(k)(u)|` for `k >= 2`, evaluated in log space.
    pub fn ln_abs_derivative(&self, u: f64, k: usize) -> f64 {
        assert!(k >= 2, "log-derivative needs order >= 2");
        let x = u + self.shift;
        let mut logs: Vec<f64> = Vec::with_capacity(self.atoms.len() + 2);
        if k == 2 && self.beta > 0.0 {
            logs.push((2.0 * self.beta).ln());
        }
        if let Some(st) = self.stable {
            let mut l = st.c.ln();
            for j in 0..k {
                l += (st.gamma - j as f64).abs().ln();
            }
            logs.push(l + (st.gamma - k as f64) * x.ln());
        }
        for a in &self.atoms {
            logs.push(a.m.ln() + k as f64 * a.r.ln() - a.r * x);
        }
        log_sum_exp(&logs)
    }

    /// The mechanism `u -> psi(u + theta) - psi(theta)`.
    pub fn shift(&self, theta: f64) -> Result<Mechanism> {
        if !theta.is_finite() {
            return Err(domain("shift must be finite"));
        }
        let total = self.shift + theta;
        if self.stable.is_some() && total < 0.0 {
            return Err(domain(format!("stable part forbids net shift {total}")));
        }
        let mut m = self.clone();
        m.shift = total;
        Ok(m)
    }

    /// Root of `psi'` on the domain, if any.
    pub fn theta_star(&self) -> Option<f64> {
        let dmin = self.domain_min();
        if dmin.is_finite() {
            let d = self.dpsi(dmin);
            if d.abs() <= 1e-300 {
                return Some(dmin);
            }
            if d > 0.0 {
                return None;
            }
            let mut hi = dmin.max(0.0) + 1.0;
            for _ in 0..2000 {
                if self.dpsi(hi) >= 0.0 {
                    break;
                }
                hi = dmin + 2.0 * (hi - dmin);
            }
            return solve_increasing(|u| self.dpsi(u), |u| self.d2psi(u), dmin, hi, 1e-14, "theta_star").ok();
        }
        let d0 = self.dpsi(0.0);
        if d0 == 0.0 {
            return Some(0.0);
        }
        let (mut lo, mut hi) = (0.0, 0.0);
        let mut step = 1.0;
        for _ in 0..2000 {
            if d0 < 0.0 {
                hi = step;
                if self.dpsi(hi) >= 0.0 {
                    break;
                }
                lo = hi;
            } else {
                lo = -step;
                if self.dpsi(lo) <= 0.0 {
                    break;
                }
                hi = lo;
            }
            step *= 2.0;
        }
        solve_increasing(|u| self.dpsi(u), |u| self.d2psi(u), lo, hi, 1e-14, "theta_star").ok()
    }

    pub fn criticality(&self) -> Criticality {
        let d = self.dpsi(0.0);
        let scale = 1.0 + self.alpha.abs() + self.beta;
        if d.abs() <= 1e-13 * scale {
            Criticality::Critical
        } else if d > 0.0 {
            Criticality::Sub
        } else {
            Criticality::Super
        }
    }

    pub fn landmarks(&self) -> Landmarks {
        let q0 = self.invert(0.0).unwrap_or(0.0);
        Landmarks { theta_star: self.theta_star(), q0, criticality: self.criticality() }
    }

    /// Largest root of `psi`, i.e. `psi^{-1}(0)`.
    pub fn q0(&self) -> Result<f64> {
        self.invert(0.0)
    }

    /// Inverse of `psi` on `[theta*, inf)`.
    pub fn invert(&self, lam: f64) -> Result<f64> {
        if !lam.is_finite() {
            return Err(domain("intensity must be finite"));
        }
        let lower = self.theta_star().unwrap_or_else(|| self.domain_min());
        let base = self.psi(lower);
        if lam < base {
            return Err(domain(format!("{lam} lies below the minimum {base} of psi")));
        }
        let tol = ROOT_TOL * lam.abs().max(1.0);
        if (base - lam).abs() <= tol {
            return Ok(lower);
        }
        let mut step = 1.0;
        let mut hi = lower + step;
        let mut grown = 0;
        while self.psi(hi) < lam {
            step *= 2.0;
            hi = lower + step;
            grown += 1;
            if grown > 1100 {
                return Err(Error::Convergence { what: "invert bracket", iterations: grown });
            }
        }
        let lo = if step > 1.0 { lower + 0.5 * step } else { lower };
        solve_increasing(|u| self.psi(u) - lam, |u| self.dpsi(u), lo, hi, tol, "invert")
    }

    /// The point `theta_bar >= theta*` with `psi(theta_bar) = psi(theta)`.
    pub fn conjugate(&self, theta: f64) -> Result<f64> {
        if !self.in_domain(theta) {
            return Err(domain(format!("{theta} outside the mechanism domain")));
        }
        match self.theta_star() {
            Some(ts) if theta < ts => self.invert(self.psi(theta)),
            _ => Ok(theta),
        }
    }

    /// `inf { theta : psi_theta(eta) >= 0 }` with `eta = psi^{-1}(lam)`.
    pub fn theta_lambda(&self, lam: f64) -> Result<f64> {
        if !(lam > 0.0) {
            return Err(domain("theta_lambda needs lam > 0"));
        }
        let eta = self.invert(lam)?;
        self.theta_lambda_at(eta)
    }

    pub(crate) fn theta_lambda_at(&self, eta: f64) -> Result<f64> {
        let f = |t: f64| self.psi(t + eta) - self.psi(t);
        let df = |t: f64| self.dpsi(t + eta) - self.dpsi(t);
        let dmin = self.domain_min();
        let lo = if dmin.is_finite() {
            if f(dmin) >= 0.0 {
                return Ok(dmin.min(0.0));
            }
            dmin
        } else {
            let mut lo = -eta;
            let mut n = 0;
            while f(lo) > 0.0 {
                lo *= 2.0;
                n += 1;
                if n > 1100 {
                    return Err(Error::Convergence { what: "theta_lambda bracket", iterations: n });
                }
            }
            lo
        };
        let tol = ROOT_TOL * eta.abs().max(1.0);
        solve_increasing(f, df, lo, 0.0, tol, "theta_lambda")
    }

    /// Terms `|psi^(n)(u)| eta^n / n!` for `n = 2, 3, ...`, excluding the
    /// quadratic contribution `beta eta^2` at `n = 2`.
    pub(crate) fn jump_series(&self, u: f64, eta: f64) -> JumpSeries {
        let x = u + self.shift;
        let stable = self.stable.map(|st| {
            let first = st.c * st.gamma * (st.gamma - 1.0) / 2.0 * x.powf(st.gamma - 2.0) * eta * eta;
            (first, st.gamma, eta / x)
        });
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let lr = (a.r * eta).ln();
                (a.m.ln() - a.r * x + 2.0 * lr - std::f64::consts::LN_2, lr)
            })
            .collect();
        JumpSeries { n: 2, stable, atoms }
    }
}

/// Iterator produced by [`Mechanism::jump_series`].
pub(crate) struct JumpSeries {
    n: usize,
    stable: Option<(f64, f64, f64)>,
    atoms: Vec<(f64, f64)>,
}

impl Iterator for JumpSeries {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let n = self.n;
        let mut v = 0.0;
        if let Some((term, gamma, ratio)) = self.stable.as_mut() {
            v += *term;
            *term *= (*gamma - n as f64).abs() / (n as f64 + 1.0) * *ratio;
        }
        let next_ln = ((n + 1) as f64).ln();
        for (ln_term, lr) in self.atoms.iter_mut() {
            v += ln_term.exp();
            *ln_term += *lr - next_ln;
        }
        self.n += 1;
        Some(v)
    }
}

pub(crate) fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stable15() -> Mechanism {
        Mechanism::new(0.0, 0.0, Some(StablePart { c: 1.0, gamma: 1.5 }), vec![]).unwrap()
    }

    fn quad_atom() -> Mechanism {
        Mechanism::new(0.0, 1.0, None, vec![Atom { r: 1.0, m: 1.0 }]).unwrap()
    }

    fn super_quad() -> Mechanism {
        Mechanism::new(-1.0, 1.0, None, vec![]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let q = Mechanism::quadratic(1.0);
        assert_eq!(q.evaluate(1.0, 0).unwrap(), 1.0);
        assert_eq!(q.evaluate(1.0, 2).unwrap(), 2.0);
        assert!((stable15().evaluate(1.0, 3).unwrap() + 0.375).abs() < 1e-15);
    }

    #[test]
    fn evaluate_rejects_bad_order_and_domain() {
        assert_eq!(Mechanism::quadratic(1.0).evaluate(0.0, 65), Err(Error::Order(65)));
        assert!(matches!(stable15().evaluate(-0.1, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn atom_only_mechanisms_are_rejected() {
        assert!(Mechanism::new(1.0, 0.0, None, vec![Atom { r: 1.0, m: 1.0 }]).is_err());
    }

    #[test]
    fn invert_examples() {
        assert!((Mechanism::quadratic(1.0).invert(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((super_quad().invert(2.0).unwrap() - 2.0).abs() < 1e-13);
        let m = quad_atom();
        let eta = m.invert(1.0).unwrap();
        assert!((m.psi(eta) - 1.0).abs() < 1e-12);
        // Bisection oracle on the closed form.
        let f = |u: f64| u * u + (-u).exp() - 1.0 + u - 1.0;
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((eta - lo).abs() < 1e-12);
        assert!((eta - 0.850_037_431_536_413_4).abs() < 1e-12);
    }

    #[test]
    fn shift_examples() {
        let q = Mechanism::quadratic(1.0);
        assert_eq!(q.shift(1.0).unwrap().psi(1.0), 3.0);
        let s = super_quad().shift(1.0).unwrap();
        assert!((s.dpsi(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(s.psi(0.0), 0.0);
        assert!(stable15().shift(-0.5).is_err());
    }

    #[test]
    fn landmark_examples() {
        let l = Mechanism::quadratic(1.0).landmarks();
        assert_eq!(l.theta_star, Some(0.0));
        assert_eq!(l.q0, 0.0);
        assert_eq!(l.criticality, Criticality::Critical);

        let l = super_quad().landmarks();
        assert!((l.theta_star.unwrap() - 0.5).abs() < 1e-13);
        assert!((l.q0 - 1.0).abs() < 1e-13);
        assert_eq!(l.criticality, Criticality::Super);

        let l = Mechanism::new(1.0, 1.0, None, vec![]).unwrap().landmarks();
        assert!((l.theta_star.unwrap() + 0.5).abs() < 1e-13);
        assert!(l.q0.abs() < 1e-13);
        assert_eq!(l.criticality, Criticality::Sub);

        let sub_stable = Mechanism::new(1.0, 0.0, Some(StablePart { c: 1.0, gamma: 1.5 }), vec![]).unwrap();
        assert_eq!(sub_stable.theta_star(), None);
    }

    #[test]
    fn conjugate_examples() {
        assert!((Mechanism::quadratic(2.0).conjugate(-0.25).unwrap() - 0.25).abs() < 1e-13);
        let m = super_quad();
        assert!((m.conjugate(0.0).unwrap() - 1.0).abs() < 1e-13);
        assert_eq!(m.conjugate(0.5).unwrap(), 0.5);
    }

    #[test]
    fn theta_lambda_examples() {
        let beta: f64 = 2.0;
        let lam: f64 = 3.0;
        let eta = (lam / beta).sqrt();
        assert!((Mechanism::quadratic(beta).theta_lambda(lam).unwrap() + eta / 2.0).abs() < 1e-12);
        assert_eq!(stable15().theta_lambda(1.0).unwrap(), 0.0);
        assert!((Mechanism::quadratic(1.0).theta_lambda(4.0).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_derivative_matches_direct() {
        let m = Mechanism::new(0.3, 1.0, Some(StablePart { c: 0.7, gamma: 1.4 }), vec![Atom { r: 2.0, m: 0.5 }]).unwrap();
        for k in 2..10 {
            let d = m.derivative(0.8, k);
            assert!((m.ln_abs_derivative(0.8, k) - d.abs().ln()).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn jump_series_matches_derivatives() {
        let m = Mechanism::new(0.0, 1.0, Some(StablePart { c: 0.7, gamma: 1.4 }), vec![Atom { r: 2.0, m: 0.5 }]).unwrap();
        let (u, eta) = (0.3, 1.1);
        let mut fact = 2.0;
        for (i, t) in m.jump_series(u, eta).take(12).enumerate() {
            let n = i + 2;
            if n > 2 {
                fact *= n as f64;
            }
            let mut direct = m.derivative(u, n).abs() * eta.powi(n as i32) / fact;
            if n == 2 {
                direct -= m.beta() * eta * eta;
            }
            assert!((t - direct).abs() <= 1e-13 * direct.abs().max(1e-300), "n={n}: {t} vs {direct}");
        }
    }
}
