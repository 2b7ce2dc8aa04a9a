//! Offspring laws against closed forms, and mechanism landmarks.

use super::super::{timed, Check, Ctx};
use crate::gw::offspring_law;
use crate::mechanism::{Mechanism, StablePart};

/// Tail tolerance for the stable law, whose tail decays like `n^(-1-gamma)`.
const STABLE_TAIL: f64 = 1e-6;

pub(super) fn run(ctx: &Ctx) -> Vec<Check> {
    let tol = ctx.cfg.tolerances.root_find;
    let mut checks = timed(1, "quadratic law", || {
        let law = offspring_law(&Mechanism::quadratic(1.0), 1.0, ctx.tail())?;
        Ok(vec![
            Check::exact(1, "quadratic p(0)", law.p(0), 0.5, 1e-12),
            Check::exact(1, "quadratic p(1)", law.p(1), 0.0, 1e-12),
            Check::exact(1, "quadratic p(2)", law.p(2), 0.5, 1e-12),
        ])
    });
    checks.extend(timed(1, "stable law", || {
        let mech = Mechanism::new(0.0, 0.0, Some(StablePart { c: 1.0, gamma: 1.5 }), vec![])?;
        let law = offspring_law(&mech, 1.0, STABLE_TAIL)?;
        Ok(vec![
            Check::exact(1, "stable 3/2 p(0)", law.p(0), 2.0 / 3.0, 1e-10),
            Check::exact(1, "stable 3/2 p(2)", law.p(2), 0.25, 1e-10),
            Check::exact(1, "stable 3/2 p(3)", law.p(3), 1.0 / 24.0, 1e-10),
        ])
    }));
    checks.extend(timed(1, "landmarks", || {
        let mech = Mechanism::new(-1.0, 1.0, None, vec![])?;
        let marks = mech.landmarks();
        Ok(vec![
            Check::exact(1, "u^2-u theta*", marks.theta_star.unwrap_or(f64::NAN), 0.5, tol),
            Check::exact(1, "u^2-u q0", marks.q0, 1.0, tol),
            Check::exact(1, "u^2-u conjugate(0.2)", mech.conjugate(0.2)?, 0.8, tol),
            Check::exact(1, "u^2-u invert(2)", mech.invert(2.0)?, 2.0, tol),
            Check::exact(1, "u^2 theta_lambda(1)", Mechanism::quadratic(1.0).theta_lambda(1.0)?, -0.5, tol),
        ])
    }));
    if let Some(mech) = &ctx.cfg.mechanism {
        let lam = ctx.cfg.lambda.unwrap_or(1.0);
        checks.extend(timed(1, "configured law", || {
            let law = offspring_law(mech, lam, ctx.tail())?;
            let mass: f64 = law.probs().iter().sum::<f64>() + law.tail_mass();
            Ok(vec![Check::exact(1, "configured law total mass", mass, 1.0, 1e-12)])
        }));
    }
    checks
}
