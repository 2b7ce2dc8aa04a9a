//! Scalar root finding, fixed points and quadrature.

use crate::error::{Error, Result};

pub const MAX_ROOT_ITERATIONS: usize = 500;

/// Root of an increasing function on a bracket `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
///
/// Newton steps are taken from the current best point and rejected in favour of
/// bisection whenever they leave the bracket or fail to halve it.
pub fn solve_increasing<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, tol: f64, what: &'static str) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let flo = f(lo);
    if flo >= -tol && flo <= tol {
        return Ok(lo);
    }
    let fhi = f(hi);
    if fhi.abs() <= tol {
        return Ok(hi);
    }
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Domain(format!("{what}: root not bracketed by [{lo}, {hi}]")));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ROOT_ITERATIONS {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::Domain(format!("{what}: non-finite value at {x}")));
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        let width = hi - lo;
        let d = df(x);
        let newton = x - fx / d;
        x = if d > 0.0 && newton > lo && newton < hi && (newton - x).abs() < 0.5 * width {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Convergence { what, iterations: MAX_ROOT_ITERATIONS })
}

/// Result of a fixed-point solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Minimal solution in `[0, 1]` of `x = map(x)` for an increasing convex `map`
/// with `map(0) >= 0`.
///
/// Newton iteration on `map(x) - x` started at 0 increases monotonically towards
/// the minimal root; bisection on the same function takes over if it stalls.
pub fn minimal_fixed_point<F, D>(map: F, dmap: D, tol: f64, cap: usize, what: &'static str) -> Result<FixedPoint>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let h = |x: f64| map(x) - x;
    let mut x = 0.0_f64;
    let mut hx = h(x);
    let mut iterations = 0;
    while hx > tol && iterations < cap {
        iterations += 1;
        let slope = dmap(x) - 1.0;
        if !(slope < 0.0) {
            break;
        }
        let next = (x - hx / slope).min(1.0);
        if next <= x {
            break;
        }
        x = next;
        hx = h(x);
    }
    if hx.abs() <= tol {
        return Ok(FixedPoint { value: x, residual: hx.abs(), iterations });
    }
    // Bisection fallback on [x, 1] where h changes sign, or the endpoint 1.
    let h1 = h(1.0);
    if h1 > 0.0 {
        if h1 <= tol {
            return Ok(FixedPoint { value: 1.0, residual: h1, iterations });
        }
        return Err(Error::Convergence { what, iterations });
    }
    let (mut lo, mut hi) = (x, 1.0);
    while iterations < cap {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let hm = h(mid);
        if hm.abs() <= tol || hi - lo <= f64::EPSILON {
            return Ok(FixedPoint { value: mid, residual: hm.abs(), iterations });
        }
        if hm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence { what, iterations })
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_cubic() {
        let r = solve_increasing(|x| x * x * x - 2.0, |x| 3.0 * x * x, 0.0, 2.0, 1e-14, "cubic").unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn unbracketed_root_is_rejected() {
        assert!(solve_increasing(|x| x + 1.0, |_| 1.0, 0.0, 1.0, 1e-12, "shifted").is_err());
    }

    #[test]
    fn fixed_point_of_critical_binary_pgf_is_one() {
        let fp = minimal_fixed_point(|r| 0.5 + 0.5 * r * r, |r| r, 1e-12, 100_000, "pgf").unwrap();
        assert!(fp.residual < 1e-12);
        assert!((1.0 - fp.value) < 2e-6);
    }

    #[test]
    fn fixed_point_of_supercritical_pgf() {
        // 0.25 + 0.75 r^2 has roots 1/3 and 1.
        let fp = minimal_fixed_point(|r| 0.25 + 0.75 * r * r, |r| 1.5 * r, 1e-14, 1000, "pgf").unwrap();
        assert!((fp.value - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = integrate(|x| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
    }
}
