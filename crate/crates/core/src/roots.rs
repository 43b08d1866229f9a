//! Bracketed root finding for strictly monotone scalar relations.
//!
//! Every implicit relation in this crate (branch inverses, the implicit
//! intermittent map, the inverse of `x -> -x log x`) is strictly monotone on
//! a known bracket, so a bracket that starts valid stays valid.

use crate::error::{Error, Result};

const MAX_ITER: usize = 400;

/// Bisection down to bracket width `tol`, followed by two Newton polish
/// steps that are only accepted when they stay inside the final bracket.
pub fn bisect_newton<F, D>(f: F, df: D, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NoBracket { lo, hi, f_lo: fa, f_hi: fb });
    }
    let a_negative = fa < 0.0;
    let mut iterations = 0;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == a_negative {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
        if iterations > 4 * MAX_ITER {
            return Err(Error::NoConvergence { iterations });
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..2 {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - f(x) / d;
        if next >= a && next <= b && next.is_finite() {
            x = next;
        }
    }
    Ok(x)
}

/// Safeguarded Newton iteration on a bracket: Newton steps when they land
/// inside the bracket and shrink it fast enough, bisection otherwise.
/// Terminates once the step size falls below `tol` (relative to `|x|` when
/// `|x| > 1`).
pub fn newton_bracketed<F, D>(f: F, df: D, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NoBracket { lo, hi, f_lo: fa, f_hi: fb });
    }
    // orient so that f(a) < 0 < f(b)
    if fa > 0.0 {
        std::mem::swap(&mut a, &mut b);
    }
    let mut x = 0.5 * (a + b);
    let mut step_old = (b - a).abs();
    let mut step = step_old;
    let mut fx = f(x);
    let mut dx = df(x);
    for _ in 0..MAX_ITER {
        let newton_ok = dx.is_finite()
            && dx != 0.0
            && ((x - b) * dx - fx) * ((x - a) * dx - fx) < 0.0
            && (2.0 * fx).abs() <= (step_old * dx).abs();
        step_old = step;
        if newton_ok {
            step = fx / dx;
            x -= step;
        } else {
            step = 0.5 * (b - a);
            x = a + step;
        }
        if step.abs() <= tol * x.abs().max(1.0) {
            return Ok(x);
        }
        fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        dx = df(x);
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITER })
}
