//! Bracketed scalar root finding and unimodal minimization.

use crate::error::{Error, Result};
use alloc::format;

/// Finds a root of `f` in `[lo, hi]` by bisection. `f(lo)` and `f(hi)` must
/// have opposite signs. Stops when `|f| <= ftol` or the bracket collapses to
/// adjacent floats.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, ftol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::RootNotFound(format!(
            "no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})"
        )));
    }
    let mut best = (f64::INFINITY, lo);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm.abs() < best.0 {
            best = (fm.abs(), mid);
        }
        if fm.abs() <= ftol && hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) {
            return Ok(mid);
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if best.0 <= ftol {
        Ok(best.1)
    } else {
        Err(Error::RootNotFound(format!(
            "bisection stalled with |f| = {} > {ftol}",
            best.0
        )))
    }
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
/// Returns the final bracket `(a, b)` with `b - a <= rel_tol * max(|a|, |b|)`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..500 {
        if b - a <= rel_tol * a.abs().max(b.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert_relative_eq!(r, core::f64::consts::SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn bisect_rejects_no_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (a, b) = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!(b - a < 1e-9);
        assert_relative_eq!(0.5 * (a + b), 0.3, epsilon = 1e-7);
    }
}
