//! Scalar root bracketing helpers.

use crate::error::{Error, Result};

/// Bisection on a sign change of `f` over `[lo, hi]` down to `xtol` absolute.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::NoBracket { lo, hi });
    }
    // 200 halvings exhaust any f64 interval.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton iterations started from a bisection root, kept only while they stay
/// inside `[lo, hi]` and reduce the residual.
pub fn newton_polish<F, D>(f: F, df: D, x0: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = x0;
    let mut fx = f(x);
    for _ in 0..8 {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - fx / d;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let f_next = f(next);
        if f_next.abs() >= fx.abs() {
            break;
        }
        x = next;
        fx = f_next;
        if fx == 0.0 {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        let p = newton_polish(|x| x * x - 2.0, |x| 2.0 * x, r, 0.0, 2.0);
        assert!((p - 2f64.sqrt()).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn no_bracket() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::NoBracket { .. })
        ));
    }
}
