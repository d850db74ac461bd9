//! Scalar root finding and maximisation helpers shared by the solvers.

use crate::error::{Error, Result};

/// Bisection on a bracket `[lo, hi]` with `f(lo)` and `f(hi)` of opposite sign.
///
/// Stops when the bracket is narrower than `xtol` or after 200 halvings.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64, context: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Bracket {
            context,
            reason: format!("no sign change on [{lo:.6e}, {hi:.6e}]: f = ({flo:.6e}, {fhi:.6e})"),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
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
    Ok(0.5 * (lo + hi))
}

/// Golden-section maximisation of a unimodal function on `[a, b]`.
pub fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > xtol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let x = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14, "test").unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_reports_missing_sign_change() {
        let err = bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, "test").unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }

    #[test]
    fn golden_section_locates_parabola_peak() {
        let (x, fx) = golden_max(|x| Ok(-(x - 0.3) * (x - 0.3) + 1.0), 0.0, 1.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-14);
    }
}
