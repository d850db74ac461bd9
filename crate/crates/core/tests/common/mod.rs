//! Shared quadrature oracles.

#![allow(dead_code)]

use std::num::NonZeroUsize;

use gauss_quad::{GaussLaguerre, GaussLegendre};

/// Composite Gauss-Legendre on `[a, b]` with `panels` equal pieces.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(20).unwrap());
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            rule.integrate(lo, lo + h, &mut f)
        })
        .sum()
}

/// Composite rule over consecutive breakpoints (kinks go in `points`).
pub fn integrate_pieces<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], panels: usize) -> f64 {
    points.windows(2).map(|w| integrate(&mut f, w[0], w[1], panels)).sum()
}

/// `int_0^inf exp(-u) f(u) du`.
pub fn laguerre<F: FnMut(f64) -> f64>(f: F, degree: usize) -> f64 {
    GaussLaguerre::new(NonZeroUsize::new(degree).unwrap(), Default::default()).integrate(f)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}
