//! Closed-form fluctuation identities against direct quadrature.

mod common;

use capstruct::{FluctuationContext, HejdParams};
use common::{integrate, integrate_pieces, rel_err};

const Q: f64 = 0.075;
const LAM: f64 = 4.0;

fn ctx_b() -> FluctuationContext {
    FluctuationContext::new(HejdParams::case_b())
}

#[test]
fn i_kernel_matches_convolution_definition() {
    for ctx in [FluctuationContext::new(HejdParams::case_a()), ctx_b()] {
        let w = ctx.scale(Q).unwrap();
        let wl = ctx.scale(Q + LAM).unwrap();
        let pl = ctx.phi(Q + LAM).unwrap();
        for (x, y) in [(0.4, 0.3), (1.2, 0.05), (0.1, 0.9)] {
            let conv = integrate(|z| w.w(x - z) * wl.w(z + y), 0.0, x, 40);
            let want = wl.w(x + y) - LAM * conv - w.z_phi_lambda(LAM, pl, x) * wl.w(y);
            let got = ctx.i_kernel(Q, LAM, x, y).unwrap();
            let scale = wl.w(x + y);
            assert!((got - want).abs() <= 1e-9 * scale, "x={x} y={y}: {got} vs {want}");
        }
    }
}

#[test]
fn i_kernel_reduces_below_zero() {
    let ctx = FluctuationContext::new(HejdParams::case_a());
    let got = ctx.i_kernel(Q, LAM, 0.5, -0.2).unwrap();
    assert!(rel_err(got, ctx.scale(Q).unwrap().w(0.3)) < 1e-14);
}

#[test]
fn h_integral_matches_quadrature() {
    let ctx = ctx_b();
    let phi = ctx.phi(Q).unwrap();
    for zt in [0.2, 0.8] {
        let f = |y: f64| ctx.h(Q + LAM, y, phi).unwrap();
        // H(y) = exp(phi y) below zero, so the left tail is analytic
        let want = 1.0 / phi + integrate(f, 0.0, zt, 40);
        let got = ctx.h_integral(Q, LAM, zt).unwrap();
        assert!(rel_err(got, want) < 1e-8, "zT={zt}: {got} vs {want}");
    }
    assert!(rel_err(ctx.h_integral(Q, LAM, -1.0).unwrap(), (-phi).exp() / phi) < 1e-14);
}

/// Upper end of integration for the resolvent in `y`: tail `exp(-Phi(q) y)`.
fn y_max(ctx: &FluctuationContext) -> f64 {
    40.0 / ctx.phi(Q).unwrap()
}

#[test]
fn resolvent_integrates_to_killing_transform() {
    let ctx = ctx_b();
    for x in [0.0, 0.3, 1.5] {
        let f = |y: f64| ctx.resolvent_density(Q, LAM, x, y).unwrap();
        let pts = [-40.0, -10.0, -2.0, 0.0, x, x + 2.0, x + 10.0, y_max(&ctx)];
        let mut pts = pts.to_vec();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let total = integrate_pieces(f, &pts, 60);
        let want = (1.0 - ctx.j(Q, LAM, x, 0.0).unwrap()) / Q;
        assert!(rel_err(total, want) < 1e-7, "x={x}: {total} vs {want}");
    }
}

#[test]
fn lambda_is_the_resolvent_tail_integral() {
    let ctx = ctx_b();
    let (r, z) = (0.075, 50f64.ln());
    for (y, log_vt) in [(100f64.ln(), 60f64.ln()), (100f64.ln(), 40f64.ln()), (55f64.ln(), 70f64.ln())] {
        let x = y - z;
        let lo = log_vt - z;
        let f = |u: f64| ctx.resolvent_density(r, LAM, x, u).unwrap();
        let mut pts = vec![lo, 0.0_f64.max(lo), x.max(lo), x.max(lo) + 2.0, x.max(lo) + 10.0, y_max(&ctx)];
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let want = integrate_pieces(f, &pts, 60);
        let got = ctx.lambda(r, LAM, y, z, log_vt).unwrap();
        assert!(rel_err(got, want) < 1e-7, "y={y} vt={log_vt}: {got} vs {want}");
        assert!(got > 0.0 && got < 1.0 / r);
    }
}

#[test]
fn resolvent_is_nonnegative_on_grid() {
    for ctx in [FluctuationContext::new(HejdParams::case_a()), ctx_b()] {
        let mut worst = f64::INFINITY;
        for i in 0..100 {
            let x = -2.0 + 6.0 * i as f64 / 99.0;
            for j in 0..100 {
                let y = -4.0 + 10.0 * j as f64 / 99.0;
                worst = worst.min(ctx.resolvent_density(Q, LAM, x, y).unwrap());
            }
        }
        assert!(worst >= -1e-10, "min R = {worst}");
    }
}

#[test]
fn scale_function_laplace_identity_by_quadrature() {
    let ctx = ctx_b();
    let w = ctx.scale(Q).unwrap();
    let m = ctx.model();
    for theta in [2.5, 4.0, 8.0] {
        let upper = 60.0 / (theta - w.phi());
        let got = integrate(|x| (-theta * x).exp() * w.w(x), 0.0, upper, 200);
        let want = 1.0 / (m.psi(theta).unwrap() - Q);
        assert!(rel_err(got, want) < 1e-9, "theta={theta}: {got} vs {want}");
    }
}

#[test]
fn classical_resolvent_integrates_to_first_passage_transform() {
    let ctx = ctx_b();
    for x in [0.2, 1.0] {
        let f = |y: f64| ctx.classical_resolvent(Q, x, y).unwrap();
        let total = integrate_pieces(f, &[0.0, x, x + 10.0, y_max(&ctx)], 80);
        let want = (1.0 - ctx.h(Q, x, 0.0).unwrap()) / Q;
        assert!(rel_err(total, want) < 1e-9, "x={x}: {total} vs {want}");
    }
}

#[test]
fn j_approaches_h_as_observation_rate_grows() {
    let ctx = ctx_b();
    let gaps: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&lam| {
            (0..20)
                .map(|i| {
                    let y = 0.1 * i as f64;
                    (ctx.j(Q, lam, y, 1.0).unwrap() - ctx.h(Q, y, 1.0).unwrap()).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn lambda_at_barrier_limits() {
    let ctx = ctx_b();
    let r = 0.075;
    let vals: Vec<f64> = (0..50)
        .map(|i| {
            let z = -20.0 + 0.5 * i as f64;
            ctx.lambda(r, LAM, z, z, 0.0).unwrap()
        })
        .collect();
    assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    assert!(vals[0] < 1e-6);
    let limit = ctx.phi(r + LAM).unwrap() / ctx.phi(r).unwrap() / (LAM + r);
    let zero_cut = ctx.lambda(r, LAM, 1.0, 1.0, f64::NEG_INFINITY).unwrap();
    assert!(rel_err(zero_cut, limit) < 1e-10);
}
