mod common;

use capstruct::inversion::GaverStehfest;
use capstruct::mc_oracle::{simulate_default, SimConfig};
use capstruct::spreads::{calibrate_leverage, credit_spread, maturity_terms, spread_curve, spreads_at, unit_debt};
use capstruct::valuation::{debt_value, optimal_barrier};
use capstruct::{Error, FluctuationContext, HejdParams, MarketParams};
use common::{laguerre, rel_err};

const V: f64 = 100.0;

#[test]
fn principal_plus_coupon_without_default() {
    let ctx = FluctuationContext::new(HejdParams::case_a());
    let mkt = MarketParams::default();
    let gs = GaverStehfest::default();
    let r = mkt.r;
    for t in [0.5, 3.0, 20.0] {
        let d = unit_debt(&ctx, &mkt, &gs, V, 0.0, t, 0.09).unwrap();
        let want = 0.09 / r * -(-r * t).exp_m1() + (-r * t).exp();
        assert!((d - want).abs() < 1e-14);
        assert!((unit_debt(&ctx, &mkt, &gs, V, 0.0, t, r).unwrap() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn fubini_recovers_total_debt() {
    let gs = GaverStehfest::default();
    for (model, lam) in [(HejdParams::case_a(), 4.0), (HejdParams::case_b(), 12.0)] {
        let ctx = FluctuationContext::new(model);
        let mkt = MarketParams { lambda_obs: lam, ..MarketParams::default() };
        let vb = optimal_barrier(&ctx, &mkt).unwrap();
        let m = mkt.m_debt;
        // p int_0^inf exp(-m t) d(t) dt with p = m P and u = m t
        let total = mkt.face_value_p * laguerre(|u| unit_debt(&ctx, &mkt, &gs, V, vb, u / m, mkt.rho).unwrap(), 40);
        let want = debt_value(&ctx, &mkt, V, vb).unwrap();
        assert!(rel_err(total, want) < 1e-4, "{total} vs {want}");
    }
}

#[test]
fn unit_debt_matches_simulation() {
    let model = HejdParams::case_b();
    let ctx = FluctuationContext::new(model.clone());
    let mkt = MarketParams { face_value_p: 66.9418, rho: 0.14677, ..MarketParams::default() };
    let (vb, t) = (74.3924, 5.0);
    let gs = GaverStehfest::default();
    let exact = unit_debt(&ctx, &mkt, &gs, V, vb, t, mkt.rho).unwrap();

    let cfg = SimConfig { horizon: t + 1.0, ..SimConfig::skeleton(41, 200_000) };
    let set = simulate_default(&cfg, &model, mkt.lambda_obs, V, vb).unwrap();
    let r = mkt.r;
    let pay: Vec<f64> = set
        .samples
        .iter()
        .map(|s| {
            let defaulted = !s.censored && s.time <= t;
            let stop = if defaulted { s.time } else { t };
            let mut x = mkt.rho * -(-r * stop).exp_m1() / r;
            if defaulted {
                x += (1.0 - mkt.alpha) * vb * s.log_ratio.exp() * (-r * s.time).exp() / mkt.face_value_p;
            } else {
                x += (-r * t).exp();
            }
            x
        })
        .collect();
    let n = pay.len() as f64;
    let mean = pay.iter().sum::<f64>() / n;
    let se = (pay.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} +- {se} vs {exact}");
}

#[test]
fn default_terms_add_up() {
    let ctx = FluctuationContext::new(HejdParams::case_b());
    let mkt = MarketParams::default();
    let gs = GaverStehfest::default();
    for t in [0.5, 2.0, 10.0] {
        let m = maturity_terms(&ctx, &mkt, &gs, V, 60.0, t).unwrap();
        let sum = m.default_discount + m.survival_discount + mkt.r * m.annuity;
        assert!((sum - 1.0).abs() < 1e-5, "t={t}: {sum}");
    }
}

#[test]
fn short_maturity_limits() {
    let gs = GaverStehfest::default();
    for model in [HejdParams::case_a(), HejdParams::case_b()] {
        let ctx = FluctuationContext::new(model);
        let mkt = MarketParams::default();
        let p = mkt.face_value_p;
        let below = credit_spread(&ctx, &mkt, &gs, 40.0, 55.0, 1e-4).unwrap();
        let limit = mkt.lambda_obs / p * (p - (1.0 - mkt.alpha) * 40.0);
        assert!(rel_err(below, limit) < 0.01, "{below} vs {limit}");
        assert!(credit_spread(&ctx, &mkt, &gs, V, 55.0, 1e-4).unwrap() < 1e-3);
    }
}

#[test]
fn tiny_maturity_is_a_precision_error() {
    let ctx = FluctuationContext::new(HejdParams::case_a());
    let err = credit_spread(&ctx, &MarketParams::default(), &GaverStehfest::default(), V, 55.0, 1e-16).unwrap_err();
    assert!(matches!(err, Error::Precision { .. }), "{err:?}");
}

#[test]
fn reference_calibrations() {
    let b = FluctuationContext::new(HejdParams::case_b());
    let c = calibrate_leverage(&b, &MarketParams { lambda_obs: 1.0, ..MarketParams::default() }, V, 0.5).unwrap();
    assert!(rel_err(c.p_hat, 53.0411) < 1e-3 && (c.rho_hat - 0.10075).abs() < 1e-3 && rel_err(c.v_b_hat, 52.6127) < 1e-3);
    let a = FluctuationContext::new(HejdParams::case_a());
    let c = calibrate_leverage(&a, &MarketParams { lambda_obs: f64::INFINITY, ..MarketParams::default() }, V, 0.75).unwrap();
    assert!(rel_err(c.p_hat, 65.0879) < 1e-3 && (c.rho_hat - 0.13318).abs() < 1e-3 && rel_err(c.v_b_hat, 71.0280) < 1e-3);
}

#[test]
fn curve_shape_and_ordering() {
    let gs = GaverStehfest::default();
    let ts = [0.1, 1.0, 5.0, 10.0, 50.0, 100.0, 200.0];
    let template = MarketParams::default();
    let a = spread_curve(&FluctuationContext::new(HejdParams::case_a()), &template, &gs, V, 0.75, &ts).unwrap();
    let b = spread_curve(&FluctuationContext::new(HejdParams::case_b()), &template, &gs, V, 0.75, &ts).unwrap();
    assert!(a.points.iter().chain(&b.points).all(|p| p.spread.is_finite()));
    assert!(a.points[1].spread < b.points[1].spread);
    for c in [&a, &b] {
        assert!((c.points[6].spread - c.points[5].spread).abs() < 1e-4);
    }
    // the periodic short end stays far above Case A's at high observation rates
    let hi = MarketParams { lambda_obs: 365.0, ..template };
    let a = spread_curve(&FluctuationContext::new(HejdParams::case_a()), &hi, &gs, V, 0.75, &[0.01]).unwrap();
    let b = spread_curve(&FluctuationContext::new(HejdParams::case_b()), &hi, &gs, V, 0.75, &[0.01]).unwrap();
    assert!(b.points[0].spread > 10.0 * a.points[0].spread.abs());
}

#[test]
fn maturities_must_increase() {
    let ctx = FluctuationContext::new(HejdParams::case_a());
    assert!(spreads_at(&ctx, &MarketParams::default(), &GaverStehfest::default(), V, 50.0, &[2.0, 1.0]).is_err());
}
