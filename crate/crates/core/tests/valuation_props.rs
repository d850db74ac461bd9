use capstruct::valuation::{
    capital_structure, debt_value, equity_at_barrier, equity_at_barrier_limit, equity_value, firm_value,
    newref, optimal_barrier,
};
use capstruct::{FluctuationContext, HejdParams, MarketParams, TaxCutoff};
use proptest::prelude::*;

fn market() -> impl Strategy<Value = (bool, MarketParams)> {
    (
        any::<bool>(),
        0.1..0.5f64,
        0.1..0.9f64,
        0.04..0.16f64,
        0.05..0.5f64,
        20.0..90.0f64,
        -1.0..6.0f64,
    )
        .prop_map(|(b, kappa, alpha, rho, m, p, log_lam)| {
            let mkt = MarketParams {
                kappa,
                alpha,
                rho,
                m_debt: m,
                face_value_p: p,
                lambda_obs: log_lam.exp(),
                ..MarketParams::default()
            };
            (b, mkt)
        })
}

fn ctx_for(case_b: bool) -> FluctuationContext {
    FluctuationContext::new(if case_b { HejdParams::case_b() } else { HejdParams::case_a() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn barrier_is_root_and_feasible((b, mkt) in market()) {
        let ctx = ctx_for(b);
        let vb = optimal_barrier(&ctx, &mkt).unwrap();
        prop_assert!(vb > 0.0);
        let res = equity_at_barrier(&ctx, &mkt, vb).unwrap();
        prop_assert!(res.abs() <= 1e-8 * mkt.face_value_p.max(1.0), "residual {res}");
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=50 {
            let v = vb * (1.0 + 0.08 * i as f64);
            let e = equity_value(&ctx, &mkt, v, vb).unwrap();
            prop_assert!(e >= -1e-8);
            prop_assert!(e >= prev - 1e-10 * e.abs().max(1.0));
            prev = e;
        }
    }

    #[test]
    fn lower_barrier_violates_and_higher_is_dominated((b, mkt) in market(), shrink in 0.3..0.95f64, grow in 1.05..2.0f64) {
        let ctx = ctx_for(b);
        let vb = optimal_barrier(&ctx, &mkt).unwrap();
        let low = shrink * vb;
        prop_assert!(equity_value(&ctx, &mkt, low * (1.0 + 1e-6), low).unwrap() < 0.0);
        let high = grow * vb;
        for k in 0..10 {
            let v = high * (1.0 + 0.3 * k as f64);
            let star = equity_value(&ctx, &mkt, v, vb).unwrap();
            prop_assert!(equity_value(&ctx, &mkt, v, high).unwrap() <= star + 1e-10 * star.abs().max(1.0));
        }
    }

    #[test]
    fn equity_decreases_in_barrier_above_optimum((b, mkt) in market(), grow in 1.02..2.0f64, up in 1.01..3.0f64) {
        let ctx = ctx_for(b);
        let vb = grow * optimal_barrier(&ctx, &mkt).unwrap();
        let v = up * vb;
        let h = 1e-5 * vb;
        let cd = |h: f64| (equity_value(&ctx, &mkt, v, vb + h).unwrap() - equity_value(&ctx, &mkt, v, vb - h).unwrap()) / (2.0 * h);
        let d = (4.0 * cd(0.5 * h) - cd(h)) / 3.0;
        prop_assert!(d < 0.0, "dE/dV_B = {d}");
    }

    #[test]
    fn pieces_are_consistent((b, mkt) in market(), v in 10.0..200.0f64, vb in 5.0..80.0f64) {
        let ctx = ctx_for(b);
        let cs = capital_structure(&ctx, &mkt, v, vb).unwrap();
        if v >= vb {
            prop_assert!((cs.equity - (cs.firm - cs.debt)).abs() <= 1e-9 * cs.firm.abs());
            prop_assert!(cs.debt > 0.0 && cs.firm > 0.0);
        } else {
            prop_assert_eq!(cs.equity, 0.0);
            prop_assert!((cs.debt - (1.0 - mkt.alpha) * v).abs() < 1e-12);
        }
        let at = equity_at_barrier(&ctx, &mkt, vb).unwrap();
        let direct = equity_value(&ctx, &mkt, vb, vb).unwrap();
        prop_assert!((at - direct).abs() <= 1e-10 * direct.abs().max(mkt.face_value_p));
    }
}

#[test]
fn zero_barrier_closed_forms() {
    let ctx = FluctuationContext::new(HejdParams::case_b());
    let mkt = MarketParams { v_tax: TaxCutoff::Level(0.0), ..MarketParams::default() };
    let (p, rho, k, r, m) = (mkt.face_value_p, mkt.rho, mkt.kappa, mkt.r, mkt.m_debt);
    let coupon = (p * rho + p * m) / (r + m);
    assert!((debt_value(&ctx, &mkt, 100.0, 0.0).unwrap() - coupon).abs() < 1e-12);
    assert!((firm_value(&ctx, &mkt, 100.0, 0.0).unwrap() - (100.0 + p * k * rho / r)).abs() < 1e-12);
    let e = equity_value(&ctx, &mkt, 100.0, 0.0).unwrap();
    assert!((e - (100.0 + p * k * rho / r - coupon)).abs() < 1e-10);
}

#[test]
fn equity_at_barrier_limits_near_zero() {
    let ctx = FluctuationContext::new(HejdParams::case_a());
    let mkt = MarketParams::default();
    let lim = equity_at_barrier_limit(&ctx, &mkt).unwrap();
    let near = equity_at_barrier(&ctx, &mkt, 1e-9).unwrap();
    assert!((near - lim).abs() < 1e-6, "{near} vs {lim}");

    let zero_cut = MarketParams { v_tax: TaxCutoff::Level(0.0), ..mkt };
    let lim0 = equity_at_barrier_limit(&ctx, &zero_cut).unwrap();
    assert!((lim0 - newref(&ctx, &zero_cut).unwrap()).abs() < 1e-14);
    let near0 = equity_at_barrier(&ctx, &zero_cut, 1e-9).unwrap();
    assert!((near0 - lim0).abs() < 1e-6, "{near0} vs {lim0}");
}

#[test]
fn large_tax_benefit_with_zero_cutoff_gives_zero_barrier() {
    // short-lived debt with a near-full tax shield
    let ctx = FluctuationContext::new(HejdParams::case_a());
    let mkt = MarketParams {
        kappa: 0.9999,
        m_debt: 10.0,
        rho: 0.2,
        lambda_obs: 0.1,
        v_tax: TaxCutoff::Level(0.0),
        ..MarketParams::default()
    };
    assert!(newref(&ctx, &mkt).unwrap() >= 0.0);
    assert_eq!(optimal_barrier(&ctx, &mkt).unwrap(), 0.0);
}

#[test]
fn reference_barriers() {
    let a = FluctuationContext::new(HejdParams::case_a());
    let mkt = MarketParams { face_value_p: 53.1036, rho: 0.08892, ..MarketParams::default() };
    assert!((optimal_barrier(&a, &mkt).unwrap() - 51.9905).abs() < 1e-3 * 51.9905);
    let b = FluctuationContext::new(HejdParams::case_b());
    let mkt = MarketParams { face_value_p: 66.9418, rho: 0.14677, ..MarketParams::default() };
    assert!((optimal_barrier(&b, &mkt).unwrap() - 74.3924).abs() < 1e-3 * 74.3924);
    let mkt = MarketParams { face_value_p: 52.9297, rho: 0.08996, lambda_obs: f64::INFINITY, ..MarketParams::default() };
    assert!((optimal_barrier(&a, &mkt).unwrap() - 49.0871).abs() < 1e-3 * 49.0871);
}
