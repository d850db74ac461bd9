//! Finite-maturity bond pricing, leverage calibration and credit-spread curves.
//!
//! For a bond maturing at `t` the four expectations below are recovered by
//! Stehfest inversion in the maturity variable:
//!
//! * `A(t) = E[exp(-r T) 1{T <= t}]`, transform `J^(q + r)(x; 0) / q`
//! * `B(t) = E[exp(-r T) exp(X_T) 1{T <= t}]`, transform `J^(q + r)(x; 1) / q`
//! * `G(t) = E[int_0^(t ^ T) exp(-r s) ds]`, transform `(1 - J^(q + r)(x; 0)) / (q (q + r))`
//! * `E(t) = exp(-r t) P(T > t)`, transform `(1 - J^(q + r)(x; 0)) / (q + r)`

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fluctuation::FluctuationContext;
use crate::inversion::GaverStehfest;
use crate::solve::bisect;
use crate::valuation::{debt_value, firm_value, optimal_barrier, MarketParams, TaxCutoff};

/// Maturity-`t` expectations feeding the unit bond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaturityTerms {
    pub t: f64,
    pub default_discount: f64,
    pub recovery_discount: f64,
    pub annuity: f64,
    pub survival_discount: f64,
}

/// `A, B, G, E` at maturity `t`, starting from `V` with barrier `V_B`.
pub fn maturity_terms(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    t: f64,
) -> Result<MaturityTerms> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("maturity {t} must be positive")));
    }
    let r = mkt.r;
    if v_b == 0.0 {
        let e = (-r * t).exp();
        return Ok(MaturityTerms { t, default_discount: 0.0, recovery_discount: 0.0, annuity: -(-r * t).exp_m1() / r, survival_discount: e });
    }
    if !(v > 0.0 && v_b > 0.0) {
        return Err(Error::Domain(format!("need V > 0 and V_B >= 0, got V = {v}, V_B = {v_b}")));
    }
    let x = (v / v_b).ln();
    let lam = mkt.lambda_obs;
    let j0 = |q: f64| ctx.j(q + r, lam, x, 0.0);
    let a = gs.invert(|q| Ok(j0(q)? / q), t)?;
    let b = gs.invert(|q| Ok(ctx.j(q + r, lam, x, 1.0)? / q), t)?;
    let g = gs.invert(|q| Ok((1.0 - j0(q)?) / (q * (q + r))), t)?;
    let e = gs.invert(|q| Ok((1.0 - j0(q)?) / (q + r)), t)?;
    Ok(MaturityTerms { t, default_discount: a, recovery_discount: b, annuity: g, survival_discount: e })
}

fn recovery_per_face(mkt: &MarketParams, v_b: f64, terms: &MaturityTerms) -> f64 {
    (1.0 - mkt.alpha) * v_b * terms.recovery_discount / mkt.face_value_p
}

/// Value of a unit-face bond with coupon `rho` maturing at `t`.
pub fn unit_debt(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    t: f64,
    rho: f64,
) -> Result<f64> {
    let terms = maturity_terms(ctx, mkt, gs, v, v_b, t)?;
    Ok(rho * terms.annuity + terms.survival_discount + recovery_per_face(mkt, v_b, &terms))
}

fn spread_from_terms(mkt: &MarketParams, v_b: f64, terms: &MaturityTerms) -> Result<f64> {
    if mkt.r * terms.annuity < 1e-14 {
        return Err(Error::Precision {
            reason: format!("E[1 - exp(-r (t ^ T))] = {:e} at t = {}", mkt.r * terms.annuity, terms.t),
            min_t: 1e-13 / mkt.r,
        });
    }
    Ok((terms.default_discount - recovery_per_face(mkt, v_b, terms)) / terms.annuity)
}

/// Credit spread `CS(t)`: the par coupon of a maturity-`t` bond in excess of `r`.
pub fn credit_spread(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    t: f64,
) -> Result<f64> {
    let terms = maturity_terms(ctx, mkt, gs, v, v_b, t)?;
    spread_from_terms(mkt, v_b, &terms)
}

/// Calibrated triple for a target leverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub p_hat: f64,
    pub rho_hat: f64,
    pub v_b_hat: f64,
}

impl Calibration {
    /// Template with the calibrated face value and coupon filled in.
    pub fn market(&self, template: &MarketParams) -> MarketParams {
        MarketParams { face_value_p: self.p_hat, rho: self.rho_hat, ..template.clone() }
    }
}

fn face_value_for_leverage(ctx: &FluctuationContext, template: &MarketParams, v: f64, leverage: f64, rho: f64) -> Result<(f64, f64)> {
    let market = |p: f64| MarketParams { face_value_p: p, rho, ..template.clone() };
    let excess = |p: f64| -> Result<f64> {
        let mkt = market(p);
        let v_b = optimal_barrier(ctx, &mkt)?;
        Ok(p / firm_value(ctx, &mkt, v, v_b)? - leverage)
    };
    let lo = 1e-8 * v;
    if excess(lo)? >= 0.0 {
        return Err(Error::Calibration(format!("leverage {leverage} is not reachable from below at rho = {rho}")));
    }
    let mut hi = v;
    let mut grow = 0;
    while excess(hi)? <= 0.0 {
        hi *= 1.5;
        grow += 1;
        if grow > 40 {
            return Err(Error::Calibration(format!("no face value reaches leverage {leverage} at rho = {rho}")));
        }
    }
    let p = bisect(excess, lo, hi, 1e-13 * v, "face value for leverage")?;
    Ok((p, optimal_barrier(ctx, &market(p))?))
}

/// Solves `P / firm(V) = L` (inner) and `debt(V) = P` (outer) for `(P, rho)`.
pub fn calibrate_leverage(ctx: &FluctuationContext, template: &MarketParams, v: f64, leverage: f64) -> Result<Calibration> {
    if !(leverage > 0.0 && leverage < 1.0) {
        return Err(invalid("leverage", format!("{leverage} must lie in (0, 1)")));
    }
    if !(v > 0.0) {
        return Err(invalid("V", format!("{v} must be positive")));
    }
    if template.v_tax != TaxCutoff::CouponOverPayout {
        log::info!("calibrating with a fixed tax cutoff instead of V_T = P rho / delta");
    }
    let par_gap = |rho: f64| -> Result<f64> {
        let (p, v_b) = face_value_for_leverage(ctx, template, v, leverage, rho)?;
        let mkt = MarketParams { face_value_p: p, rho, ..template.clone() };
        Ok(debt_value(ctx, &mkt, v, v_b)? - p)
    };
    let (mut lo, mut hi) = (0.5 * template.r, 2.0 * template.r);
    let mut tries = 0;
    while par_gap(lo)? >= 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 30 {
            return Err(Error::Calibration("debt stays above par for all small coupons".into()));
        }
    }
    while par_gap(hi)? <= 0.0 {
        hi *= 1.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::Calibration("debt stays below par for all coupons tried".into()));
        }
    }
    let rho = bisect(par_gap, lo, hi, 1e-14, "coupon for par debt")?;
    let (p, v_b) = face_value_for_leverage(ctx, template, v, leverage, rho)?;
    Ok(Calibration { p_hat: p, rho_hat: rho, v_b_hat: v_b })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadPoint {
    pub t: f64,
    /// `rho*(t) - r`.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadCurve {
    pub leverage_l: f64,
    pub calibrated: Calibration,
    pub points: Vec<SpreadPoint>,
}

/// Par spreads at fixed `(P, rho, V_B)`. The unit bond is affine in the
/// coupon, so `rho*(t)` solving `d = 1` follows without a root search. It
/// agrees with `credit_spread` up to the Stehfest error in `A + E + r G = 1`.
pub fn spreads_at(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    maturities: &[f64],
) -> Result<Vec<SpreadPoint>> {
    if maturities.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("maturities", "must be strictly increasing"));
    }
    maturities
        .par_iter()
        .map(|&t| {
            let terms = maturity_terms(ctx, mkt, gs, v, v_b, t)?;
            spread_from_terms(mkt, v_b, &terms)?;
            let recovery = recovery_per_face(mkt, v_b, &terms);
            let rho_star = (1.0 - terms.survival_discount - recovery) / terms.annuity;
            let par = rho_star * terms.annuity + terms.survival_discount + recovery;
            if (par - 1.0).abs() > 1e-8 {
                return Err(Error::Consistency(format!("par residual {:e} at t = {t}", par - 1.0)));
            }
            let spread = rho_star - mkt.r;
            Ok(SpreadPoint { t, spread })
        })
        .collect()
}

/// Calibrates to leverage `L` and computes the par-spread curve.
pub fn spread_curve(
    ctx: &FluctuationContext,
    template: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    leverage: f64,
    maturities: &[f64],
) -> Result<SpreadCurve> {
    let calibrated = calibrate_leverage(ctx, template, v, leverage)?;
    let mkt = calibrated.market(template);
    let points = spreads_at(ctx, &mkt, gs, v, calibrated.v_b_hat, maturities)?;
    Ok(SpreadCurve { leverage_l: leverage, calibrated, points })
}
