//! Debt, firm and equity values, the barrier diagnostic and the optimal
//! endogenous barrier.
//!
//! `lambda_obs = f64::INFINITY` selects continuous observation: `J` becomes
//! `H` and the tax functional uses the classical resolvent.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fluctuation::FluctuationContext;
use crate::solve::bisect;

/// How the tax cutoff `V_T` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TaxCutoff {
    Level(f64),
    /// `V_T = P rho / delta`.
    CouponOverPayout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub r: f64,
    pub delta: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub rho: f64,
    pub m_debt: f64,
    pub face_value_p: f64,
    pub lambda_obs: f64,
    pub v_tax: TaxCutoff,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            r: 0.075,
            delta: 0.07,
            kappa: 0.35,
            alpha: 0.5,
            rho: 0.08162,
            m_debt: 0.2,
            face_value_p: 50.0,
            lambda_obs: 4.0,
            v_tax: TaxCutoff::CouponOverPayout,
        }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |name, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(invalid(name, format!("{v} must be positive"))) };
        pos("r", self.r)?;
        pos("kappa", self.kappa)?;
        pos("rho", self.rho)?;
        pos("m", self.m_debt)?;
        pos("P", self.face_value_p)?;
        if !(self.delta >= 0.0 && self.delta < self.r) {
            return Err(invalid("delta", format!("need 0 <= delta < r, got {}", self.delta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("{} must lie in (0, 1)", self.alpha)));
        }
        if !(self.lambda_obs > 0.0) {
            return Err(invalid("lambda", format!("{} must be positive", self.lambda_obs)));
        }
        if let TaxCutoff::Level(v) = self.v_tax {
            if !(v >= 0.0) {
                return Err(invalid("v_tax", format!("{v} must be non-negative")));
            }
        }
        if self.kappa > 1.0 {
            log::info!("kappa = {} exceeds 1; accepted, though economically meaningful rates are at most 1", self.kappa);
        }
        Ok(())
    }

    /// Issuance rate `p = m P`.
    pub fn p_issue(&self) -> f64 {
        self.m_debt * self.face_value_p
    }

    /// Tax cutoff level `V_T`.
    pub fn tax_level(&self) -> f64 {
        match self.v_tax {
            TaxCutoff::Level(v) => v,
            TaxCutoff::CouponOverPayout => self.face_value_p * self.rho / self.delta,
        }
    }

    pub fn is_classical(&self) -> bool {
        self.lambda_obs.is_infinite()
    }

    /// Same parameters with continuous observation.
    pub fn classical(&self) -> Self {
        Self { lambda_obs: f64::INFINITY, ..self.clone() }
    }

    fn coupon_flow(&self) -> f64 {
        self.face_value_p * self.rho + self.p_issue()
    }

    fn tax_flow(&self) -> f64 {
        self.face_value_p * self.kappa * self.rho
    }
}

/// Values at one `(V, V_B)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapitalStructure {
    pub v_asset: f64,
    pub v_barrier: f64,
    pub debt: f64,
    pub firm: f64,
    pub equity: f64,
}

fn check_inputs(v: f64, v_b: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("asset value {v} must be positive")));
    }
    if !(v_b >= 0.0 && v_b.is_finite()) {
        return Err(Error::Domain(format!("barrier {v_b} must be non-negative")));
    }
    Ok(())
}

/// Total debt value.
pub fn debt_value(ctx: &FluctuationContext, mkt: &MarketParams, v: f64, v_b: f64) -> Result<f64> {
    check_inputs(v, v_b)?;
    let rm = mkt.r + mkt.m_debt;
    if v_b == 0.0 {
        return Ok(mkt.coupon_flow() / rm);
    }
    if v < v_b {
        return Ok((1.0 - mkt.alpha) * v);
    }
    let x = (v / v_b).ln();
    let lam = mkt.lambda_obs;
    Ok(mkt.coupon_flow() / rm * (1.0 - ctx.j(rm, lam, x, 0.0)?) + (1.0 - mkt.alpha) * v_b * ctx.j(rm, lam, x, 1.0)?)
}

/// Firm value: assets plus tax benefits minus bankruptcy losses.
pub fn firm_value(ctx: &FluctuationContext, mkt: &MarketParams, v: f64, v_b: f64) -> Result<f64> {
    check_inputs(v, v_b)?;
    let vt = mkt.tax_level();
    if v_b == 0.0 {
        let shield = if vt == 0.0 { 1.0 / mkt.r } else { ctx.free_occupation(mkt.r, (v / vt).ln())? };
        return Ok(v + mkt.tax_flow() * shield);
    }
    if v < v_b {
        return Ok((1.0 - mkt.alpha) * v);
    }
    let x = (v / v_b).ln();
    let log_vt = vt.ln();
    let shield = ctx.lambda(mkt.r, mkt.lambda_obs, v.ln(), v_b.ln(), log_vt)?;
    Ok(v + mkt.tax_flow() * shield - mkt.alpha * v_b * ctx.j(mkt.r, mkt.lambda_obs, x, 1.0)?)
}

pub fn capital_structure(ctx: &FluctuationContext, mkt: &MarketParams, v: f64, v_b: f64) -> Result<CapitalStructure> {
    let debt = debt_value(ctx, mkt, v, v_b)?;
    let firm = firm_value(ctx, mkt, v, v_b)?;
    let equity = if v < v_b { 0.0 } else { firm - debt };
    Ok(CapitalStructure { v_asset: v, v_barrier: v_b, debt, firm, equity })
}

/// Equity value `firm - debt`; zero below the barrier.
pub fn equity_value(ctx: &FluctuationContext, mkt: &MarketParams, v: f64, v_b: f64) -> Result<f64> {
    Ok(capital_structure(ctx, mkt, v, v_b)?.equity)
}

/// `(P rho + p)/(lambda + r + m) Phi(r + m + lambda)/Phi(r + m)`: the coupon
/// part of equity at the barrier, independent of `V_B`.
fn coupon_at_barrier(ctx: &FluctuationContext, mkt: &MarketParams) -> Result<f64> {
    let rm = mkt.r + mkt.m_debt;
    let lam = mkt.lambda_obs;
    Ok(mkt.coupon_flow() / (lam + rm) * ctx.phi(rm + lam)? / ctx.phi(rm)?)
}

/// `E(V_B; V_B)`, strictly increasing in `V_B` under periodic observation.
pub fn equity_at_barrier(ctx: &FluctuationContext, mkt: &MarketParams, v_b: f64) -> Result<f64> {
    if !(v_b > 0.0) {
        return Err(Error::Domain(format!("barrier {v_b} must be positive")));
    }
    if mkt.is_classical() {
        return equity_value(ctx, mkt, v_b, v_b);
    }
    EquityAtBarrier::new(ctx, mkt)?.eval(ctx, v_b)
}

/// Pieces of `E(V_B; V_B)` that do not depend on `V_B`.
struct EquityAtBarrier {
    slope: f64,
    coupon: f64,
    tax_flow: f64,
    r: f64,
    lambda: f64,
    log_vt: f64,
}

impl EquityAtBarrier {
    fn new(ctx: &FluctuationContext, mkt: &MarketParams) -> Result<Self> {
        let (r, lambda, a) = (mkt.r, mkt.lambda_obs, mkt.alpha);
        let slope = 1.0 - a * ctx.j(r, lambda, 0.0, 1.0)? - (1.0 - a) * ctx.j(r + mkt.m_debt, lambda, 0.0, 1.0)?;
        Ok(Self {
            slope,
            coupon: coupon_at_barrier(ctx, mkt)?,
            tax_flow: mkt.tax_flow(),
            r,
            lambda,
            log_vt: mkt.tax_level().ln(),
        })
    }

    fn eval(&self, ctx: &FluctuationContext, v_b: f64) -> Result<f64> {
        let z = v_b.ln();
        let shield = ctx.lambda(self.r, self.lambda, z, z, self.log_vt)?;
        Ok(v_b * self.slope + self.tax_flow * shield - self.coupon)
    }
}

/// Limit of `E(V_B; V_B)` as `V_B` decreases to 0.
pub fn equity_at_barrier_limit(ctx: &FluctuationContext, mkt: &MarketParams) -> Result<f64> {
    let coupon = coupon_at_barrier(ctx, mkt)?;
    if mkt.tax_level() > 0.0 {
        return Ok(-coupon);
    }
    Ok(newref(ctx, mkt)?)
}

/// `P kappa rho/(lambda + r) Phi(r + lambda)/Phi(r) - (P rho + p)/(lambda + r + m) Phi(r + m + lambda)/Phi(r + m)`.
/// With `V_T = 0` a non-negative value means the optimal barrier is 0.
pub fn newref(ctx: &FluctuationContext, mkt: &MarketParams) -> Result<f64> {
    let (r, lam) = (mkt.r, mkt.lambda_obs);
    let tax = mkt.tax_flow() / (lam + r) * ctx.phi(r + lam)? / ctx.phi(r)?;
    Ok(tax - coupon_at_barrier(ctx, mkt)?)
}

/// Optimal endogenous barrier `V_B*`.
pub fn optimal_barrier(ctx: &FluctuationContext, mkt: &MarketParams) -> Result<f64> {
    mkt.validate()?;
    if mkt.is_classical() {
        return classical_barrier(ctx, mkt);
    }
    if mkt.tax_level() == 0.0 && newref(ctx, mkt)? >= 0.0 {
        return Ok(0.0);
    }
    let parts = EquityAtBarrier::new(ctx, mkt)?;
    let f = |v_b: f64| parts.eval(ctx, v_b);
    let p = mkt.face_value_p;
    let mut lo = 1e-6 * p;
    while f(lo)? >= 0.0 {
        lo *= 0.1;
        if lo < 1e-290 {
            return Err(Error::Bracket { context: "optimal_barrier", reason: "no negative lower bracket".into() });
        }
    }
    let mut hi = p;
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bracket { context: "optimal_barrier", reason: "no positive upper bracket".into() });
        }
    }
    let v_b = bisect(f, lo, hi, 1e-14 * hi, "optimal_barrier")?;
    let res = f(v_b)?;
    if res.abs() > 1e-8 * p.max(1.0) {
        log::warn!("barrier residual {res:e} above tolerance");
    }
    Ok(v_b)
}

/// Equity value under continuous observation.
pub fn classical_equity(ctx: &FluctuationContext, mkt: &MarketParams, v: f64, v_b: f64) -> Result<f64> {
    equity_value(ctx, &mkt.classical(), v, v_b)
}

/// Smooth-fit residual whose root is the classical barrier; increasing in `V_B`.
pub fn classical_barrier_residual(ctx: &FluctuationContext, mkt: &MarketParams, v_b: f64) -> Result<f64> {
    let (r, rm) = (mkt.r, mkt.r + mkt.m_debt);
    let psi1 = ctx.model().psi(1.0)?;
    let (phi_r, phi_rm) = (ctx.phi(r)?, ctx.phi(rm)?);
    if (1.0 - phi_r).abs() < 1e-12 {
        return Err(invalid("delta", "the classical barrier needs delta > 0 so that Phi(r) > 1"));
    }
    let a = mkt.alpha;
    let slope = a * (psi1 - r) / (1.0 - phi_r) + (1.0 - a) * (psi1 - rm) / (1.0 - phi_rm);
    let vt = mkt.tax_level();
    let ratio = if vt == 0.0 { 1.0 } else { (v_b / vt).powf(phi_r).min(1.0) };
    Ok(v_b * slope + mkt.tax_flow() / phi_r * ratio - mkt.coupon_flow() / phi_rm)
}

/// Barrier of the continuously observed model.
pub fn classical_barrier(ctx: &FluctuationContext, mkt: &MarketParams) -> Result<f64> {
    let f = |v_b: f64| classical_barrier_residual(ctx, mkt, v_b);
    if f(0.0)? >= 0.0 {
        return Ok(0.0);
    }
    let mut hi = mkt.face_value_p;
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bracket { context: "classical_barrier", reason: "no positive upper bracket".into() });
        }
    }
    bisect(f, 0.0, hi, 1e-14 * hi, "classical_barrier")
}
