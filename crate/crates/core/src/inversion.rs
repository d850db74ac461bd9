//! Gaver-Stehfest inversion and the distributions of the bankruptcy time and
//! of the asset value at bankruptcy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fluctuation::FluctuationContext;
use crate::valuation::MarketParams;

pub const DEFAULT_ORDER: usize = 14;
pub const MAX_ORDER: usize = 18;

/// Discount rate standing in for `q = 0` in undershoot transforms.
pub const UNDERSHOOT_Q: f64 = 1e-8;

/// Stehfest weights for a fixed even order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaverStehfest {
    order: usize,
    weights: Vec<f64>,
}

impl Default for GaverStehfest {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER).expect("default order is valid")
    }
}

impl GaverStehfest {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order % 2 != 0 || order > MAX_ORDER {
            return Err(invalid("order", format!("{order} must be even and at most {MAX_ORDER}")));
        }
        let half = order / 2;
        let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
        let weights = (1..=order)
            .map(|k| {
                let sum: f64 = ((k + 1) / 2..=k.min(half))
                    .map(|j| {
                        (j as f64).powi(half as i32) * fact(2 * j)
                            / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k))
                    })
                    .sum();
                if (k + half) % 2 == 0 {
                    sum
                } else {
                    -sum
                }
            })
            .collect();
        Ok(Self { order, weights })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Approximates `f(t)` from its Laplace transform `transform(s)`.
    pub fn invert<F>(&self, mut transform: F, t: f64) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("inversion point t = {t} must be positive")));
        }
        let step = std::f64::consts::LN_2 / t;
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w * transform((k + 1) as f64 * step)?;
        }
        Ok(step * acc)
    }
}

/// Inverts `transform` at `t` with a Stehfest rule of the given order.
pub fn gaver_stehfest<F>(order: usize, transform: F, t: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    GaverStehfest::new(order)?.invert(transform, t)
}

fn log_distance(v: f64, v_b: f64) -> Result<f64> {
    if !(v > 0.0 && v_b > 0.0) {
        return Err(Error::Domain(format!("need V > 0 and V_B > 0, got V = {v}, V_B = {v_b}")));
    }
    Ok((v / v_b).ln())
}

/// Density of the bankruptcy time at `t` (raw Stehfest output, may ring slightly below 0).
pub fn bankruptcy_time_density(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    t: f64,
) -> Result<f64> {
    let x = log_distance(v, v_b)?;
    gs.invert(|q| ctx.j(q, mkt.lambda_obs, x, 0.0), t)
}

/// Raw distribution function of the bankruptcy time at `t`.
pub fn bankruptcy_time_cdf(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    t: f64,
) -> Result<f64> {
    let x = log_distance(v, v_b)?;
    gs.invert(|q| Ok(ctx.j(q, mkt.lambda_obs, x, 0.0)? / q), t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub t: f64,
    pub density: f64,
    pub cdf: f64,
}

/// Density and cdf on a grid; raw cdf values outside `[-1e-4, 1 + 1e-4]` are an error,
/// in-range values are clamped to `[0, 1]` and the density is floored at 0.
pub fn time_distribution(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    ts: &[f64],
) -> Result<Vec<TimePoint>> {
    ts.iter()
        .map(|&t| {
            let density = bankruptcy_time_density(ctx, mkt, gs, v, v_b, t)?;
            let cdf = bankruptcy_time_cdf(ctx, mkt, gs, v, v_b, t)?;
            if !(-1e-4..=1.0 + 1e-4).contains(&cdf) {
                return Err(Error::Consistency(format!("inverted cdf {cdf} at t = {t} is outside [0, 1]")));
            }
            Ok(TimePoint { t, density: density.max(0.0), cdf: cdf.clamp(0.0, 1.0) })
        })
        .collect()
}

/// `E[exp(-theta Y); T < inf]` for the undershoot `Y = log V_B - log V_T >= 0`,
/// extrapolated to zero discounting.
pub fn undershoot_transform(ctx: &FluctuationContext, mkt: &MarketParams, x: f64, theta: f64) -> Result<f64> {
    let q = UNDERSHOOT_Q;
    Ok(2.0 * ctx.j(q, mkt.lambda_obs, x, theta)? - ctx.j(2.0 * q, mkt.lambda_obs, x, theta)?)
}

/// Probability that bankruptcy happens exactly at `V_B`.
///
/// Zero under Poisson observation: the triggering observation sees a value
/// strictly below the barrier almost surely. Under continuous observation it
/// is the probability of creeping.
pub fn undershoot_atom(ctx: &FluctuationContext, mkt: &MarketParams, x: f64) -> Result<f64> {
    if !mkt.is_classical() {
        return Ok(0.0);
    }
    let q = UNDERSHOOT_Q;
    Ok(2.0 * ctx.h_creeping_atom(q, x)? - ctx.h_creeping_atom(2.0 * q, x)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuePoint {
    pub v: f64,
    /// Density of the continuous part at `v`.
    pub density: f64,
    /// `P(V at bankruptcy <= v, bankruptcy happens)`.
    pub cdf: f64,
    pub atom_mass_at_barrier: f64,
    pub total_mass: f64,
}

/// Distribution of the asset value at bankruptcy on `(0, V_B]`.
pub fn bankruptcy_value_point(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    value: f64,
) -> Result<ValuePoint> {
    let x = log_distance(v, v_b)?;
    if !(value > 0.0 && value <= v_b) {
        return Err(Error::Domain(format!("value {value} must lie in (0, V_B]")));
    }
    let atom = undershoot_atom(ctx, mkt, x)?;
    let total = undershoot_transform(ctx, mkt, x, 0.0)?;
    if value == v_b {
        return Ok(ValuePoint { v: value, density: 0.0, cdf: total, atom_mass_at_barrier: atom, total_mass: total });
    }
    let u = (v_b / value).ln();
    let (density, cdf) = if atom >= 1.0 - 1e-12 && mkt.is_classical() {
        // all mass sits at the barrier, nothing to invert
        (0.0, 0.0)
    } else {
        let f_y = gs.invert(|th| Ok(undershoot_transform(ctx, mkt, x, th)? - atom), u)?;
        let cdf_y = gs.invert(|th| Ok(undershoot_transform(ctx, mkt, x, th)? / th), u)?;
        (f_y / value, total - cdf_y)
    };
    Ok(ValuePoint { v: value, density, cdf, atom_mass_at_barrier: atom, total_mass: total })
}

pub fn bankruptcy_value_density(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    value: f64,
) -> Result<f64> {
    Ok(bankruptcy_value_point(ctx, mkt, gs, v, v_b, value)?.density)
}

pub fn bankruptcy_value_cdf(
    ctx: &FluctuationContext,
    mkt: &MarketParams,
    gs: &GaverStehfest,
    v: f64,
    v_b: f64,
    value: f64,
) -> Result<f64> {
    Ok(bankruptcy_value_point(ctx, mkt, gs, v, v_b, value)?.cdf)
}
