//! Choice of face value maximising firm value, with the barrier re-optimised
//! for every candidate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fluctuation::FluctuationContext;
use crate::solve::golden_max;
use crate::valuation::{debt_value, firm_value, optimal_barrier, MarketParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub p: f64,
    pub v_b_star: f64,
    pub firm: f64,
    pub debt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub p_star: f64,
    pub firm_at_p_star: f64,
    pub profile: Vec<ProfilePoint>,
}

/// `n` equally spaced face values on `[0, V]`.
pub fn default_grid(v: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| v * i as f64 / (n - 1) as f64).collect()
}

/// Firm value and barrier at face value `p` (tax cutoff follows the template rule).
pub fn profile_point(ctx: &FluctuationContext, template: &MarketParams, v: f64, p: f64) -> Result<ProfilePoint> {
    if p == 0.0 {
        // no debt: no coupons, no tax shield, no bankruptcy
        return Ok(ProfilePoint { p, v_b_star: 0.0, firm: v, debt: 0.0 });
    }
    let mkt = MarketParams { face_value_p: p, ..template.clone() };
    let v_b = optimal_barrier(ctx, &mkt)?;
    Ok(ProfilePoint { p, v_b_star: v_b, firm: firm_value(ctx, &mkt, v, v_b)?, debt: debt_value(ctx, &mkt, v, v_b)? })
}

/// Maximises firm value over `p_grid`, then refines inside the bracketing cells.
pub fn optimize_face_value(
    ctx: &FluctuationContext,
    template: &MarketParams,
    v: f64,
    p_grid: &[f64],
) -> Result<TwoStageResult> {
    if p_grid.is_empty() || p_grid.iter().any(|&p| !(0.0..=v).contains(&p)) {
        return Err(invalid("p_grid", "must be non-empty and lie in [0, V]"));
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("p_grid", "must be strictly increasing"));
    }
    let profile: Vec<ProfilePoint> =
        p_grid.par_iter().map(|&p| profile_point(ctx, template, v, p)).collect::<Result<_>>()?;
    let best = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.firm.total_cmp(&b.1.firm))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lo = p_grid[best.saturating_sub(1)];
    let hi = p_grid[(best + 1).min(p_grid.len() - 1)];
    let (mut p_star, mut firm_star) = (profile[best].p, profile[best].firm);
    if hi > lo {
        let (p, f) = golden_max(|p| Ok(profile_point(ctx, template, v, p)?.firm), lo, hi, 1e-4 * v)?;
        if f > firm_star {
            p_star = p;
            firm_star = f;
        }
    }
    Ok(TwoStageResult { p_star, firm_at_p_star: firm_star, profile })
}
