//! One function per subcommand. Each writes its CSVs and returns a JSON summary.

use anyhow::{Context, Result};
use capstruct::inversion::{bankruptcy_value_point, time_distribution, GaverStehfest};
use capstruct::mc_oracle::{estimate_functionals, SimConfig, SimMode};
use capstruct::spreads::{calibrate_leverage, spreads_at, Calibration};
use capstruct::two_stage::{default_grid, optimize_face_value};
use capstruct::valuation::{capital_structure, classical_barrier, equity_at_barrier, equity_value, optimal_barrier};
use capstruct::{FluctuationContext, MarketParams};
use serde_json::json;

use crate::output::{num, Output};
use crate::scenario::{Rate, Scenario};

pub struct Env<'a> {
    pub scn: &'a Scenario,
    pub ctx: FluctuationContext,
    pub mkt: MarketParams,
}

impl Env<'_> {
    fn at_lambda(&self, l: Rate) -> MarketParams {
        MarketParams { lambda_obs: l.0, ..self.mkt.clone() }
    }

    fn lambdas(&self) -> &[Rate] {
        &self.scn.run.lambdas
    }

    fn gs(&self) -> Result<GaverStehfest> {
        Ok(GaverStehfest::new(self.scn.run.stehfest_order)?)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

fn lam(l: f64) -> String {
    Rate(l).to_string()
}

/// Debt, firm and equity over an asset grid at `V_B* (1 + vb_offset)`.
pub fn value(env: &Env, out: &mut Output) -> Result<serde_json::Value> {
    let run = &env.scn.run;
    let vb_star = optimal_barrier(&env.ctx, &env.mkt).context("optimal barrier")?;
    let vb = vb_star * (1.0 + run.vb_offset);
    let lo = if vb > 0.0 { vb } else { 1e-3 * run.v };
    let mut rows = Vec::new();
    let mut min_equity = f64::INFINITY;
    for v in linspace(lo, run.v_max_factor * run.v, run.grid) {
        let cs = capital_structure(&env.ctx, &env.mkt, v, vb).with_context(|| format!("values at V = {v}"))?;
        min_equity = min_equity.min(cs.equity);
        rows.push(vec![num(v), num(vb), num(cs.debt), num(cs.firm), num(cs.equity)]);
    }
    out.csv("value.csv", &["v", "v_b", "debt", "firm", "equity"], &rows)?;
    Ok(json!({ "v_b_star": vb_star, "v_b": vb, "min_equity": min_equity, "limited_liability_holds": min_equity >= -1e-8 }))
}

/// Optimal barrier across the observation-rate sweep plus equity curves at each.
pub fn barrier(env: &Env, out: &mut Output) -> Result<serde_json::Value> {
    let run = &env.scn.run;
    let classical = classical_barrier(&env.ctx, &env.mkt).context("classical barrier")?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut mains = None;
    for &l in env.lambdas() {
        let mkt = env.at_lambda(l);
        let vb = optimal_barrier(&env.ctx, &mkt).with_context(|| format!("barrier at lambda = {l}"))?;
        let residual = if vb > 0.0 { equity_at_barrier(&env.ctx, &mkt, vb)? } else { 0.0 };
        rows.push(vec![lam(l.0), num(vb), num(residual), num(classical)]);
        let lo = if vb > 0.0 { vb } else { 1e-3 * run.v };
        for v in linspace(lo, run.v_max_factor * run.v, run.grid) {
            curves.push(vec![lam(l.0), num(v), num(equity_value(&env.ctx, &mkt, v, vb)?)]);
        }
        if l.0 == env.mkt.lambda_obs {
            mains = Some((vb, residual));
        }
    }
    out.csv("barrier.csv", &["lambda", "v_b_star", "equity_at_barrier", "classical_v_b"], &rows)?;
    out.csv("barrier_equity.csv", &["lambda", "v", "equity"], &curves)?;
    let (vb, residual) = match mains {
        Some(m) => m,
        None => {
            let vb = optimal_barrier(&env.ctx, &env.mkt)?;
            (vb, if vb > 0.0 { equity_at_barrier(&env.ctx, &env.mkt, vb)? } else { 0.0 })
        }
    };
    Ok(json!({ "lambda": lam(env.mkt.lambda_obs), "v_b_star": vb, "residual": residual, "classical_v_b": classical }))
}

/// Bankruptcy time and asset value at bankruptcy distributions.
pub fn dist(env: &Env, out: &mut Output) -> Result<serde_json::Value> {
    let run = &env.scn.run;
    let gs = env.gs()?;
    let ts = logspace(run.t_min, run.t_max, run.grid);
    let (mut time_rows, mut value_rows, mut summary) = (Vec::new(), Vec::new(), Vec::new());
    for &l in env.lambdas() {
        let mkt = env.at_lambda(l);
        let vb = optimal_barrier(&env.ctx, &mkt)?;
        if vb <= 0.0 {
            log::warn!("no bankruptcy at lambda = {l}: optimal barrier is 0");
            continue;
        }
        for p in time_distribution(&env.ctx, &mkt, &gs, run.v, vb, &ts).with_context(|| format!("time distribution at lambda = {l}"))? {
            time_rows.push(vec![lam(l.0), num(p.t), num(p.density), num(p.cdf)]);
        }
        let mut atom = 0.0;
        for v in linspace(0.2 * vb, vb, run.grid) {
            let p = bankruptcy_value_point(&env.ctx, &mkt, &gs, run.v, vb, v).with_context(|| format!("value distribution at lambda = {l}"))?;
            atom = p.atom_mass_at_barrier;
            value_rows.push(vec![lam(l.0), num(v), num(p.density), num(p.cdf), num(p.atom_mass_at_barrier), num(p.total_mass)]);
        }
        summary.push(json!({ "lambda": lam(l.0), "v_b_star": vb, "atom_at_barrier": atom }));
    }
    out.csv("dist_time.csv", &["lambda", "t", "density", "cdf"], &time_rows)?;
    out.csv("dist_value.csv", &["lambda", "v", "density", "cdf", "atom_at_barrier", "total_mass"], &value_rows)?;
    Ok(json!(summary))
}

/// Firm and debt value over face values, and the maximising face value.
pub fn two_stage(env: &Env, out: &mut Output) -> Result<serde_json::Value> {
    let run = &env.scn.run;
    let grid = default_grid(run.v, run.grid);
    let (mut rows, mut best, mut summary) = (Vec::new(), Vec::new(), Vec::new());
    for &l in env.lambdas() {
        let res = optimize_face_value(&env.ctx, &env.at_lambda(l), run.v, &grid).with_context(|| format!("two-stage at lambda = {l}"))?;
        for p in &res.profile {
            rows.push(vec![lam(l.0), num(p.p), num(p.p / run.v), num(p.v_b_star), num(p.firm), num(p.debt)]);
        }
        best.push(vec![lam(l.0), num(res.p_star), num(res.firm_at_p_star)]);
        summary.push(json!({ "lambda": lam(l.0), "p_star": res.p_star, "firm": res.firm_at_p_star }));
    }
    out.csv("two_stage.csv", &["lambda", "p", "leverage", "v_b_star", "firm", "debt"], &rows)?;
    out.csv("two_stage_optimum.csv", &["lambda", "p_star", "firm_at_p_star"], &best)?;
    Ok(json!(summary))
}

fn calibrations(env: &Env) -> Result<Vec<(Rate, Calibration)>> {
    let run = &env.scn.run;
    env.lambdas()
        .iter()
        .map(|&l| {
            calibrate_leverage(&env.ctx, &env.at_lambda(l), run.v, run.leverage)
                .map(|c| (l, c))
                .with_context(|| format!("calibration at lambda = {l}, leverage = {}", run.leverage))
        })
        .collect()
}

fn calibration_rows(cals: &[(Rate, Calibration)]) -> Vec<Vec<String>> {
    cals.iter().map(|(l, c)| vec![lam(l.0), num(c.p_hat), num(c.rho_hat), num(c.v_b_hat)]).collect()
}

const CALIBRATION_HEADER: [&str; 4] = ["lambda", "p_hat", "rho_hat", "v_b_hat"];

/// Calibrated triples and par-spread curves.
pub fn spreads(env: &Env, out: &mut Output) -> Result<serde_json::Value> {
    let run = &env.scn.run;
    let gs = env.gs()?;
    let cals = calibrations(env)?;
    let mut rows = Vec::new();
    for (l, c) in &cals {
        let mkt = c.market(&env.at_lambda(*l));
        for p in spreads_at(&env.ctx, &mkt, &gs, run.v, c.v_b_hat, &run.maturities).with_context(|| format!("spreads at lambda = {l}"))? {
            rows.push(vec![lam(l.0), num(p.t), num(1e4 * p.spread)]);
        }
    }
    out.csv("calibration.csv", &CALIBRATION_HEADER, &calibration_rows(&cals))?;
    out.csv("spreads.csv", &["lambda", "t", "spread_bps"], &rows)?;
    Ok(json!({ "leverage": run.leverage, "curves": cals.len() }))
}

/// Calibration table for one case and leverage.
pub fn table1(env: &Env, out: &mut Output) -> Result<serde_json::Value> {
    let cals = calibrations(env)?;
    let rows = calibration_rows(&cals);
    out.csv("table1.csv", &CALIBRATION_HEADER, &rows)?;
    println!("{:>8} {:>12} {:>10} {:>12}", "lambda", "P_hat", "rho_hat", "V_B_hat");
    for (l, c) in &cals {
        println!("{:>8} {:>12.4} {:>10.5} {:>12.4}", l.to_string(), c.p_hat, c.rho_hat, c.v_b_hat);
    }
    Ok(json!({ "leverage": env.scn.run.leverage, "rows": cals.len() }))
}

/// Monte Carlo estimates next to the closed forms.
pub fn simulate(env: &Env, out: &mut Output) -> Result<serde_json::Value> {
    let run = &env.scn.run;
    if env.mkt.is_classical() {
        anyhow::bail!("scenario key `market.lambda`: simulation needs a finite observation rate");
    }
    let vb = match run.v_b {
        Some(v) => v,
        None => optimal_barrier(&env.ctx, &env.mkt)?,
    };
    let mode = match run.fine_dt {
        Some(dt) => SimMode::FineGrid { dt },
        None => SimMode::Skeleton,
    };
    let cfg = SimConfig { seed: run.seed, n_paths: run.n_paths, mode, horizon: run.horizon, antithetic: false };
    let est = estimate_functionals(&cfg, env.ctx.model(), &env.mkt, run.v, vb).context("simulation")?;
    let (r, rm, l) = (env.mkt.r, env.mkt.r + env.mkt.m_debt, env.mkt.lambda_obs);
    let x = (run.v / vb).ln();
    let cs = capital_structure(&env.ctx, &env.mkt, run.v, vb)?;
    let lambda_exact = env.ctx.lambda(r, l, run.v.ln(), vb.ln(), env.mkt.tax_level().ln())?;
    let j = |q: f64, th: f64| env.ctx.j(q, l, x, th);
    let mut pairs = vec![
        ("j_r_theta0", est.j_r_0, j(r, 0.0)?),
        ("j_r_theta1", est.j_r_1, j(r, 1.0)?),
        ("j_rm_theta0", est.j_rm_0, j(rm, 0.0)?),
        ("j_rm_theta1", est.j_rm_1, j(rm, 1.0)?),
        ("lambda_clock", est.lambda, lambda_exact),
        ("debt", est.debt, cs.debt),
        ("firm", est.firm, cs.firm),
        ("equity", est.equity, cs.equity),
    ];
    if let Some(fg) = est.fine_grid {
        pairs.push(("lambda_grid_dt", fg.coarse, lambda_exact));
        pairs.push(("lambda_grid_half_dt", fg.fine, lambda_exact));
        pairs.push(("lambda_grid_extrapolated", fg.richardson, lambda_exact));
    }
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|(name, e, exact)| vec![name.to_string(), num(e.mean), num(e.stderr), num(*exact), num(e.z_score(*exact))])
        .collect();
    out.csv("simulate.csv", &["quantity", "estimate", "stderr", "analytic", "z"], &rows)?;
    let worst = pairs.iter().map(|(_, e, x)| e.z_score(*x).abs()).fold(0.0, f64::max);
    Ok(json!({ "v": run.v, "v_b": vb, "n_paths": run.n_paths, "max_abs_z": worst, "censored": est.n_censored }))
}
