//! Monte Carlo ground truth.
//!
//! Skeleton mode samples the log-asset exactly at Poisson observation epochs.
//! Discounting at rate `q` is replaced by an independent `Exp(q)` clock, so
//! `E[exp(-q T) f] = E[1{T < e_q} f]` and `E[int_0^T exp(-q t) g(X_t) dt] =
//! E[g(X_{e_q}) 1{e_q < T}] / q`. Every path therefore stops at `T ^ e_q` and
//! the estimators are exact. Fine-grid mode additionally integrates the
//! occupation indicator with the trapezoid rule on steps `dt/2` and `dt`.
//!
//! Path `i` draws from a ChaCha stream keyed by `(seed, i)` and chunk results
//! are reduced in index order, so output does not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::levy_model::HejdParams;
use crate::valuation::MarketParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SimMode {
    Skeleton,
    FineGrid { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub mode: SimMode,
    pub horizon: f64,
    pub antithetic: bool,
}

impl SimConfig {
    pub fn skeleton(seed: u64, n_paths: usize) -> Self {
        Self { seed, n_paths, mode: SimMode::Skeleton, horizon: 1e4, antithetic: false }
    }

    pub fn fine_grid(seed: u64, n_paths: usize, dt: f64) -> Self {
        Self { seed, n_paths, mode: SimMode::FineGrid { dt }, horizon: 1e4, antithetic: false }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || (self.antithetic && self.n_paths < 2) {
            return Err(invalid("n_paths", "need at least one path (two with antithetics)"));
        }
        if let SimMode::FineGrid { dt } = self.mode {
            if !(dt > 0.0) {
                return Err(invalid("dt", format!("{dt} must be positive")));
            }
        }
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon", format!("{} must be positive", self.horizon)));
        }
        Ok(())
    }

    /// Number of independent samples (antithetic pairs count once).
    fn n_samples(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr + 1e-12 * value.abs().max(1.0)
    }

    pub fn z_score(&self, value: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - value) / self.stderr
        }
    }
}

// ---------------------------------------------------------------------------
// path engine
// ---------------------------------------------------------------------------

struct Driver<'a> {
    model: &'a HejdParams,
    cum_p: Vec<f64>,
    sign: f64,
}

impl<'a> Driver<'a> {
    fn new(model: &'a HejdParams, sign: f64) -> Self {
        let mut acc = 0.0;
        let cum_p = model
            .phases
            .iter()
            .map(|ph| {
                acc += ph.p;
                acc
            })
            .collect();
        Self { model, cum_p, sign }
    }

    /// Exact increment of `X` over a step of length `dt`.
    fn increment<R: Rng>(&self, rng: &mut R, dt: f64) -> f64 {
        let m = self.model;
        let z: f64 = rng.sample(StandardNormal);
        let mut x = m.mu * dt + self.sign * m.sigma * dt.sqrt() * z;
        if m.gamma_jump > 0.0 {
            let mut s = rng.sample::<f64, _>(Exp1) / m.gamma_jump;
            while s < dt {
                let u: f64 = rng.random();
                let k = self.cum_p.iter().position(|&c| u < c).unwrap_or(self.cum_p.len() - 1);
                x -= rng.sample::<f64, _>(Exp1) / m.phases[k].beta;
                s += rng.sample::<f64, _>(Exp1) / m.gamma_jump;
            }
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    /// First observation below 0, with time and position.
    Default { t: f64, x: f64 },
    /// The exponential clock rang first; position at that time.
    Clock { x: f64 },
    Censored { x: f64 },
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Skeleton walk from `x0` until the first observation below 0, the clock, or the horizon.
fn walk<R: Rng>(drv: &Driver, rng: &mut R, x0: f64, lambda: f64, clock: f64, horizon: f64) -> Outcome {
    if x0 < 0.0 {
        return Outcome::Default { t: 0.0, x: x0 };
    }
    let (mut t, mut x) = (0.0, x0);
    loop {
        let next = t + rng.sample::<f64, _>(Exp1) / lambda;
        if clock <= next && clock <= horizon {
            return Outcome::Clock { x: x + drv.increment(rng, clock - t) };
        }
        if next > horizon {
            return Outcome::Censored { x };
        }
        x += drv.increment(rng, next - t);
        t = next;
        if x < 0.0 {
            return Outcome::Default { t, x };
        }
    }
}

/// Fine-grid walk; also returns `int_0^{T ^ clock} 1{X_t >= level} dt` by the
/// trapezoid rule on steps `h` and on every other grid point (step `2h`).
fn walk_fine<R: Rng>(
    drv: &Driver,
    rng: &mut R,
    x0: f64,
    lambda: f64,
    clock: f64,
    horizon: f64,
    h: f64,
    level: f64,
) -> (Outcome, f64, f64) {
    if x0 < 0.0 {
        return (Outcome::Default { t: 0.0, x: x0 }, 0.0, 0.0);
    }
    let ind = |x: f64| if x >= level { 1.0 } else { 0.0 };
    let (mut t, mut x) = (0.0, x0);
    let mut g = ind(x);
    let (mut fine, mut coarse) = (0.0, 0.0);
    let (mut tc, mut gc) = (0.0, g);
    let mut k: u64 = 1;
    let mut next_obs = rng.sample::<f64, _>(Exp1) / lambda;
    let end = clock.min(horizon);
    loop {
        let grid = k as f64 * h;
        let tn = grid.min(next_obs).min(end);
        x += drv.increment(rng, tn - t);
        let gn = ind(x);
        fine += 0.5 * (tn - t) * (g + gn);
        t = tn;
        g = gn;
        let on_grid = tn == grid;
        let event = tn == next_obs || tn == end;
        if event || (on_grid && k % 2 == 0) {
            coarse += 0.5 * (t - tc) * (gc + g);
            tc = t;
            gc = g;
        }
        if on_grid {
            k += 1;
        }
        if tn == end {
            let out = if clock <= horizon { Outcome::Clock { x } } else { Outcome::Censored { x } };
            return (out, fine, coarse);
        }
        if tn == next_obs {
            if x < 0.0 {
                return (Outcome::Default { t, x }, fine, coarse);
            }
            next_obs = t + rng.sample::<f64, _>(Exp1) / lambda;
        }
    }
}

// ---------------------------------------------------------------------------
// deterministic parallel accumulation
// ---------------------------------------------------------------------------

const CHUNK: usize = 2048;

#[derive(Clone)]
struct Moments {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    flags: usize,
}

fn accumulate<const K: usize, F>(cfg: &SimConfig, sample: F) -> (Vec<Estimate>, usize)
where
    F: Fn(&mut ChaCha8Rng, f64) -> ([f64; K], bool) + Sync,
{
    let n = cfg.n_samples();
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments { sum: vec![0.0; K], sumsq: vec![0.0; K], flags: 0 };
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let (vals, flag) = if cfg.antithetic {
                    let (a, fa) = sample(&mut path_rng(cfg.seed, i as u64), 1.0);
                    let (b, fb) = sample(&mut path_rng(cfg.seed, i as u64), -1.0);
                    let mut avg = [0.0; K];
                    for k in 0..K {
                        avg[k] = 0.5 * (a[k] + b[k]);
                    }
                    m.flags += fa as usize;
                    (avg, fb)
                } else {
                    sample(&mut path_rng(cfg.seed, i as u64), 1.0)
                };
                m.flags += flag as usize;
                for k in 0..K {
                    m.sum[k] += vals[k];
                    m.sumsq[k] += vals[k] * vals[k];
                }
            }
            m
        })
        .collect();
    let mut total = Moments { sum: vec![0.0; K], sumsq: vec![0.0; K], flags: 0 };
    for p in &parts {
        total.flags += p.flags;
        for k in 0..K {
            total.sum[k] += p.sum[k];
            total.sumsq[k] += p.sumsq[k];
        }
    }
    let nf = n as f64;
    let est = (0..K)
        .map(|k| {
            let mean = total.sum[k] / nf;
            let var = if n > 1 { ((total.sumsq[k] - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
            Estimate { mean, stderr: (var / nf).sqrt(), n }
        })
        .collect();
    (est, total.flags)
}

// ---------------------------------------------------------------------------
// public estimators
// ---------------------------------------------------------------------------

/// One simulated bankruptcy: time, `log(V_T / V_B)`, and whether the horizon cut the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefaultSample {
    pub time: f64,
    pub log_ratio: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultSet {
    pub samples: Vec<DefaultSample>,
    pub n_censored: usize,
}

impl DefaultSet {
    fn fraction<F: Fn(&DefaultSample) -> bool>(&self, pred: F) -> Estimate {
        let n = self.samples.len();
        let hits = self.samples.iter().filter(|s| !s.censored && pred(s)).count() as f64;
        let p = hits / n as f64;
        Estimate { mean: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), n }
    }

    /// `P(T <= t)`.
    pub fn time_cdf(&self, t: f64) -> Estimate {
        self.fraction(|s| s.time <= t)
    }

    /// `P(V_T / V_B <= ratio, T < horizon)`.
    pub fn value_cdf(&self, ratio: f64) -> Estimate {
        let l = ratio.ln();
        self.fraction(|s| s.log_ratio <= l)
    }

    /// Mean undershoot `log V_B - log V_T` over observed defaults.
    pub fn mean_undershoot(&self) -> f64 {
        let hit: Vec<f64> = self.samples.iter().filter(|s| !s.censored).map(|s| -s.log_ratio).collect();
        hit.iter().sum::<f64>() / hit.len().max(1) as f64
    }
}

fn start(v: f64, v_b: f64) -> Result<f64> {
    if !(v > 0.0 && v_b >= 0.0) {
        return Err(invalid("V", format!("need V > 0 and V_B >= 0, got {v}, {v_b}")));
    }
    Ok(if v_b == 0.0 { f64::INFINITY } else { (v / v_b).ln() })
}

/// Bankruptcy times and asset values at bankruptcy (no discounting).
pub fn simulate_default(cfg: &SimConfig, model: &HejdParams, lambda: f64, v: f64, v_b: f64) -> Result<DefaultSet> {
    cfg.validate()?;
    let x0 = start(v, v_b)?;
    let drv = Driver::new(model, 1.0);
    let samples: Vec<DefaultSample> = (0..cfg.n_paths)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i as u64);
            match walk(&drv, &mut rng, x0, lambda, f64::INFINITY, cfg.horizon) {
                Outcome::Default { t, x } => DefaultSample { time: t, log_ratio: x, censored: false },
                Outcome::Clock { x } | Outcome::Censored { x } => DefaultSample { time: cfg.horizon, log_ratio: x, censored: true },
            }
        })
        .collect();
    let n_censored = samples.iter().filter(|s| s.censored).count();
    if n_censored > 0 {
        log::info!("{n_censored} of {} paths reached the horizon {} without bankruptcy", cfg.n_paths, cfg.horizon);
    }
    Ok(DefaultSet { samples, n_censored })
}

/// `J^(q)(x; theta)` with `x = log(V / V_B)`.
pub fn estimate_j(cfg: &SimConfig, model: &HejdParams, q: f64, lambda: f64, x: f64, theta: f64) -> Result<Estimate> {
    cfg.validate()?;
    let (est, _) = accumulate::<1, _>(cfg, |rng, sign| {
        let drv = Driver::new(model, sign);
        let clock = rng.sample::<f64, _>(Exp1) / q;
        match walk(&drv, rng, x, lambda, clock, cfg.horizon) {
            Outcome::Default { x, .. } => ([(theta * x).exp()], false),
            Outcome::Clock { .. } => ([0.0], false),
            Outcome::Censored { .. } => ([0.0], true),
        }
    });
    Ok(est[0])
}

/// `int_lo^hi R^(q, lambda)(x, y) dy`: discounted time spent in `[lo, hi)` before bankruptcy.
pub fn estimate_occupation(
    cfg: &SimConfig,
    model: &HejdParams,
    q: f64,
    lambda: f64,
    x: f64,
    lo: f64,
    hi: f64,
) -> Result<Estimate> {
    cfg.validate()?;
    let (est, _) = accumulate::<1, _>(cfg, |rng, sign| {
        let drv = Driver::new(model, sign);
        let clock = rng.sample::<f64, _>(Exp1) / q;
        match walk(&drv, rng, x, lambda, clock, cfg.horizon) {
            Outcome::Clock { x } if x >= lo && x < hi => ([1.0 / q], false),
            Outcome::Censored { .. } => ([0.0], true),
            _ => ([0.0], false),
        }
    });
    Ok(est[0])
}

/// Occupation estimates of the tax functional at time steps `dt` and `dt/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineGridLambda {
    pub dt: f64,
    pub coarse: Estimate,
    pub fine: Estimate,
    /// `(4 fine - coarse) / 3`.
    pub richardson: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEstimates {
    pub j_r_0: Estimate,
    pub j_r_1: Estimate,
    pub j_rm_0: Estimate,
    pub j_rm_1: Estimate,
    pub lambda: Estimate,
    pub debt: Estimate,
    pub firm: Estimate,
    pub equity: Estimate,
    pub fine_grid: Option<FineGridLambda>,
    pub n_censored: usize,
}

/// Debt, firm and equity values and their ingredients at `(V, V_B)`.
pub fn estimate_functionals(
    cfg: &SimConfig,
    model: &HejdParams,
    mkt: &MarketParams,
    v: f64,
    v_b: f64,
) -> Result<FunctionalEstimates> {
    cfg.validate()?;
    mkt.validate()?;
    let x0 = start(v, v_b)?;
    let vt = mkt.tax_level();
    let level = if vt == 0.0 { f64::NEG_INFINITY } else { (vt / v_b).ln() };
    let (r, m, lam) = (mkt.r, mkt.m_debt, mkt.lambda_obs);
    let coupon = (mkt.face_value_p * mkt.rho + mkt.p_issue()) / (r + m);
    let tax = mkt.face_value_p * mkt.kappa * mkt.rho;
    let fine_h = match cfg.mode {
        SimMode::FineGrid { dt } => Some(0.5 * dt),
        SimMode::Skeleton => None,
    };
    let (est, n_censored) = accumulate::<11, _>(cfg, |rng, sign| {
        let drv = Driver::new(model, sign);
        let clock = rng.sample::<f64, _>(Exp1) / r;
        let (outcome, fine, coarse) = match fine_h {
            Some(h) => walk_fine(&drv, rng, x0, lam, clock, cfg.horizon, h, level),
            None => (walk(&drv, rng, x0, lam, clock, cfg.horizon), 0.0, 0.0),
        };
        let (mut j, mut occ, mut censored) = ([0.0; 4], 0.0, false);
        match outcome {
            Outcome::Default { t, x } => {
                let (e1, em) = (x.exp(), (-m * t).exp());
                j = [1.0, e1, em, em * e1];
            }
            Outcome::Clock { x } => {
                if x >= level {
                    occ = 1.0 / r;
                }
            }
            Outcome::Censored { .. } => censored = true,
        }
        let debt = coupon * (1.0 - j[2]) + (1.0 - mkt.alpha) * v_b * j[3];
        let firm = v + tax * occ - mkt.alpha * v_b * j[1];
        let vals = [j[0], j[1], j[2], j[3], occ, debt, firm, firm - debt, coarse, fine, (4.0 * fine - coarse) / 3.0];
        (vals, censored)
    });
    if n_censored > 0 {
        log::warn!("{n_censored} samples hit the horizon {}; estimates are truncated", cfg.horizon);
    }
    let fine_grid = match cfg.mode {
        SimMode::FineGrid { dt } => Some(FineGridLambda { dt, coarse: est[8], fine: est[9], richardson: est[10] }),
        SimMode::Skeleton => None,
    };
    Ok(FunctionalEstimates {
        j_r_0: est[0],
        j_r_1: est[1],
        j_rm_0: est[2],
        j_rm_1: est[3],
        lambda: est[4],
        debt: est[5],
        firm: est[6],
        equity: est[7],
        fine_grid,
        n_censored,
    })
}

/// `E[exp(-(r - delta) t) V_t] / V`, which equals 1 under the drift calibration.
pub fn martingale_check(cfg: &SimConfig, model: &HejdParams, r: f64, delta: f64, t: f64) -> Result<Estimate> {
    cfg.validate()?;
    let (est, _) = accumulate::<1, _>(cfg, |rng, sign| {
        let drv = Driver::new(model, sign);
        ([(drv.increment(rng, t) - (r - delta) * t).exp()], false)
    });
    Ok(est[0])
}
