//! Scenario file: `model`, `market` and `run` blocks, all optional.

use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use capstruct::{HejdParams, MarketParams, Phase, TaxCutoff};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// A rate that may be infinite; written as `"inf"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate(pub f64);

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct RateVisitor;
        impl Visitor<'_> for RateVisitor {
            type Value = Rate;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Rate, E> {
                Ok(Rate(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Rate, E> {
                Ok(Rate(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Rate, E> {
                Ok(Rate(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Rate, E> {
                v.parse::<Rate>().map_err(E::custom)
            }
        }
        d.deserialize_any(RateVisitor)
    }
}

impl std::str::FromStr for Rate {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "classical" => Ok(Rate(f64::INFINITY)),
            other => other.parse::<f64>().map(Rate).map_err(|_| format!("`{s}` is neither a number nor \"inf\"")),
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Case {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
    #[serde(rename = "custom")]
    #[value(name = "custom")]
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub case: Case,
    /// Drift; omitted means calibrated so that `psi(1) = r - delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<Phase>>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self { case: Case::A, mu: None, sigma: None, gamma: None, phases: None }
    }
}

/// Tax cutoff: a level or the rule `"P*rho/delta"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaxRule {
    Level(f64),
    Rule(String),
}

const COUPON_RULE: &str = "P*rho/delta";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketBlock {
    pub r: f64,
    pub delta: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub rho: f64,
    pub m: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub lambda: Rate,
    pub v_t: TaxRule,
}

impl Default for MarketBlock {
    fn default() -> Self {
        let d = MarketParams::default();
        Self {
            r: d.r,
            delta: d.delta,
            kappa: d.kappa,
            alpha: d.alpha,
            rho: d.rho,
            m: d.m_debt,
            p: d.face_value_p,
            lambda: Rate(d.lambda_obs),
            v_t: TaxRule::Rule(COUPON_RULE.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    /// Current asset value.
    pub v: f64,
    /// Observation rates swept by `barrier`, `dist`, `two-stage`, `spreads`, `table1`.
    pub lambdas: Vec<Rate>,
    /// Target leverage `P / firm value` in (0, 1).
    pub leverage: f64,
    /// Points per grid.
    pub grid: usize,
    /// Relative shift applied to the optimal barrier by `value`.
    pub vb_offset: f64,
    /// Upper end of asset-value grids as a multiple of `v`.
    pub v_max_factor: f64,
    pub maturities: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub seed: u64,
    pub n_paths: usize,
    /// Fine-grid step for `simulate`; omitted means skeleton only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fine_dt: Option<f64>,
    pub horizon: f64,
    /// Barrier for `simulate`; omitted means the optimal barrier.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_b: Option<f64>,
    pub stehfest_order: usize,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            v: 100.0,
            lambdas: [1.0, 2.0, 4.0, 6.0, 12.0, 52.0, 365.0, f64::INFINITY].map(Rate).to_vec(),
            leverage: 0.5,
            grid: 41,
            vb_offset: 0.0,
            v_max_factor: 2.0,
            maturities: vec![0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 20.0, 30.0, 50.0, 100.0],
            t_min: 0.01,
            t_max: 100.0,
            seed: 42,
            n_paths: 100_000,
            fine_dt: None,
            horizon: 1e4,
            v_b: None,
            stehfest_order: capstruct::inversion::DEFAULT_ORDER,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelBlock,
    pub market: MarketBlock,
    pub run: RunBlock,
}

/// Overrides taken from the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub case: Option<Case>,
    pub lambda: Option<Rate>,
    pub leverage: Option<f64>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub vb_offset: Option<f64>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| anyhow::anyhow!("scenario key `{}`: {}", e.path(), e.inner()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(c) = o.case {
            self.model.case = c;
        }
        if let Some(l) = o.lambda {
            self.market.lambda = l;
        }
        if let Some(l) = o.leverage {
            // accept percentages as printed in the tables
            self.run.leverage = if l > 1.0 { l / 100.0 } else { l };
        }
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(g) = o.grid {
            self.run.grid = g;
        }
        if let Some(v) = o.vb_offset {
            self.run.vb_offset = v;
        }
    }

    pub fn market(&self) -> Result<MarketParams> {
        let b = &self.market;
        let v_tax = match &b.v_t {
            TaxRule::Level(v) if *v >= 0.0 && v.is_finite() => TaxCutoff::Level(*v),
            TaxRule::Level(v) => bail!("scenario key `market.v_t`: level {v} must be finite and non-negative"),
            TaxRule::Rule(s) if s.replace(' ', "") == COUPON_RULE => TaxCutoff::CouponOverPayout,
            TaxRule::Rule(s) => bail!("scenario key `market.v_t`: unknown rule `{s}`, expected a number or \"{COUPON_RULE}\""),
        };
        let mkt = MarketParams {
            r: b.r,
            delta: b.delta,
            kappa: b.kappa,
            alpha: b.alpha,
            rho: b.rho,
            m_debt: b.m,
            face_value_p: b.p,
            lambda_obs: b.lambda.0,
            v_tax,
        };
        mkt.validate().map_err(|e| anyhow::anyhow!("scenario block `market`: {e}"))?;
        if !(b.lambda.0 > 0.0) {
            bail!("scenario key `market.lambda`: {} must be positive", b.lambda);
        }
        Ok(mkt)
    }

    pub fn model(&self) -> Result<HejdParams> {
        let m = &self.model;
        let (r, delta) = (self.market.r, self.market.delta);
        let base = match m.case {
            Case::A | Case::B => {
                if m.sigma.is_some() || m.gamma.is_some() || m.phases.is_some() {
                    bail!("scenario key `model.case`: built-in case {:?} takes no sigma/gamma/phases; use \"custom\"", m.case);
                }
                if m.case == Case::A {
                    HejdParams::case_a()
                } else {
                    HejdParams::case_b()
                }
            }
            Case::Custom => {
                let sigma = m.sigma.context("scenario key `model.sigma`: required for a custom model")?;
                let gamma = m.gamma.unwrap_or(0.0);
                let phases = m.phases.clone().unwrap_or_default();
                HejdParams::new(m.mu.unwrap_or(0.0), sigma, gamma, phases)
                    .map_err(|e| anyhow::anyhow!("scenario block `model`: {e}"))?
            }
        };
        if let Some(mu) = m.mu {
            return Ok(HejdParams { mu, ..base });
        }
        let gap = base.psi(1.0).map(|p| p - (r - delta)).unwrap_or(f64::INFINITY);
        if gap.abs() <= 1e-12 {
            return Ok(base);
        }
        base.calibrate_drift(r, delta).map_err(|e| anyhow::anyhow!("scenario block `market`: {e}"))
    }

    pub fn validate_run(&self) -> Result<()> {
        let r = &self.run;
        let check = |ok: bool, key: &str, why: &str| if ok { Ok(()) } else { Err(anyhow::anyhow!("scenario key `run.{key}`: {why}")) };
        check(r.v > 0.0 && r.v.is_finite(), "v", "must be positive")?;
        check(!r.lambdas.is_empty() && r.lambdas.iter().all(|l| l.0 > 0.0), "lambdas", "must be a non-empty list of positive rates")?;
        check(r.leverage > 0.0 && r.leverage < 1.0, "leverage", "must lie in (0, 1) (or (1, 100) as a percentage on the command line)")?;
        check(r.grid >= 2, "grid", "needs at least 2 points")?;
        check(r.vb_offset > -1.0, "vb_offset", "must exceed -1")?;
        check(r.v_max_factor > 1.0, "v_max_factor", "must exceed 1")?;
        check(r.maturities.iter().all(|&t| t > 0.0) && r.maturities.windows(2).all(|w| w[1] > w[0]), "maturities", "must be positive and strictly increasing")?;
        check(r.t_min > 0.0 && r.t_max > r.t_min, "t_min", "need 0 < t_min < t_max")?;
        check(r.n_paths >= 1, "n_paths", "must be at least 1")?;
        check(r.fine_dt.is_none_or(|d| d > 0.0), "fine_dt", "must be positive")?;
        check(r.horizon > 0.0, "horizon", "must be positive")?;
        check(r.v_b.is_none_or(|v| v > 0.0), "v_b", "must be positive")?;
        check(r.stehfest_order >= 2 && r.stehfest_order % 2 == 0 && r.stehfest_order <= capstruct::inversion::MAX_ORDER, "stehfest_order", "must be even and at most 18")?;
        Ok(())
    }
}
