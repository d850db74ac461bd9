//! Spectrally negative hyperexponential jump diffusion.
//!
//! The log-asset driver is `X_t = mu t + sigma B_t - sum of jumps`, where
//! jumps arrive at rate `gamma_jump` and are exponential with rate `beta_i`
//! with probability `p_i`. The Laplace exponent is rational, so every root of
//! `psi(s) = q` is real and simple.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One exponential phase of the downward jump distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub p: f64,
    pub beta: f64,
}

/// Model parameters in canonical form (phases sorted by `beta` descending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HejdParams {
    pub mu: f64,
    pub sigma: f64,
    pub gamma_jump: f64,
    pub phases: Vec<Phase>,
}

/// Roots of `psi(s) = q`: the positive root and the magnitudes of the negative ones.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub q: f64,
    pub phi_q: f64,
    /// `xi_i > 0` with `psi(-xi_i) = q`, increasing.
    pub neg_roots: Vec<f64>,
}

impl RootSet {
    /// All roots as signed rates: `Phi(q)` first, then `-xi_1, -xi_2, ...`.
    pub fn rates(&self) -> Vec<f64> {
        std::iter::once(self.phi_q).chain(self.neg_roots.iter().map(|x| -x)).collect()
    }
}

impl HejdParams {
    /// Validates and canonicalises a model. Phases with equal `beta` are merged.
    pub fn new(mu: f64, sigma: f64, gamma_jump: f64, phases: Vec<Phase>) -> Result<Self> {
        if !mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", "must be positive; bounded-variation models are not supported"));
        }
        if !(gamma_jump >= 0.0 && gamma_jump.is_finite()) {
            return Err(invalid("gamma", "must be a finite non-negative intensity"));
        }
        let mut merged: Vec<Phase> = Vec::new();
        if gamma_jump > 0.0 {
            if phases.is_empty() {
                return Err(invalid("phases", "at least one phase is required when gamma > 0"));
            }
            for ph in &phases {
                if !(ph.beta > 0.0 && ph.beta.is_finite()) {
                    return Err(invalid("phases.beta", format!("rate {} must be positive", ph.beta)));
                }
                if !(ph.p > 0.0 && ph.p <= 1.0) {
                    return Err(invalid("phases.p", format!("weight {} must lie in (0, 1]", ph.p)));
                }
                if let Some(m) = merged.iter_mut().find(|m| m.beta == ph.beta) {
                    log::warn!("merging phases with coincident rate beta = {}", ph.beta);
                    m.p += ph.p;
                } else {
                    merged.push(*ph);
                }
            }
            let total: f64 = merged.iter().map(|ph| ph.p).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(invalid("phases.p", format!("weights sum to {total}, expected 1")));
            }
            merged.sort_by(|a, b| b.beta.total_cmp(&a.beta));
        }
        Ok(Self { mu, sigma, gamma_jump, phases: merged })
    }

    /// Brownian motion with drift: sigma = 0.2, mu = -0.015.
    pub fn case_a() -> Self {
        Self::new(-0.015, 0.2, 0.0, Vec::new()).expect("valid built-in model")
    }

    /// Jump diffusion: sigma = 0.2, mu = 0.055, gamma = 0.5, p = (0.9, 0.1), beta = (9, 1).
    pub fn case_b() -> Self {
        let phases = vec![Phase { p: 0.9, beta: 9.0 }, Phase { p: 0.1, beta: 1.0 }];
        Self::new(0.055, 0.2, 0.5, phases).expect("valid built-in model")
    }

    fn active_phases(&self) -> &[Phase] {
        if self.gamma_jump > 0.0 {
            &self.phases
        } else {
            &[]
        }
    }

    /// Smallest jump rate, i.e. the pole of `psi` closest to the origin.
    pub fn min_beta(&self) -> Option<f64> {
        self.active_phases().last().map(|ph| ph.beta)
    }

    fn check_pole(&self, s: f64) -> Result<()> {
        if self.active_phases().iter().any(|ph| ph.beta + s == 0.0) {
            return Err(Error::Domain(format!("psi has a pole at s = {s}")));
        }
        Ok(())
    }

    /// Laplace exponent `psi(s) = log E exp(s X_1)`.
    pub fn psi(&self, s: f64) -> Result<f64> {
        self.check_pole(s)?;
        Ok(self.psi_raw(s))
    }

    /// Derivative `psi'(s)`.
    pub fn psi_prime(&self, s: f64) -> Result<f64> {
        self.check_pole(s)?;
        Ok(self.psi_prime_raw(s))
    }

    pub(crate) fn psi_raw(&self, s: f64) -> f64 {
        let jumps: f64 = self.active_phases().iter().map(|ph| ph.p * (ph.beta / (ph.beta + s) - 1.0)).sum();
        self.mu * s + 0.5 * self.sigma * self.sigma * s * s + self.gamma_jump * jumps
    }

    pub(crate) fn psi_prime_raw(&self, s: f64) -> f64 {
        let jumps: f64 = self
            .active_phases()
            .iter()
            .map(|ph| ph.p * ph.beta / ((ph.beta + s) * (ph.beta + s)))
            .sum();
        self.mu + self.sigma * self.sigma * s - self.gamma_jump * jumps
    }

    /// First divided difference `(psi(a) - psi(b)) / (a - b)`, exact at `a == b`.
    pub fn divided_diff(&self, a: f64, b: f64) -> f64 {
        let jumps: f64 = self
            .active_phases()
            .iter()
            .map(|ph| ph.p * ph.beta / ((ph.beta + a) * (ph.beta + b)))
            .sum();
        self.mu + 0.5 * self.sigma * self.sigma * (a + b) - self.gamma_jump * jumps
    }

    /// Second divided difference of `psi` on the nodes `a, b, c`.
    pub fn divided_diff2(&self, a: f64, b: f64, c: f64) -> f64 {
        let jumps: f64 = self
            .active_phases()
            .iter()
            .map(|ph| ph.p * ph.beta / ((ph.beta + a) * (ph.beta + b) * (ph.beta + c)))
            .sum();
        0.5 * self.sigma * self.sigma + self.gamma_jump * jumps
    }

    /// Right inverse `Phi(q)`: the largest root of `psi(s) = q`.
    pub fn phi(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("{q} must be finite and non-negative")));
        }
        let f = |s: f64| self.psi_raw(s) - q;
        let lo = if q > 0.0 {
            0.0
        } else {
            if self.psi_prime_raw(0.0) >= 0.0 {
                return Ok(0.0);
            }
            // minimiser of psi on the positive axis
            let mut hi = 1.0;
            while self.psi_prime_raw(hi) < 0.0 {
                hi *= 2.0;
            }
            bisect_sign(|s| self.psi_prime_raw(s), 0.0, hi)
        };
        let mut hi = lo.max(1.0);
        while f(hi) <= 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Consistency(format!("no upper bracket for Phi({q})")));
            }
        }
        let root = bisect_sign(f, lo, hi);
        Ok(newton_polish(f, |s| self.psi_prime_raw(s), root, lo, hi))
    }

    /// `Phi(q)` and the magnitudes of all negative roots of `psi(s) = q`.
    pub fn all_roots(&self, q: f64) -> Result<RootSet> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("{q} must be finite and positive")));
        }
        let phi_q = self.phi(q)?;
        let f = |s: f64| self.psi_raw(s) - q;
        let fp = |s: f64| self.psi_prime_raw(s);
        // Interval edges 0 > -beta_min > ... > -beta_max; f is positive just
        // right of each pole, negative just left of it and at 0.
        let mut edges = vec![0.0];
        edges.extend(self.active_phases().iter().rev().map(|ph| -ph.beta));
        let mut neg_roots = Vec::with_capacity(edges.len());
        for (i, &right) in edges.iter().enumerate() {
            let left = match edges.get(i + 1) {
                Some(&l) => l,
                None => {
                    let mut l = right - 1.0;
                    while f(l) <= 0.0 {
                        l = right + 2.0 * (l - right);
                        if !l.is_finite() {
                            return Err(Error::Consistency(format!("no lower bracket for psi = {q}")));
                        }
                    }
                    l
                }
            };
            // sign convention: f(left+) > 0 > f(right-)
            let s = bisect_sign(|s| -f(s), left, right);
            let s = newton_polish(f, fp, s, left, right);
            if !(s < right && s > left) {
                return Err(Error::Consistency(format!("negative root {s} escaped ({left}, {right})")));
            }
            neg_roots.push(-s);
        }
        let set = RootSet { q, phi_q, neg_roots };
        let tol = 1e-10 * q.max(1.0);
        for s in set.rates() {
            let res = (self.psi_raw(s) - q).abs();
            // residuals are measured relative to the local slope scale near poles
            if res > tol && res > 1e-13 * self.psi_prime_raw(s).abs().max(1.0) * s.abs().max(1.0) {
                return Err(Error::Consistency(format!("root {s} of psi = {q} has residual {res:e}")));
            }
        }
        Ok(set)
    }

    /// Returns the model with `mu` chosen so that `psi(1) = r - delta`.
    pub fn calibrate_drift(&self, r: f64, delta: f64) -> Result<Self> {
        if !(r > delta && delta >= 0.0) {
            return Err(invalid("delta", format!("need r > delta >= 0, got r = {r}, delta = {delta}")));
        }
        let mut out = self.clone();
        out.mu = 0.0;
        out.mu = (r - delta) - out.psi_raw(1.0);
        Ok(out)
    }
}

/// Bisection for `g` with `g(lo) < 0 < g(hi)`. Only interior points are evaluated.
fn bisect_sign<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v < 0.0 {
            lo = mid;
        } else if v > 0.0 {
            hi = mid;
        } else {
            return mid;
        }
        if hi - lo <= 1e-15 * mid.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// A few safeguarded Newton steps; a step is kept only if it reduces the residual.
fn newton_polish<F: Fn(f64) -> f64, D: Fn(f64) -> f64>(f: F, fp: D, mut x: f64, lo: f64, hi: f64) -> f64 {
    let mut fx = f(x);
    for _ in 0..4 {
        let d = fp(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let y = x - fx / d;
        if !(y > lo && y < hi) {
            break;
        }
        let fy = f(y);
        if fy.abs() >= fx.abs() {
            break;
        }
        x = y;
        fx = fy;
    }
    x
}
