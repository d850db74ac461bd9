//! Exit identities for the process killed at the first Poisson observation
//! below zero, and their classical (continuous observation) counterparts.
//!
//! All positions are measured relative to the barrier. Every formula is
//! written with the `exp(Phi(q) x)` and `exp(Phi(q + lambda) x)` terms removed
//! where they cancel, so evaluations at large `q` never subtract large numbers.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{invalid, Result};
use crate::levy_model::HejdParams;
use crate::scale_fn::{exprel, QScale};

/// Model plus an append-only cache of root sets keyed by discount rate.
#[derive(Debug)]
pub struct FluctuationContext {
    model: HejdParams,
    cache: RwLock<HashMap<u64, Arc<QScale>>>,
}

impl Clone for FluctuationContext {
    fn clone(&self) -> Self {
        let cache = self.cache.read().map(|c| c.clone()).unwrap_or_default();
        Self { model: self.model.clone(), cache: RwLock::new(cache) }
    }
}

/// `(exp(a y) - exp(b y)) / (b - a)`, stable when `a` and `b` are close.
fn exp_slope(a: f64, b: f64, y: f64) -> f64 {
    let d = b - a;
    if d == 0.0 {
        -y * (a * y).exp()
    } else {
        -(a * y).exp() * (d * y).exp_m1() / d
    }
}

impl FluctuationContext {
    pub fn new(model: HejdParams) -> Self {
        Self { model, cache: RwLock::new(HashMap::new()) }
    }

    pub fn model(&self) -> &HejdParams {
        &self.model
    }

    /// Number of cached discount rates.
    pub fn cached_rates(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    /// Roots and residues for discount rate `q > 0`, computed once.
    pub fn scale(&self, q: f64) -> Result<Arc<QScale>> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("discount rate {q} must be finite and positive")));
        }
        let key = q.to_bits();
        if let Some(s) = self.cache.read().ok().and_then(|c| c.get(&key).cloned()) {
            return Ok(s);
        }
        let fresh = Arc::new(QScale::new(&self.model, q)?);
        let mut guard = self.cache.write().unwrap_or_else(|e| e.into_inner());
        Ok(guard.entry(key).or_insert(fresh).clone())
    }

    pub fn phi(&self, q: f64) -> Result<f64> {
        if q == 0.0 {
            return self.model.phi(0.0);
        }
        Ok(self.scale(q)?.phi())
    }

    /// Coefficients of `H(y; theta)` on `y >= 0` over the negative roots.
    fn h_coeffs<'a>(&'a self, s: &'a QScale, theta: f64) -> impl Iterator<Item = (f64, f64)> + 'a {
        let phi = s.phi();
        let d = self.model.divided_diff(theta, phi);
        s.negative().map(move |(c, sk)| (c * (sk - phi) * d / (theta - sk), sk))
    }

    /// `H^(q)(y; theta) = E_y[exp(-q tau + theta X_tau)]`, `tau` the first passage below 0.
    pub fn h(&self, q: f64, y: f64, theta: f64) -> Result<f64> {
        if y < 0.0 {
            return Ok((theta * y).exp());
        }
        let s = self.scale(q)?;
        Ok(self.h_coeffs(&s, theta).map(|(h, sk)| h * (sk * y).exp()).sum())
    }

    /// Discounted probability of creeping: `E_y[exp(-q tau); X_tau = 0]`.
    pub fn h_creeping_atom(&self, q: f64, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Ok(0.0);
        }
        let s = self.scale(q)?;
        let phi = s.phi();
        let half_var = 0.5 * self.model.sigma * self.model.sigma;
        Ok(s.negative().map(|(c, sk)| c * (sk - phi) * half_var * (sk * y).exp()).sum())
    }

    /// `J^(q)(y; theta) = E_y[exp(-q T + theta X_T)]`, `T` the first observation below 0.
    pub fn j(&self, q: f64, lambda: f64, y: f64, theta: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(invalid("lambda", format!("observation rate {lambda} must be positive")));
        }
        if lambda.is_infinite() {
            return self.h(q, y, theta);
        }
        let s = self.scale(q)?;
        let phi = s.phi();
        let pl = self.phi(q + lambda)?;
        let m = &self.model;
        if y < 0.0 {
            let pre = (pl - phi) / m.divided_diff(pl, theta);
            let body = m.divided_diff(pl, phi) * exp_slope(theta, pl, y)
                + m.divided_diff2(pl, theta, phi) * (pl * y).exp();
            return Ok(pre * body);
        }
        let dl = m.divided_diff(theta, pl);
        Ok(self
            .h_coeffs(&s, theta)
            .map(|(h, sk)| h * lambda / (dl * (pl - sk)) * (sk * y).exp())
            .sum())
    }

    /// Kernel `I^(q, lambda)(x, w)`.
    pub fn i_kernel(&self, q: f64, lambda: f64, x: f64, w: f64) -> Result<f64> {
        let s = self.scale(q)?;
        if w <= 0.0 {
            return Ok(s.w(x + w));
        }
        let sl = self.scale(q + lambda)?;
        let pl = sl.phi();
        if x >= 0.0 {
            let mut acc = 0.0;
            for (d, t) in sl.negative() {
                let inner: f64 = s
                    .all()
                    .map(|(c, sk)| c * lambda * (pl - t) / ((t - sk) * (pl - sk)) * (sk * x).exp())
                    .sum();
                acc += d * (t * w).exp() * inner;
            }
            return Ok(acc);
        }
        let above = x + w > 0.0;
        let mut acc = 0.0;
        for (d, t) in sl.negative() {
            let hit = if above { (t * (x + w)).exp() } else { 0.0 };
            acc += d * (hit - (pl * x + t * w).exp());
        }
        if !above {
            acc -= sl.coeffs[0] * (pl * (x + w)).exp();
        }
        Ok(acc)
    }

    /// `int_{-inf}^{a} H^(r + lambda)(y; Phi(r)) dy`.
    pub fn h_integral(&self, r: f64, lambda: f64, a: f64) -> Result<f64> {
        let phi = self.phi(r)?;
        if a <= 0.0 {
            return Ok((phi * a).exp() / phi);
        }
        let sl = self.scale(r + lambda)?;
        let tail: f64 = self.h_coeffs(&sl, phi).map(|(h, t)| h * exprel(t, a)).sum();
        Ok(1.0 / phi + tail)
    }

    /// Resolvent density `R^(q, lambda)(x, y)` of `X` killed at the first observation below 0.
    pub fn resolvent_density(&self, q: f64, lambda: f64, x: f64, y: f64) -> Result<f64> {
        let s = self.scale(q)?;
        let pl = self.phi(q + lambda)?;
        let zx = s.z_phi_lambda(lambda, pl, x);
        let h = self.h(q + lambda, -y, s.phi())?;
        Ok(zx * (pl - s.phi()) / lambda * h - self.i_kernel(q, lambda, x, -y)?)
    }

    /// Discounted occupation above `log_vt` before the first observation below `z`,
    /// started from `y`. `log_vt = -inf` encodes a zero tax cutoff.
    pub fn lambda(&self, r: f64, lambda: f64, y: f64, z: f64, log_vt: f64) -> Result<f64> {
        let x = y - z;
        if log_vt == f64::NEG_INFINITY {
            return Ok((1.0 - self.j(r, lambda, x, 0.0)?) / r);
        }
        if lambda.is_infinite() {
            return self.classical_lambda(r, x, z - log_vt);
        }
        let a = z - log_vt;
        let s = self.scale(r)?;
        let sl = self.scale(r + lambda)?;
        let (phi, pl) = (s.phi(), sl.phi());
        let zx = s.z_phi_lambda(lambda, pl, x);
        let first = zx * (pl - phi) / lambda * self.h_integral(r, lambda, a)?;
        let occupied = if a <= 0.0 {
            s.w_bar(x + a)
        } else if x >= 0.0 {
            let mut acc = 0.0;
            for (d, t) in sl.negative() {
                let inner: f64 = s
                    .all()
                    .map(|(c, sk)| c * lambda * (pl - t) / ((t - sk) * (pl - sk)) * (sk * x).exp())
                    .sum();
                acc += d / t * (t * a).exp() * inner;
            }
            acc + (zx + lambda * s.w_bar(x) - 1.0) / (r + lambda)
        } else {
            let above = x + a > 0.0;
            let mut acc = 0.0;
            for (d, t) in sl.negative() {
                let hit = if above { exprel(t, x + a) } else { 0.0 };
                acc += d * (hit - (pl * x).exp() * exprel(t, a));
            }
            let d0 = sl.coeffs[0];
            acc += if above {
                d0 * (pl * x).exp_m1() / pl
            } else {
                d0 * ((pl * x).exp() - (pl * (x + a)).exp()) / pl
            };
            acc
        };
        Ok(first - occupied)
    }

    /// Resolvent density of `X` killed at its first passage below 0 (continuous observation).
    pub fn classical_resolvent(&self, q: f64, x: f64, y: f64) -> Result<f64> {
        if x < 0.0 || y < 0.0 {
            return Ok(0.0);
        }
        let s = self.scale(q)?;
        let phi = s.phi();
        // exp(-Phi y) W(x) - W(x - y) with the Phi term cancelled for y <= x
        let value = if y <= x {
            s.negative().map(|(c, sk)| c * ((sk * x - phi * y).exp() - (sk * (x - y)).exp())).sum()
        } else {
            (-phi * y).exp() * s.w(x)
        };
        Ok(value)
    }

    /// Classical tax functional `int_{max(-a, 0)}^inf (exp(-Phi u) W(x) - W(x - u)) du`.
    pub fn classical_lambda(&self, r: f64, x: f64, a: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        let s = self.scale(r)?;
        let phi = s.phi();
        let b = (-a).max(0.0);
        if x < b {
            return Ok((-phi * b).exp() * s.w(x) / phi);
        }
        let tail: f64 = s
            .negative()
            .map(|(c, sk)| c * ((sk * x - phi * b).exp() / phi - exprel(sk, x - b)))
            .sum();
        Ok(s.coeffs[0] / phi + tail)
    }

    /// `E[int_0^inf exp(-r t) 1{X_t >= log V_T} dt]` for the unkilled process, `u = log V - log V_T`.
    pub fn free_occupation(&self, r: f64, u: f64) -> Result<f64> {
        if u == f64::INFINITY {
            return Ok(1.0 / r);
        }
        let s = self.scale(r)?;
        let phi = s.phi();
        if u < 0.0 {
            return Ok(s.coeffs[0] * (phi * u).exp() / phi);
        }
        Ok(s.coeffs[0] / phi - s.negative().map(|(c, sk)| c * exprel(sk, u)).sum::<f64>())
    }
}
