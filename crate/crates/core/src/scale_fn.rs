//! Scale functions as finite exponential mixtures.
//!
//! With simple roots `s_k` of `psi(s) = q` the scale function is
//! `W(x) = sum_k c_k exp(s_k x)` with `c_k = 1 / psi'(s_k)`. Integrating the
//! mixture against `exp(-theta z)` and using the partial-fraction identity
//! `sum_k c_k / (theta - s_k) = 1 / (psi(theta) - q)` gives
//! `Z(x; theta) = sum_k c_k D(theta, s_k) exp(s_k x)` for `x >= 0`, where `D` is
//! the first divided difference of `psi`. That form has no removable
//! singularity at `theta = s_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_model::{HejdParams, RootSet};

/// `coeff * exp(rate * x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub coeff: f64,
    pub rate: f64,
}

/// Where the mixture is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    /// Zero for negative arguments (scale-function convention).
    HalfLine,
    FullLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpMixture {
    pub terms: Vec<ExpTerm>,
    pub support: Support,
}

/// `(exp(a x) - 1) / a`, equal to `x` at `a = 0`.
pub(crate) fn exprel(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        x
    } else {
        (a * x).exp_m1() / a
    }
}

impl ExpMixture {
    pub fn eval(&self, x: f64) -> f64 {
        if self.support == Support::HalfLine && x < 0.0 {
            return 0.0;
        }
        // factor out the dominant exponential so large x cannot overflow early
        let top = self.terms.iter().map(|t| t.rate * x).fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return 0.0;
        }
        let sum: f64 = self.terms.iter().map(|t| t.coeff * (t.rate * x - top).exp()).sum();
        sum * top.exp()
    }

    /// `int_0^x M(u) du`, zero for `x <= 0` under the half-line convention.
    pub fn integral(&self, x: f64) -> f64 {
        if self.support == Support::HalfLine && x <= 0.0 {
            return 0.0;
        }
        self.terms.iter().map(|t| t.coeff * exprel(t.rate, x)).sum()
    }

    /// `int_0^x self(x - z) other(z) dz` evaluated term by term.
    pub fn convolve(&self, other: &ExpMixture, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for a in &self.terms {
            for b in &other.terms {
                // int_0^x e^{a(x-z)} e^{bz} dz = e^{ax} (e^{(b-a)x} - 1)/(b - a)
                acc += a.coeff * b.coeff * (a.rate * x).exp() * exprel(b.rate - a.rate, x);
            }
        }
        acc
    }

    /// `int_0^inf exp(-theta x) M(x) dx` for `theta` above every rate.
    pub fn laplace(&self, theta: f64) -> Result<f64> {
        if self.terms.iter().any(|t| theta <= t.rate) {
            return Err(Error::Domain(format!("Laplace transform diverges at theta = {theta}")));
        }
        Ok(self.terms.iter().map(|t| t.coeff / (theta - t.rate)).sum())
    }
}

/// Roots and residues of the `q`-scale function.
#[derive(Debug, Clone, PartialEq)]
pub struct QScale {
    pub roots: RootSet,
    /// `Phi(q)` first, then the negative roots.
    pub rates: Vec<f64>,
    /// `1 / psi'(s_k)`.
    pub coeffs: Vec<f64>,
}

impl QScale {
    pub fn new(model: &HejdParams, q: f64) -> Result<Self> {
        let roots = model.all_roots(q)?;
        let rates = roots.rates();
        let mut coeffs = Vec::with_capacity(rates.len());
        for &s in &rates {
            let d = model.psi_prime_raw(s);
            if d.abs() < 1e-300 || !d.is_finite() {
                return Err(Error::UnsupportedModel(format!("root {s} of psi = {q} is not simple")));
            }
            coeffs.push(1.0 / d);
        }
        Ok(Self { roots, rates, coeffs })
    }

    pub fn q(&self) -> f64 {
        self.roots.q
    }

    pub fn phi(&self) -> f64 {
        self.rates[0]
    }

    /// `(c_k, s_k)` over the negative roots only.
    pub fn negative(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coeffs[1..].iter().copied().zip(self.rates[1..].iter().copied())
    }

    /// `(c_k, s_k)` over all roots.
    pub fn all(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coeffs.iter().copied().zip(self.rates.iter().copied())
    }

    pub fn mixture(&self) -> ExpMixture {
        ExpMixture {
            terms: self.all().map(|(coeff, rate)| ExpTerm { coeff, rate }).collect(),
            support: Support::HalfLine,
        }
    }

    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.all().map(|(c, s)| c * (s * x).exp()).sum()
    }

    pub fn w_bar(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.all().map(|(c, s)| c * exprel(s, x)).sum()
    }

    /// `Z(x; theta)`; `theta` must avoid the poles of `psi`.
    pub fn z(&self, model: &HejdParams, theta: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return (theta * x).exp();
        }
        self.all().map(|(c, s)| c * model.divided_diff(theta, s) * (s * x).exp()).sum()
    }

    /// `Z(x; Phi(q + lambda))` with `q - psi(Phi(q + lambda)) = -lambda` used exactly.
    pub fn z_phi_lambda(&self, lambda: f64, phi_lambda: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return (phi_lambda * x).exp();
        }
        self.all().map(|(c, s)| c * lambda / (phi_lambda - s) * (s * x).exp()).sum()
    }
}

/// The `q`-scale function `W^(q)` as a mixture.
pub fn w_scale(model: &HejdParams, q: f64) -> Result<ExpMixture> {
    Ok(QScale::new(model, q)?.mixture())
}

/// `W-bar(x) = int_0^x W(u) du` for a scale-function mixture.
pub fn w_bar(mix: &ExpMixture, x: f64) -> f64 {
    mix.integral(x)
}

/// Second scale function `Z^(q)(x; theta)`.
pub fn z_theta(model: &HejdParams, q: f64, theta: f64, x: f64) -> Result<f64> {
    if theta < 0.0 {
        return Err(Error::Domain(format!("theta = {theta} must be non-negative")));
    }
    Ok(QScale::new(model, q)?.z(model, theta, x))
}

/// `Z^(q)(x; Phi(q + lambda))`.
pub fn z_phi_lambda(model: &HejdParams, q: f64, lambda: f64, x: f64) -> Result<f64> {
    let phi_lambda = model.phi(q + lambda)?;
    Ok(QScale::new(model, q)?.z_phi_lambda(lambda, phi_lambda, x))
}
