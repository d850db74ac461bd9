//! Leland-Toft capital structure when the asset value is observed only at
//! Poisson epochs and follows a spectrally negative hyperexponential jump
//! diffusion.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fluctuation;
pub mod inversion;
pub mod levy_model;
pub mod mc_oracle;
pub mod scale_fn;
pub mod solve;
pub mod spreads;
pub mod two_stage;
pub mod valuation;

pub use error::{Error, Result};
pub use fluctuation::FluctuationContext;
pub use levy_model::{HejdParams, Phase, RootSet};
pub use scale_fn::{ExpMixture, ExpTerm, QScale, Support};
pub use valuation::{CapitalStructure, MarketParams, TaxCutoff};
