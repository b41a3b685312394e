//! Nonparametric estimation of the jump dependence of a bivariate Levy
//! process observed at unit time steps.
//!
//! The pipeline runs panel -> empirical characteristic function ->
//! fourth log-derivatives -> smoothed weighted jump density -> tail
//! integrals -> (Levy) copula.

// `!(x > 0.0)` is the NaN-rejecting test used throughout; index loops
// mirror the (k, l) derivative layout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod charfn;
pub mod copula;
pub mod error;
pub mod harness;
pub mod inversion;
pub mod levy_model;
pub mod logderiv;
pub mod quad;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};

use std::fmt;

/// Asymptotic regime: infinite activity with a Brownian part, or a compound
/// Poisson process with known intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    #[serde(alias = "levy")]
    General,
    Cpp,
}

impl Regime {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "general" | "levy" => Ok(Regime::General),
            "cpp" => Ok(Regime::Cpp),
            other => Err(Error::Parse(format!("unknown regime '{other}'"))),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::General => "general",
            Regime::Cpp => "cpp",
        })
    }
}
