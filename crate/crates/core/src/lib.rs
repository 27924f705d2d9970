//! Minimal Lipschitz extensions of 1-fields.
//!
//! A 1-field assigns a value and a gradient to each point of a finite set in
//! R^n. This crate computes its Gamma^1 constant, the extremal extensions u+
//! and u- to all of R^n, the explicit piecewise-quadratic construction of
//! Wells for finite sets, Kirszbraun extensions of Lipschitz maps, and
//! sampling checks of the absolutely-minimal property.

pub mod error;
pub mod field;
pub mod gamma;
pub mod kirszbraun;
pub mod linalg;
pub mod supinf;
pub mod verification;
pub mod wells;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use field::{AffinePolynomial, JetSample, OneField};
pub use gamma::{gamma1, lip_df, pair_stats, PairStats};
pub use supinf::{certify_mle_point, extend_field, psi, u_extremal, Extender, ExtensionResult, SolveOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}
