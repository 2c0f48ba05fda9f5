//! Privatization mechanisms: Laplace input perturbation (LDP), noisy
//! nearest-word substitution (MDP), and an empirical check of the ε-DP bound.

mod dp_check;
mod index;
mod ldp;
mod mdp;
mod vocab;

pub use dp_check::{dp_empirical_check, laplace_mechanism, DpCheck};
pub use index::{nearest_exhaustive, PivotIndex};
pub use ldp::{ldp_perturb, ldp_perturb_normalized};
pub use mdp::{mdp_noise, mdp_privatize_sequence, nearest_word, MdpOutcome, MdpSwapper};
pub use vocab::Vocabulary;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Privacy budget and sensitivity. Noise scale is `sensitivity / epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    /// Δf. Stays at 1 for inputs passed through min-max normalization.
    pub sensitivity: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        Self::with_sensitivity(epsilon, 1.0)
    }

    pub fn with_sensitivity(epsilon: f64, sensitivity: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            sensitivity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.epsilon.is_nan() {
            return Err(Error::param("epsilon", format!("must be > 0, got {}", self.epsilon)));
        }
        if !(self.sensitivity > 0.0 && self.sensitivity.is_finite()) {
            return Err(Error::param(
                "sensitivity",
                format!("must be positive and finite, got {}", self.sensitivity),
            ));
        }
        Ok(())
    }

    pub fn laplace_scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }
}
