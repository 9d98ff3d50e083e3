//! Covert communication over continuous-time AWGN channels.
//!
//! Alice hides randomly placed pulses inside the interference of an
//! uninformed jammer; the warden Willie observes the sum through an AWGN
//! channel. The crate provides
//!
//! - [`signals`]: unit-energy SRRC pulses, pulse-train synthesis and PSD estimation,
//! - [`scenario`]: trial generators for the known- and unknown-path-loss constructions
//!   and for the interference-cancellation experiment,
//! - [`detectors`]: the radiometer, the least-squares interference-cancellation
//!   detector and the genie-aided count statistics,
//! - [`analysis`]: exact mixture pmfs, likelihood ratios, error curves and the
//!   shifted-Poisson total variation distance,
//! - [`harness`]: deterministic parallel Monte Carlo (ROC curves, limit sweeps, persistence),
//! - [`cli`]: configuration schema and subcommands behind the `covert-ct` binary.

pub mod analysis;
pub mod cli;
pub mod detectors;
mod error;
pub mod exec;
pub mod harness;
pub mod scenario;
pub mod signals;

pub use error::{Error, Result};
pub use exec::{Execution, RunOptions};

use serde::{Deserialize, Serialize};

/// Willie's two hypotheses: H0 (Alice silent) and H1 (Alice transmits).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::H0, Hypothesis::H1];

    pub fn alice_transmits(self) -> bool {
        matches!(self, Hypothesis::H1)
    }
}

/// Prior probabilities `(P(H0), P(H1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub h0: f64,
    pub h1: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors { h0: 0.5, h1: 0.5 }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        error::ensure(
            self.h0 >= 0.0 && self.h1 >= 0.0 && ((self.h0 + self.h1) - 1.0).abs() < 1e-12,
            "priors",
            || format!("({}, {}) must be non-negative and sum to 1", self.h0, self.h1),
        )
    }

    /// LRT threshold `P(H0)/P(H1)`.
    pub fn lrt_threshold(&self) -> f64 {
        self.h0 / self.h1
    }
}
