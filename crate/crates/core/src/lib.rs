//! Two-arm experiments over persona-seeded simulated respondents.
//!
//! A respondent (a discrete structural causal model, an OpenAI-style chat
//! endpoint, or a replay store) is shown one of two interventions and asked an
//! outcome question, negative-control questions and confounder questions, each
//! on its own branch. Arm differences in the negative controls measure how far
//! the simulated population drifted with the intervention; eliciting
//! confounders and fixing one sampled answer set into each persona shrinks
//! that drift over iterations.
//!
//! ```
//! use userdrift::scm::{Assignment, RespondentMode, Scm};
//!
//! let scm = Scm::toy_drift_v1();
//! let persona: Assignment = [("sex".to_string(), "female".to_string())].into();
//! let est = scm
//!     .exact_estimands(&persona, &Assignment::new(), RespondentMode::Abductive)
//!     .unwrap();
//! assert!((est.tau_obs - 0.38).abs() < 1e-12);
//! assert!((est.sb - 0.18).abs() < 1e-12);
//! ```

use serde::{Deserialize, Serialize};

pub mod adjust;
pub mod assets;
pub mod distribution;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod population;
pub mod respondent;
pub mod scm;

pub use distribution::{pooled_tvd, tvd, DiscreteDistribution};
pub use error::{Error, Result};

/// Intervention arm. Serialized as `0` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treatment];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treatment,
            Arm::Treatment => Arm::Control,
        }
    }
}

impl From<Arm> for u8 {
    fn from(a: Arm) -> u8 {
        a.index() as u8
    }
}

impl TryFrom<u8> for Arm {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Arm::Control),
            1 => Ok(Arm::Treatment),
            _ => Err(format!("arm must be 0 or 1, got {v}")),
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Independent 64-bit seed for a labelled sub-stream of a master seed.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
