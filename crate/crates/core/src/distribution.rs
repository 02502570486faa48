//! Categorical distributions over named options and the total variation distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that probabilities sum to one.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A normalized probability vector over an ordered list of distinct option names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    support: Vec<String>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::Data(format!(
                "support has {} entries but {} probabilities were given",
                support.len(),
                probs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::Data("empty support".into()));
        }
        for (i, s) in support.iter().enumerate() {
            if support[..i].contains(s) {
                return Err(Error::Data(format!("duplicate support entry `{s}`")));
            }
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Data(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Data(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { support, probs })
    }

    /// Normalizes nonnegative weights. Fails if every weight is zero.
    pub fn from_weights(support: Vec<String>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::Data("all weights are zero".into()));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Self::new(support, probs)
    }

    pub fn from_counts(support: Vec<String>, counts: &[u64]) -> Result<Self> {
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Self::from_weights(support, &weights)
    }

    pub fn point_mass(support: Vec<String>, index: usize) -> Result<Self> {
        let mut probs = vec![0.0; support.len()];
        *probs
            .get_mut(index)
            .ok_or_else(|| Error::Data(format!("point mass index {index} out of range")))? = 1.0;
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob_of(&self, option: &str) -> Option<f64> {
        self.support
            .iter()
            .position(|s| s == option)
            .map(|i| self.probs[i])
    }

    /// Mixture `w * self + (1 - w) * other` over a shared support.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        self.check_support(other)?;
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| w * p + (1.0 - w) * q)
            .collect();
        Ok(Self {
            support: self.support.clone(),
            probs,
        })
    }

    fn check_support(&self, other: &Self) -> Result<()> {
        if self.support != other.support {
            return Err(Error::SupportMismatch(format!(
                "{:?} vs {:?}",
                self.support, other.support
            )));
        }
        Ok(())
    }
}

/// Sum of per-category absolute differences, `Σ |p_i − q_i|`, before halving.
pub fn abs_gap(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    p.check_support(q)?;
    Ok(p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum())
}

/// Total variation distance `0.5 Σ |p_i − q_i|`. Supports must match exactly,
/// including order; distributions are never silently aligned.
pub fn tvd(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    Ok(0.5 * abs_gap(p, q)?)
}

/// Pooled TVD over several variables: half the sum of absolute gaps over every
/// category of every variable. Lies in `[0, pairs.len()]`.
pub fn pooled_tvd<'a, I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a DiscreteDistribution, &'a DiscreteDistribution)>,
{
    let mut total = 0.0;
    for (p, q) in pairs {
        total += abs_gap(p, q)?;
    }
    Ok(0.5 * total)
}
