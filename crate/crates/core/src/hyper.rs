use serde::{Deserialize, Serialize};

use crate::error::{BdtError, Result};

/// Probabilities of proposing each move type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs {
    pub birth: f64,
    pub death: f64,
    pub change_split: f64,
    pub change_rule: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self { birth: 0.1, death: 0.1, change_split: 0.2, change_rule: 0.6 }
    }
}

impl MoveProbs {
    pub fn as_array(&self) -> [f64; 4] {
        [self.birth, self.death, self.change_split, self.change_rule]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.as_array();
        if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(BdtError::Config("move probabilities must be non-negative".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(BdtError::Config(format!("move probabilities sum to {sum}, not 1")));
        }
        if (self.birth > 0.0) != (self.death > 0.0) {
            return Err(BdtError::Config("birth and death probabilities must be both zero or both positive".into()));
        }
        Ok(())
    }
}

/// Prior over tree structures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorKind {
    /// Uniform over leaf counts, shapes, split features and split values.
    UniformLeaves,
    /// Depth-dependent splitting probability `gamma * (1 + depth)^-delta`.
    Chipman { gamma: f64, delta: f64 },
}

/// How split thresholds are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Uniform over the node's data range for births and change-split; Gaussian
    /// random walk for change-rule.
    #[default]
    Continuous,
    /// Only midpoints between consecutive distinct values of the node's data.
    /// Gives a finite parameter space that can be enumerated exactly.
    Midpoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub p_min: usize,
    pub move_probs: MoveProbs,
    /// Standard deviation of the change-rule proposal on the `[0, 1]` feature scale.
    pub proposal_std: f64,
    pub burn_in: usize,
    pub post_burn_in: usize,
    pub thin: usize,
    pub gamma0: f64,
    pub alpha: f64,
    pub prior: PriorKind,
    pub seed: u64,
    /// Optional cap on terminal nodes below the data-implied maximum `n - 1`.
    #[serde(default)]
    pub max_leaves: Option<usize>,
    #[serde(default)]
    pub threshold_mode: ThresholdMode,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            p_min: 15,
            move_probs: MoveProbs::default(),
            proposal_std: 0.3,
            burn_in: 100_000,
            post_burn_in: 10_000,
            thin: 7,
            gamma0: 0.99,
            alpha: 1.0,
            prior: PriorKind::UniformLeaves,
            seed: 0,
            max_leaves: None,
            threshold_mode: ThresholdMode::Continuous,
        }
    }
}

impl Hyperparameters {
    /// Checks everything that does not depend on the data.
    pub fn validate(&self, class_count: usize) -> Result<()> {
        self.move_probs.validate()?;
        if self.p_min < 1 {
            return Err(BdtError::Config("p_min must be at least 1".into()));
        }
        if !(self.proposal_std > 0.0 && self.proposal_std <= 1.0) {
            return Err(BdtError::Config(format!("proposal std {} outside (0, 1]", self.proposal_std)));
        }
        if self.thin < 1 {
            return Err(BdtError::Config("thin must be at least 1".into()));
        }
        if self.post_burn_in / self.thin < 2 {
            return Err(BdtError::Config(format!(
                "post burn-in {} with thin {} collects fewer than 2 trees",
                self.post_burn_in, self.thin
            )));
        }
        let floor = 1.0 / class_count as f64;
        if !(self.gamma0 >= floor - 1e-12 && self.gamma0 <= 1.0) {
            return Err(BdtError::Config(format!("gamma0 {} outside [1/C, 1] = [{floor}, 1]", self.gamma0)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(BdtError::Config("dirichlet alpha must be positive".into()));
        }
        if let PriorKind::Chipman { gamma, delta } = self.prior {
            if gamma.is_nan() || gamma <= 0.0 || delta.is_nan() || delta < 0.0 {
                return Err(BdtError::Config("chipman prior needs gamma > 0 and delta >= 0".into()));
            }
            // the root must be able to stay terminal
            if gamma >= 1.0 {
                return Err(BdtError::Config(format!(
                    "chipman gamma {gamma} gives splitting probability >= 1 at the root"
                )));
            }
        }
        if matches!(self.max_leaves, Some(0)) {
            return Err(BdtError::Config("max_leaves must be at least 1".into()));
        }
        Ok(())
    }

    pub fn ensemble_size(&self) -> usize {
        self.post_burn_in / self.thin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let h = Hyperparameters::default();
        h.validate(2).unwrap();
        assert_eq!(h.ensemble_size(), 10_000 / 7);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut h = Hyperparameters::default();
        h.move_probs.birth = 0.2;
        assert!(h.validate(2).is_err());
        let h = Hyperparameters { gamma0: 0.4, ..Default::default() };
        assert!(h.validate(2).is_err());
        let h = Hyperparameters { post_burn_in: 10, thin: 7, ..Default::default() };
        assert!(h.validate(2).is_err());
        let h = Hyperparameters { prior: PriorKind::Chipman { gamma: 1.0, delta: 0.0 }, ..Default::default() };
        assert!(h.validate(2).is_err());
        let h = Hyperparameters { proposal_std: 0.0, ..Default::default() };
        assert!(h.validate(2).is_err());
    }
}
