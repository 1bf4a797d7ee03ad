//! Reversible-jump Metropolis-Hastings over decision trees.
//!
//! One step draws a move type, builds a candidate tree, refits it, applies
//! the sweep (collapse a single undersized terminal, reject on two or more)
//! and accepts with probability
//! `min(1, L'/L * p'/p * q(old | new) / q(new | old))`.

mod chain;
mod diagnostics;
mod moves;
mod sweep;

use serde::{Deserialize, Serialize};

pub use chain::{run_chain, run_chain_with_rng, run_chains, ChainRun, ChainState, Sampler, StepOutcome, StepStatus};
pub use diagnostics::{ChainDiagnostics, MoveCounters, Phase, StepRecord};
pub use moves::{log_birth_ratio, log_death_ratio, node_midpoints, Proposal};
pub use sweep::{sweep, SweepOutcome, SweepStatus};

/// Seeded generator used by every chain: ChaCha with 8 rounds.
pub type ChainRng = rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    Birth,
    Death,
    ChangeSplit,
    ChangeRule,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [MoveKind::Birth, MoveKind::Death, MoveKind::ChangeSplit, MoveKind::ChangeRule];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Birth => "birth",
            MoveKind::Death => "death",
            MoveKind::ChangeSplit => "change-split",
            MoveKind::ChangeRule => "change-rule",
        }
    }

    /// Inverse-CDF draw from the four move probabilities given `u` in `[0, 1)`.
    pub fn select(probs: [f64; 4], u: f64) -> MoveKind {
        let mut acc = 0.0;
        for (kind, p) in Self::ALL.into_iter().zip(probs) {
            acc += p;
            if u < acc {
                return kind;
            }
        }
        // rounding in the cumulative sum: fall back to the last move with mass
        Self::ALL.into_iter().zip(probs).rev().find(|(_, p)| *p > 0.0).map_or(MoveKind::ChangeRule, |(k, _)| k)
    }
}

impl std::fmt::Display for MoveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
