//! Bayesian averaging over binary decision trees.
//!
//! Trees are sampled from their posterior with a reversible-jump
//! Metropolis-Hastings chain (birth, death, change-split and change-rule
//! moves) that sweeps away candidates with undersized terminal nodes. The
//! collected ensemble gives averaged class probabilities, a vote-based
//! confidence measure (the uncertainty envelope) and posterior feature
//! weights, and a single interpretable tree can be extracted from it with the
//! "sure correct" procedure or the MAP / most-visited baselines.

pub mod data;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod hyper;
pub mod likelihood;
pub mod sampler;
pub mod selection;
pub mod tree;

pub use dataset::{Dataset, FeatureRange};
pub use ensemble::{
    Ensemble, EnsembleMeta, EnvelopeCounts, EnvelopeOutcome, EnvelopeReport, EnvelopeStatus, FeatureImportance, Vote,
};
pub use error::{BdtError, LoadError, Result};
pub use exec::Exec;
pub use hyper::{Hyperparameters, MoveProbs, PriorKind, ThresholdMode};
pub use likelihood::PriorConfig;
pub use sampler::{run_chain, ChainDiagnostics, ChainRun, MoveKind, Sampler};
pub use selection::{select_map, select_mapw, select_sc, SelectionMethod, SelectionReport};
pub use tree::{DecisionTree, Node, NodeId, SplitRule};
