use rand::{Rng, SeedableRng};

use super::diagnostics::{ChainDiagnostics, Phase, StepRecord};
use super::moves::node_midpoints;
use super::sweep::{sweep, SweepStatus};
use super::{ChainRng, MoveKind};
use crate::dataset::Dataset;
use crate::ensemble::Ensemble;
use crate::error::{BdtError, Result};
use crate::exec::Exec;
use crate::hyper::{Hyperparameters, ThresholdMode};
use crate::likelihood::{prior_with_spans, tree_log_marginal, DistinctCounter, PriorConfig};
use crate::tree::{DecisionTree, Spans};

/// Current tree of a chain with its cached row routing and scores.
#[derive(Debug, Clone)]
pub struct ChainState {
    tree: DecisionTree,
    log_lik: f64,
    log_prior: f64,
    iteration: u64,
    spans: Spans,
}

impl ChainState {
    pub fn tree(&self) -> &DecisionTree {
        &self.tree
    }

    pub fn log_lik(&self) -> f64 {
        self.log_lik
    }

    pub fn log_prior(&self) -> f64 {
        self.log_prior
    }

    pub fn log_posterior(&self) -> f64 {
        self.log_lik + self.log_prior
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn spans(&self) -> &Spans {
        &self.spans
    }

    pub fn into_tree(self) -> DecisionTree {
        self.tree
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// The drawn move had nothing to act on.
    Unavailable,
    /// The candidate had two or more undersized terminals.
    SweepRejected,
    /// A threshold fell outside the allowed candidate set (midpoint mode).
    OutOfSupport,
    /// The swept candidate was the current tree.
    Unchanged,
    Rejected,
    Accepted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
    pub swept: bool,
    pub status: StepStatus,
}

/// Everything a chain needs besides its state and generator.
#[derive(Debug)]
pub struct Sampler<'a> {
    data: &'a Dataset,
    hyper: Hyperparameters,
    prior: PriorConfig,
    max_leaves: usize,
    counter: DistinctCounter,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a Dataset, hyper: &Hyperparameters) -> Result<Self> {
        hyper.validate(data.class_count())?;
        if hyper.p_min > data.n_rows() {
            return Err(BdtError::Config(format!("p_min {} exceeds the {} training rows", hyper.p_min, data.n_rows())));
        }
        let prior = PriorConfig::for_data(hyper.prior, data);
        let max_leaves = hyper.max_leaves.map_or(prior.max_leaves, |cap| cap.min(prior.max_leaves));
        Ok(Self { data, hyper: hyper.clone(), prior, max_leaves, counter: DistinctCounter::default() })
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn prior(&self) -> &PriorConfig {
        &self.prior
    }

    /// Effective cap on terminal nodes.
    pub fn max_leaves(&self) -> usize {
        self.max_leaves
    }

    pub(crate) fn counter(&mut self) -> &mut DistinctCounter {
        &mut self.counter
    }

    /// The single-terminal tree holding all rows.
    pub fn initial_state(&mut self) -> Result<ChainState> {
        self.state_for(DecisionTree::leaf(self.data.class_count()))
    }

    /// Fits `tree` to the training data and scores it.
    pub fn state_for(&mut self, tree: DecisionTree) -> Result<ChainState> {
        let spans = tree.spans(self.data)?;
        let tree = tree.refit_with(self.data, &spans, self.hyper.p_min).tree;
        let log_lik = tree_log_marginal(&tree, self.hyper.alpha);
        let log_prior = prior_with_spans(&tree, &spans, &self.prior, self.data, &mut self.counter)?;
        Ok(ChainState { tree, log_lik, log_prior, iteration: 0, spans })
    }

    fn within_support(&self, tree: &DecisionTree, spans: &Spans) -> bool {
        match self.hyper.threshold_mode {
            ThresholdMode::Continuous => true,
            ThresholdMode::Midpoints => tree.internals().all(|id| {
                let rule = tree.rule(id).unwrap();
                node_midpoints(self.data, spans.rows(id), rule.feature).contains(&rule.threshold)
            }),
        }
    }

    /// One reversible-jump Metropolis-Hastings step.
    pub fn mh_step<R: Rng + ?Sized>(&mut self, mut state: ChainState, rng: &mut R) -> (ChainState, StepOutcome) {
        state.iteration += 1;
        let kind = MoveKind::select(self.hyper.move_probs.as_array(), rng.random());
        let reject = |status, swept| StepOutcome { kind, accepted: false, swept, status };

        let Some(proposal) = self.propose(kind, &state, rng) else {
            return (state, reject(StepStatus::Unavailable, false));
        };
        let mut spans = Spans { order: Vec::new(), spans: Vec::new() };
        proposal.tree.fill_spans(self.data, &mut spans.order, &mut spans.spans);
        let refit = proposal.tree.refit_with(self.data, &spans, self.hyper.p_min);
        // checked before sweeping: in midpoint mode a candidate whose moved
        // ancestor empties a descendant is outside the support, not a sweep
        if !self.within_support(&refit.tree, &spans) {
            return (state, reject(StepStatus::OutOfSupport, false));
        }
        let swept = match sweep(&refit.tree, self.hyper.p_min) {
            Ok(s) => s,
            Err(_) => return (state, reject(StepStatus::SweepRejected, false)),
        };
        let candidate = match swept.status {
            SweepStatus::Clean => refit.tree,
            SweepStatus::Reject => return (state, reject(StepStatus::SweepRejected, false)),
            SweepStatus::Swept => {
                swept.tree.fill_spans(self.data, &mut spans.order, &mut spans.spans);
                swept.tree
            }
        };
        let was_swept = swept.status == SweepStatus::Swept;
        if candidate == state.tree {
            return (state, reject(StepStatus::Unchanged, was_swept));
        }

        let log_lik = tree_log_marginal(&candidate, self.hyper.alpha);
        let log_prior = match prior_with_spans(&candidate, &spans, &self.prior, self.data, &mut self.counter) {
            Ok(p) => p,
            Err(_) => return (state, reject(StepStatus::Rejected, was_swept)),
        };
        let log_accept = (log_lik - state.log_lik) + (log_prior - state.log_prior) + proposal.log_ratio;
        let accepted = log_accept >= 0.0 || rng.random::<f64>().ln() < log_accept;
        if !accepted {
            return (state, reject(StepStatus::Rejected, was_swept));
        }
        let next = ChainState { tree: candidate, log_lik, log_prior, iteration: state.iteration, spans };
        (next, StepOutcome { kind, accepted: true, swept: was_swept, status: StepStatus::Accepted })
    }
}

/// Trees collected after burn-in plus the full trace.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub ensemble: Ensemble,
    pub diagnostics: ChainDiagnostics,
    pub final_state: ChainState,
}

/// Runs a chain seeded from `hyper.seed`.
pub fn run_chain(data: &Dataset, hyper: &Hyperparameters) -> Result<ChainRun> {
    run_chain_with_rng(data, hyper, &mut ChainRng::seed_from_u64(hyper.seed))
}

pub fn run_chain_with_rng<R: Rng + ?Sized>(data: &Dataset, hyper: &Hyperparameters, rng: &mut R) -> Result<ChainRun> {
    let mut sampler = Sampler::new(data, hyper)?;
    let mut state = sampler.initial_state()?;
    let mut diagnostics = ChainDiagnostics::default();
    let mut trees = Vec::with_capacity(hyper.ensemble_size());
    let total = hyper.burn_in + hyper.post_burn_in;
    diagnostics.records.reserve(total);
    for i in 0..total {
        let phase = if i < hyper.burn_in { Phase::BurnIn } else { Phase::PostBurnIn };
        let (next, outcome) = sampler.mh_step(state, rng);
        state = next;
        if outcome.swept {
            diagnostics.sweep_count += 1;
        }
        if outcome.status == StepStatus::SweepRejected {
            diagnostics.resample_count += 1;
        }
        diagnostics.record(StepRecord {
            phase,
            iteration: i as u64,
            log_lik: state.log_lik,
            leaves: state.tree.leaf_count() as u32,
            kind: outcome.kind,
            accepted: outcome.accepted,
        });
        if phase == Phase::PostBurnIn && (i + 1 - hyper.burn_in).is_multiple_of(hyper.thin) {
            trees.push(state.tree.clone());
        }
    }
    let ensemble = Ensemble::from_chain(trees, data, hyper)?;
    Ok(ChainRun { ensemble, diagnostics, final_state: state })
}

/// Independent chains, one per seed; each owns its generator.
pub fn run_chains(data: &Dataset, hyper: &Hyperparameters, seeds: &[u64], exec: Exec) -> Result<Vec<ChainRun>> {
    exec.map_slice(seeds, |&seed| run_chain(data, &Hyperparameters { seed, ..hyper.clone() })).into_iter().collect()
}
