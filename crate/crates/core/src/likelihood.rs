//! Integrated Dirichlet-multinomial leaf likelihood, tree-structure priors
//! and binary-tree shape counts.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dataset::Dataset;
use crate::error::{BdtError, Result};
use crate::hyper::PriorKind;
use crate::tree::{DecisionTree, Node, Spans};

/// Log marginal likelihood of one terminal node's counts under a symmetric
/// Dirichlet(`alpha`) prior on its class probabilities.
pub fn leaf_log_marginal(counts: &[u32], alpha: f64) -> f64 {
    let c = counts.len() as f64;
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let per_class: f64 = counts.iter().map(|&k| ln_gamma(k as f64 + alpha) - ln_gamma(alpha)).sum();
    ln_gamma(c * alpha) - ln_gamma(n as f64 + c * alpha) + per_class
}

/// Sum of [`leaf_log_marginal`] over the terminals of an already-fitted tree.
pub(crate) fn tree_log_marginal(tree: &DecisionTree, alpha: f64) -> f64 {
    tree.nodes()
        .iter()
        .filter_map(|n| match n {
            Node::Leaf { counts } => Some(leaf_log_marginal(counts, alpha)),
            _ => None,
        })
        .sum()
}

/// Log marginal likelihood of `data` under `tree`, which must already carry
/// the counts of `data` (see [`DecisionTree::refit`]).
pub fn log_marginal_likelihood(tree: &DecisionTree, data: &Dataset, alpha: f64) -> Result<f64> {
    let total: u64 = tree.leaves().map(|l| tree.counts(l).unwrap().iter().map(|&c| c as u64).sum::<u64>()).sum();
    if total != data.n_rows() as u64 || tree.class_count() != data.class_count() {
        return Err(BdtError::State(format!(
            "tree holds {total} counted rows, data has {}; refit first",
            data.n_rows()
        )));
    }
    Ok(tree_log_marginal(tree, alpha))
}

/// Prior over trees plus the maximal number of terminal nodes `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub kind: PriorKind,
    pub max_leaves: usize,
}

impl PriorConfig {
    /// `K = n - 1` for a training set of `n` rows.
    pub fn for_data(kind: PriorKind, data: &Dataset) -> Self {
        Self { kind, max_leaves: data.n_rows() - 1 }
    }

    /// Chipman splitting probability at `depth`, or `None` for the uniform prior.
    pub fn split_probability(&self, depth: usize) -> Option<f64> {
        match self.kind {
            PriorKind::UniformLeaves => None,
            PriorKind::Chipman { gamma, delta } => Some(gamma * (1.0 + depth as f64).powf(-delta)),
        }
    }
}

/// Scratch buffers for counting distinct values inside a node.
#[derive(Debug, Default)]
pub(crate) struct DistinctCounter {
    stamp: Vec<u32>,
    epoch: u32,
}

impl DistinctCounter {
    pub(crate) fn count(&mut self, data: &Dataset, rows: &[u32], feature: usize) -> usize {
        if self.stamp.len() < data.max_distinct() {
            self.stamp.resize(data.max_distinct(), 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let mut distinct = 0;
        for &r in rows {
            let rank = data.rank(r as usize, feature) as usize;
            if self.stamp[rank] != self.epoch {
                self.stamp[rank] = self.epoch;
                distinct += 1;
            }
        }
        distinct
    }

    /// Number of candidate thresholds (distinct values minus one) for `feature`
    /// among `rows`.
    pub(crate) fn candidates(&mut self, data: &Dataset, rows: &[u32], feature: usize) -> usize {
        self.count(data, rows, feature).saturating_sub(1)
    }
}

/// Log prior probability of the structure of `tree` over `data`.
///
/// Uniform-leaves:
/// `-sum_splits [ln N_i + ln m] - ln S_k - ln K`, where `N_i` is the number of
/// candidate thresholds of split `i`'s feature among the rows reaching it.
///
/// Chipman:
/// `sum_splits [ln P_s(d_i) - ln m - ln N_i] + sum_leaves ln(1 - P_s(d_j))`
/// with `P_s(d) = gamma (1 + d)^-delta`.
///
/// A split with no candidate thresholds makes the prior `-inf`.
pub fn log_tree_prior(tree: &DecisionTree, config: &PriorConfig, data: &Dataset) -> Result<f64> {
    let spans = tree.spans(data)?;
    prior_with_spans(tree, &spans, config, data, &mut DistinctCounter::default())
}

pub(crate) fn prior_with_spans(
    tree: &DecisionTree,
    spans: &Spans,
    config: &PriorConfig,
    data: &Dataset,
    counter: &mut DistinctCounter,
) -> Result<f64> {
    let ln_m = (data.n_features() as f64).ln();
    let mut rule_term = 0.0;
    for id in tree.internals() {
        let feature = tree.rule(id).unwrap().feature;
        let n = counter.candidates(data, spans.rows(id), feature);
        rule_term -= (n as f64).ln() + ln_m;
    }
    match config.kind {
        PriorKind::UniformLeaves => {
            let k = tree.leaf_count();
            Ok(rule_term - ln_tree_shapes(k) - (config.max_leaves as f64).ln())
        }
        PriorKind::Chipman { .. } => {
            let depths = tree.depths();
            let mut total = rule_term;
            for (id, node) in tree.nodes().iter().enumerate() {
                let p = config.split_probability(depths[id]).unwrap();
                if p > 1.0 {
                    return Err(BdtError::Config(format!("splitting probability {p} > 1 at depth {}", depths[id])));
                }
                total += if node.is_leaf() { (1.0 - p).ln() } else { p.ln() };
            }
            Ok(total)
        }
    }
}

/// Number of strictly binary tree shapes with `k` terminal nodes: the
/// Catalan number `C(k - 1)`.
pub fn count_tree_shapes(k: usize) -> Result<BigUint> {
    if k < 1 {
        return Err(BdtError::Input("a tree has at least one terminal node".into()));
    }
    let mut c = BigUint::from(1u32);
    for i in 0..(k - 1) as u64 {
        c = c * BigUint::from(2 * (2 * i + 1)) / BigUint::from(i + 2);
    }
    Ok(c)
}

/// `ln S_k`.
pub fn ln_tree_shapes(k: usize) -> f64 {
    debug_assert!(k >= 1);
    let k = k as f64;
    ln_gamma(2.0 * k - 1.0) - ln_gamma(k) - ln_gamma(k + 1.0)
}

/// `ln(S_{k+1} / S_k) = ln(2(2k - 1) / (k + 1))`, exact up to one rounding.
pub fn ln_shape_growth(k: usize) -> f64 {
    debug_assert!(k >= 1);
    (2.0 * (2.0 * k as f64 - 1.0)).ln() - (k as f64 + 1.0).ln()
}
