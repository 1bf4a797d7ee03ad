//! Posterior averaging over sampled trees and the uncertainty envelope.

use serde::{Deserialize, Serialize};

use crate::dataset::{check_point, Dataset, FeatureRange};
use crate::error::{BdtError, Result};
use crate::exec::Exec;
use crate::hyper::Hyperparameters;
use crate::tree::{argmax_f64, DecisionTree};

/// Schema and settings shared by every tree of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub feature_names: Vec<String>,
    pub label_name: String,
    pub class_names: Vec<String>,
    pub ranges: Vec<FeatureRange>,
    pub alpha: f64,
    pub hyper: Option<Hyperparameters>,
}

impl EnsembleMeta {
    pub fn from_data(data: &Dataset, alpha: f64, hyper: Option<Hyperparameters>) -> Self {
        Self {
            feature_names: data.feature_names().to_vec(),
            label_name: data.label_name().to_string(),
            class_names: data.class_names().to_vec(),
            ranges: data.ranges().to_vec(),
            alpha,
            hyper,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    trees: Vec<DecisionTree>,
    meta: EnsembleMeta,
}

/// Result of the per-tree vote at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub class: usize,
    /// Fraction of trees voting for `class`.
    pub gamma: f64,
    pub votes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeStatus {
    ConfidentCorrect,
    ConfidentIncorrect,
    Uncertain,
    /// Confident outcome on unlabeled data.
    Confident,
}

impl EnvelopeStatus {
    pub fn name(self) -> &'static str {
        match self {
            EnvelopeStatus::ConfidentCorrect => "confident-correct",
            EnvelopeStatus::ConfidentIncorrect => "confident-incorrect",
            EnvelopeStatus::Uncertain => "uncertain",
            EnvelopeStatus::Confident => "confident",
        }
    }

    pub fn is_confident(self) -> bool {
        self != EnvelopeStatus::Uncertain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeOutcome {
    pub predicted: usize,
    pub gamma: f64,
    pub status: EnvelopeStatus,
    /// Averaged class probabilities.
    pub probabilities: Vec<f64>,
}

/// Row tallies of an envelope evaluation on labeled data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnvelopeCounts {
    pub rows: usize,
    pub confident_correct: usize,
    pub confident_incorrect: usize,
    pub uncertain: usize,
    pub misclassified: usize,
}

impl EnvelopeCounts {
    fn rate(&self, c: usize) -> f64 {
        c as f64 / self.rows as f64
    }

    pub fn confident_correct_rate(&self) -> f64 {
        self.rate(self.confident_correct)
    }

    pub fn confident_incorrect_rate(&self) -> f64 {
        self.rate(self.confident_incorrect)
    }

    pub fn uncertain_rate(&self) -> f64 {
        self.rate(self.uncertain)
    }

    /// Fraction of rows whose voted class differs from the label, regardless of confidence.
    pub fn misclassification_rate(&self) -> f64 {
        self.rate(self.misclassified)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub outcomes: Vec<EnvelopeOutcome>,
    /// Present when labels were supplied.
    pub counts: Option<EnvelopeCounts>,
}

impl EnvelopeReport {
    pub fn confident_fraction(&self) -> f64 {
        let c = self.outcomes.iter().filter(|o| o.status.is_confident()).count();
        c as f64 / self.outcomes.len() as f64
    }
}

/// Posterior feature weights with 1-based ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub weights: Vec<f64>,
    pub ranks: Vec<usize>,
}

impl FeatureImportance {
    /// Feature indices ordered by rank.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.weights.len()).collect();
        idx.sort_by_key(|&j| self.ranks[j]);
        idx
    }
}

impl Ensemble {
    pub fn new(trees: Vec<DecisionTree>, meta: EnsembleMeta) -> Result<Self> {
        if trees.is_empty() {
            return Err(BdtError::State("ensemble has no trees".into()));
        }
        let m = meta.n_features();
        if meta.ranges.len() != m {
            return Err(BdtError::Input("feature ranges do not match feature names".into()));
        }
        for (i, t) in trees.iter().enumerate() {
            if t.class_count() != meta.class_count() {
                return Err(BdtError::Structural(format!("tree {i} has the wrong class count")));
            }
            if let Some(id) = t.internals().find(|&id| t.rule(id).unwrap().feature >= m) {
                return Err(BdtError::Structural(format!("tree {i} node {id} splits on a missing feature")));
            }
        }
        Ok(Self { trees, meta })
    }

    /// Ensemble of trees collected from a chain on `data`; needs at least two trees.
    pub fn from_chain(trees: Vec<DecisionTree>, data: &Dataset, hyper: &Hyperparameters) -> Result<Self> {
        if trees.len() < 2 {
            return Err(BdtError::Config(format!("chain collected {} trees, need at least 2", trees.len())));
        }
        Self::new(trees, EnsembleMeta::from_data(data, hyper.alpha, Some(hyper.clone())))
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn meta(&self) -> &EnsembleMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.meta.n_features()
    }

    pub fn class_count(&self) -> usize {
        self.meta.class_count()
    }

    /// Concatenates ensembles with identical metadata, in order.
    pub fn merge(parts: Vec<Ensemble>) -> Result<Self> {
        let mut it = parts.into_iter();
        let mut first = it.next().ok_or_else(|| BdtError::State("nothing to merge".into()))?;
        for e in it {
            if e.meta.feature_names != first.meta.feature_names || e.meta.class_names != first.meta.class_names {
                return Err(BdtError::Input("cannot merge ensembles with different schemas".into()));
            }
            first.trees.extend(e.trees);
        }
        Ok(first)
    }

    /// Mean of the per-tree class probabilities.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(x, self.n_features())?;
        Ok(self.proba_unchecked(x))
    }

    fn proba_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.class_count()];
        for t in &self.trees {
            let leaf = t.route(x);
            for (a, p) in acc.iter_mut().zip(t.leaf_proba(leaf, self.meta.alpha)) {
                *a += p;
            }
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// One vote per tree for its most probable class (ties to the lowest index).
    pub fn vote(&self, x: &[f64]) -> Result<Vote> {
        check_point(x, self.n_features())?;
        Ok(self.vote_unchecked(x))
    }

    fn vote_unchecked(&self, x: &[f64]) -> Vote {
        let mut votes = vec![0usize; self.class_count()];
        for t in &self.trees {
            votes[t.predict_class(x)] += 1;
        }
        let mut class = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[class] {
                class = c;
            }
        }
        Vote { class, gamma: votes[class] as f64 / self.trees.len() as f64, votes }
    }

    fn check_gamma0(&self, gamma0: f64) -> Result<()> {
        let floor = 1.0 / self.class_count() as f64;
        if !(gamma0 >= floor - 1e-12 && gamma0 <= 1.0) {
            return Err(BdtError::Config(format!("gamma0 {gamma0} outside [{floor}, 1]")));
        }
        Ok(())
    }

    /// Uncertainty envelope of every row of a labeled dataset.
    pub fn classify_with_envelope(&self, data: &Dataset, gamma0: f64) -> Result<EnvelopeReport> {
        self.envelope(data.feature_buffer(), Some(data.labels()), gamma0, Exec::default())
    }

    /// Uncertainty envelope over a row-major feature buffer with optional labels.
    pub fn envelope(
        &self,
        features: &[f64],
        labels: Option<&[usize]>,
        gamma0: f64,
        exec: Exec,
    ) -> Result<EnvelopeReport> {
        self.check_gamma0(gamma0)?;
        let m = self.n_features();
        if !features.len().is_multiple_of(m) {
            return Err(BdtError::Schema { expected: m, actual: features.len() % m });
        }
        let n = features.len() / m;
        if let Some(l) = labels {
            if l.len() != n {
                return Err(BdtError::Input(format!("{} labels for {n} rows", l.len())));
            }
            if l.iter().any(|&y| y >= self.class_count()) {
                return Err(BdtError::Input("label outside the model's classes".into()));
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(BdtError::Input("feature matrix contains non-finite values".into()));
        }
        let outcomes = exec.map(n, |i| {
            let x = &features[i * m..(i + 1) * m];
            let vote = self.vote_unchecked(x);
            let confident = vote.gamma >= gamma0;
            let status = match (confident, labels) {
                (false, _) => EnvelopeStatus::Uncertain,
                (true, None) => EnvelopeStatus::Confident,
                (true, Some(l)) if l[i] == vote.class => EnvelopeStatus::ConfidentCorrect,
                (true, Some(_)) => EnvelopeStatus::ConfidentIncorrect,
            };
            EnvelopeOutcome { predicted: vote.class, gamma: vote.gamma, status, probabilities: self.proba_unchecked(x) }
        });
        let counts = labels.map(|l| {
            let mut c = EnvelopeCounts { rows: n, ..Default::default() };
            for (o, &y) in outcomes.iter().zip(l) {
                match o.status {
                    EnvelopeStatus::ConfidentCorrect => c.confident_correct += 1,
                    EnvelopeStatus::ConfidentIncorrect => c.confident_incorrect += 1,
                    _ => c.uncertain += 1,
                }
                if o.predicted != y {
                    c.misclassified += 1;
                }
            }
            c
        });
        Ok(EnvelopeReport { outcomes, counts })
    }

    /// Averaged class probabilities for every row of `data`.
    pub fn predict_proba_all(&self, data: &Dataset, exec: Exec) -> Result<Vec<Vec<f64>>> {
        if data.n_features() != self.n_features() {
            return Err(BdtError::Schema { expected: self.n_features(), actual: data.n_features() });
        }
        Ok(exec.map(data.n_rows(), |i| self.proba_unchecked(data.row(i))))
    }

    /// Per-feature share of splits, averaged over trees. A tree without splits
    /// contributes the uniform vector.
    pub fn feature_importance(&self) -> FeatureImportance {
        let m = self.n_features();
        let mut weights = vec![0.0; m];
        for t in &self.trees {
            let splits = t.internal_count();
            if splits == 0 {
                weights.iter_mut().for_each(|w| *w += 1.0 / m as f64);
                continue;
            }
            for id in t.internals() {
                weights[t.rule(id).unwrap().feature] += 1.0 / splits as f64;
            }
        }
        let n = self.trees.len() as f64;
        weights.iter_mut().for_each(|w| *w /= n);
        let mut order: Vec<usize> = (0..m).collect();
        // weights equal up to summation rounding count as tied
        let key = |j: usize| (weights[j] * 1e12).round() as i64;
        order.sort_by(|&a, &b| key(b).cmp(&key(a)).then(a.cmp(&b)));
        let mut ranks = vec![0; m];
        for (r, &j) in order.iter().enumerate() {
            ranks[j] = r + 1;
        }
        FeatureImportance { weights, ranks }
    }

    /// Class with the highest averaged probability.
    pub fn predict_class_by_mean(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_f64(&self.predict_proba(x)?))
    }
}
