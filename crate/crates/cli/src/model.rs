//! JSON model files.
//!
//! A model file stores the ensemble in chain order. Each tree is a preorder
//! node list where node 0 is the root; split nodes carry the rule in original
//! feature units plus child indices, terminal nodes carry class counts. Every
//! node records its parent so the file can be read without rebuilding links.

use std::fs;
use std::path::Path;

use bdt_core::sampler::{ChainDiagnostics, Phase};
use bdt_core::{DecisionTree, Ensemble, EnsembleMeta, FeatureRange, Hyperparameters, Node, SplitRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub parent: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub acceptance_burn_in: f64,
    pub acceptance_post_burn_in: f64,
    pub final_log_lik: Option<f64>,
    pub converged: Option<bool>,
    pub sweep_count: u64,
    pub resample_count: u64,
}

impl ChainSummary {
    pub fn from_diagnostics(d: &ChainDiagnostics) -> Self {
        Self {
            acceptance_burn_in: d.acceptance_rate(Phase::BurnIn),
            acceptance_post_burn_in: d.acceptance_rate(Phase::PostBurnIn),
            final_log_lik: d.final_log_lik(),
            converged: d.converged(),
            sweep_count: d.sweep_count,
            resample_count: d.resample_count,
        }
    }
}

/// Where a single-tree model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub method: String,
    pub source_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub hyperparameters: Option<Hyperparameters>,
    pub feature_names: Vec<String>,
    pub ranges: Vec<FeatureRange>,
    pub label_name: String,
    pub class_names: Vec<String>,
    pub alpha: f64,
    pub trees: Vec<TreeRecord>,
    pub chain: Option<ChainSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRecord>,
}

pub fn tree_record(tree: &DecisionTree) -> TreeRecord {
    let parents = tree.parents();
    let nodes = tree
        .nodes()
        .iter()
        .zip(parents)
        .map(|(node, parent)| match node {
            Node::Split { rule, left, right } => NodeRecord {
                parent,
                feature: Some(rule.feature),
                threshold: Some(rule.threshold),
                left: Some(*left),
                right: Some(*right),
                counts: None,
            },
            Node::Leaf { counts } => NodeRecord {
                parent,
                feature: None,
                threshold: None,
                left: None,
                right: None,
                counts: Some(counts.clone()),
            },
        })
        .collect();
    TreeRecord { nodes }
}

pub fn tree_from_record(rec: &TreeRecord, class_count: usize) -> Result<DecisionTree> {
    let bad = |i: usize, what: &str| CliError::Model(format!("node {i}: {what}"));
    let mut nodes = Vec::with_capacity(rec.nodes.len());
    for (i, n) in rec.nodes.iter().enumerate() {
        let node = match (n.feature, n.threshold, n.left, n.right, &n.counts) {
            (Some(feature), Some(threshold), Some(left), Some(right), None) => {
                for child in [left, right] {
                    if rec.nodes.get(child).and_then(|c| c.parent) != Some(i) {
                        return Err(bad(i, "child does not point back to its parent"));
                    }
                }
                Node::Split { rule: SplitRule::new(feature, threshold), left, right }
            }
            (None, None, None, None, Some(counts)) => Node::Leaf { counts: counts.clone() },
            _ => return Err(bad(i, "must be either a split or a terminal node")),
        };
        nodes.push(node);
    }
    if rec.nodes.first().map(|n| n.parent) != Some(None) {
        return Err(CliError::Model("node 0 must be the root".into()));
    }
    let tree = DecisionTree::from_nodes(nodes, 0, class_count)?;
    if tree_record(&tree) != *rec {
        return Err(CliError::Model("nodes are not in preorder".into()));
    }
    Ok(tree)
}

impl ModelFile {
    pub fn from_ensemble(ens: &Ensemble, chain: Option<ChainSummary>) -> Self {
        let meta = ens.meta();
        Self {
            format_version: FORMAT_VERSION,
            hyperparameters: meta.hyper.clone(),
            feature_names: meta.feature_names.clone(),
            ranges: meta.ranges.clone(),
            label_name: meta.label_name.clone(),
            class_names: meta.class_names.clone(),
            alpha: meta.alpha,
            trees: ens.trees().iter().map(tree_record).collect(),
            chain,
            selection: None,
        }
    }

    pub fn ensemble(&self) -> Result<Ensemble> {
        let meta = EnsembleMeta {
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
            class_names: self.class_names.clone(),
            ranges: self.ranges.clone(),
            alpha: self.alpha,
            hyper: self.hyperparameters.clone(),
        };
        let c = self.class_names.len();
        let trees = self
            .trees
            .iter()
            .enumerate()
            .map(|(i, t)| tree_from_record(t, c).map_err(|e| CliError::Model(format!("tree {i}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble::new(trees, meta)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Model(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: Option<u32>,
        }
        let v: Version = serde_json::from_str(text).map_err(|e| CliError::Model(e.to_string()))?;
        match v.format_version {
            Some(FORMAT_VERSION) => {}
            Some(other) => {
                return Err(CliError::Model(format!(
                    "format version {other} is not supported (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(CliError::Model("missing format_version".into())),
        }
        let model: ModelFile = serde_json::from_str(text).map_err(|e| CliError::Model(e.to_string()))?;
        model.ensemble()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(CliError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_json(&text)
    }
}
