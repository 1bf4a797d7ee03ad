//! Repeated train/test comparison of the ensemble against the three
//! single-tree selections.

use std::io::Write;

use bdt_core::data::{make_folds, FoldStrategy};
use bdt_core::selection::{select_mapw, select_sc};
use bdt_core::{run_chain, select_map, Dataset, DecisionTree, Ensemble, Exec, Hyperparameters, PriorConfig};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone)]
pub struct CrossvalConfig {
    pub folds: usize,
    pub strategy: FoldStrategy,
    pub hyper: Hyperparameters,
    /// MAPW threshold tolerance on the normalized feature scale.
    pub mapw_tol: f64,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub acceptance: f64,
    pub ensemble_error: f64,
    pub sc_error: f64,
    pub map_error: f64,
    pub mapw_error: f64,
    pub sc_nodes: usize,
    pub map_nodes: usize,
    pub mapw_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalTable {
    pub rows: Vec<FoldResult>,
}

fn tree_error(tree: &DecisionTree, test: &Dataset) -> f64 {
    let wrong = test.rows().zip(test.labels()).filter(|(x, &y)| tree.predict_class(x) != y).count();
    wrong as f64 / test.n_rows() as f64
}

fn ensemble_error(ens: &Ensemble, test: &Dataset) -> Result<f64> {
    let mut wrong = 0;
    for (x, &y) in test.rows().zip(test.labels()) {
        if ens.predict_class_by_mean(x)? != y {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / test.n_rows() as f64)
}

fn run_fold(
    data: &Dataset,
    cfg: &CrossvalConfig,
    fold: usize,
    train_rows: &[usize],
    test_rows: &[usize],
) -> Result<FoldResult> {
    let train = data.subset(train_rows)?;
    let test = data.subset(test_rows)?;
    let hyper = Hyperparameters { seed: derive_seed(cfg.hyper.seed, fold as u64), ..cfg.hyper.clone() };
    let run = run_chain(&train, &hyper)?;
    let ens = &run.ensemble;
    let sc = select_sc(ens, &train, hyper.gamma0)?;
    let map = select_map(ens, &train, &PriorConfig::for_data(hyper.prior, &train))?;
    let mapw = select_mapw(ens, cfg.mapw_tol)?;
    Ok(FoldResult {
        fold,
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        acceptance: run.diagnostics.acceptance_rate(bdt_core::sampler::Phase::PostBurnIn),
        ensemble_error: ensemble_error(ens, &test)?,
        sc_error: tree_error(&sc.tree, &test),
        map_error: tree_error(&map.tree, &test),
        mapw_error: tree_error(&mapw.tree, &test),
        sc_nodes: sc.tree_size,
        map_nodes: map.tree_size,
        mapw_nodes: mapw.tree_size,
    })
}

/// Runs every fold, possibly concurrently. Fold `f` trains its chain with a
/// seed derived from the configured seed and `f`; results come back in fold
/// order.
pub fn crossval(data: &Dataset, cfg: &CrossvalConfig) -> Result<CrossvalTable> {
    let plan = make_folds(data.labels(), cfg.folds, cfg.strategy, cfg.hyper.seed)?;
    let rows = cfg
        .exec
        .map(plan.folds.len(), |f| {
            run_fold(data, cfg, f, &plan.folds[f].train, &plan.folds[f].test)
                .map_err(|e| CliError::Fold { index: f, source: Box::new(e) })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossvalTable { rows })
}

impl CrossvalTable {
    pub fn mean(&self, f: impl Fn(&FoldResult) -> f64) -> f64 {
        self.rows.iter().map(f).sum::<f64>() / self.rows.len() as f64
    }

    /// One line per fold then a `mean` line.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        let cells = [
            "mean".to_string(),
            self.mean(|r| r.train_rows as f64).to_string(),
            self.mean(|r| r.test_rows as f64).to_string(),
            self.mean(|r| r.acceptance).to_string(),
            self.mean(|r| r.ensemble_error).to_string(),
            self.mean(|r| r.sc_error).to_string(),
            self.mean(|r| r.map_error).to_string(),
            self.mean(|r| r.mapw_error).to_string(),
            self.mean(|r| r.sc_nodes as f64).to_string(),
            self.mean(|r| r.map_nodes as f64).to_string(),
            self.mean(|r| r.mapw_nodes as f64).to_string(),
        ];
        w.write_record(&cells)?;
        w.flush()?;
        Ok(())
    }
}
