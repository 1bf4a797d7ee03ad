use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{BdtError, Result};
use crate::sampler::ChainRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldStrategy {
    /// Independent stratified 50/50 splits, one per fold.
    #[default]
    RepeatedHalves,
    /// Disjoint stratified test folds.
    StratifiedKFold,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub strategy: FoldStrategy,
    pub folds: Vec<Fold>,
}

fn fold_rng(seed: u64, fold: usize) -> ChainRng {
    ChainRng::seed_from_u64(seed.wrapping_add((fold as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Builds `fold_count` train/test splits stratified by `labels`.
pub fn make_folds(labels: &[usize], fold_count: usize, strategy: FoldStrategy, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if fold_count < 2 {
        return Err(BdtError::Config("need at least 2 folds".into()));
    }
    if n < 2 * fold_count {
        return Err(BdtError::Config(format!("{n} rows is too few for {fold_count} folds")));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    if let Some((class, rows)) = by_class.iter().enumerate().find(|(_, r)| !r.is_empty() && r.len() < fold_count) {
        return Err(BdtError::Stratification { class, count: rows.len(), folds: fold_count });
    }

    let folds = match strategy {
        FoldStrategy::RepeatedHalves => (0..fold_count)
            .map(|f| {
                let mut rng = fold_rng(seed, f);
                let (mut train, mut test) = (Vec::new(), Vec::new());
                let mut odd_to_train = f % 2 == 0;
                for rows in &by_class {
                    let mut rows = rows.clone();
                    rows.shuffle(&mut rng);
                    let mut half = rows.len() / 2;
                    if rows.len() % 2 == 1 {
                        if odd_to_train {
                            half += 1;
                        }
                        odd_to_train = !odd_to_train;
                    }
                    train.extend_from_slice(&rows[..half]);
                    test.extend_from_slice(&rows[half..]);
                }
                train.sort_unstable();
                test.sort_unstable();
                Fold { train, test }
            })
            .collect(),
        FoldStrategy::StratifiedKFold => {
            let mut rng = fold_rng(seed, 0);
            let mut assignment = vec![0usize; n];
            let mut next = 0;
            for rows in &by_class {
                let mut rows = rows.clone();
                rows.shuffle(&mut rng);
                for r in rows {
                    assignment[r] = next % fold_count;
                    next += 1;
                }
            }
            (0..fold_count)
                .map(|f| {
                    let (test, train) = (0..n).partition(|&i| assignment[i] == f);
                    Fold { train, test }
                })
                .collect()
        }
    };
    Ok(FoldPlan { strategy, folds })
}
