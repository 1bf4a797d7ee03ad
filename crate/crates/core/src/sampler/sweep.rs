use crate::error::Result;
use crate::tree::DecisionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStatus {
    /// No undersized terminal.
    Clean,
    /// One undersized terminal; its parent split was collapsed.
    Swept,
    /// Two or more undersized terminals; the candidate must be resampled.
    Reject,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub tree: DecisionTree,
    pub status: SweepStatus,
}

/// Enforces the minimum terminal size on a refitted candidate.
pub fn sweep(candidate: &DecisionTree, p_min: usize) -> Result<SweepOutcome> {
    let undersized: Vec<_> =
        candidate.leaves().filter(|&l| (candidate.counts(l).unwrap().iter().sum::<u32>() as usize) < p_min).collect();
    match undersized.as_slice() {
        [] => Ok(SweepOutcome { tree: candidate.clone(), status: SweepStatus::Clean }),
        [leaf] => match candidate.parents()[*leaf] {
            Some(parent) => Ok(SweepOutcome { tree: candidate.collapse(parent)?, status: SweepStatus::Swept }),
            None => Ok(SweepOutcome { tree: candidate.clone(), status: SweepStatus::Reject }),
        },
        _ => Ok(SweepOutcome { tree: candidate.clone(), status: SweepStatus::Reject }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::tree::SplitRule;

    fn data() -> Dataset {
        Dataset::new((0..20).map(|i| vec![i as f64]).collect(), (0..20).map(|i| i % 2).collect(), vec!["x".into()], 2)
            .unwrap()
    }

    fn fitted(splits: &[f64]) -> DecisionTree {
        let mut t = DecisionTree::leaf(2);
        for &s in splits {
            let last = t.leaves().last().unwrap();
            t = t.split_leaf(last, SplitRule::new(0, s)).unwrap();
        }
        t.refit(&data(), 1).unwrap().tree
    }

    #[test]
    fn clean_when_all_large_enough() {
        let t = fitted(&[10.0]);
        let out = sweep(&t, 5).unwrap();
        assert_eq!(out.status, SweepStatus::Clean);
        assert_eq!(out.tree, t);
    }

    #[test]
    fn single_violation_collapses_parent() {
        // leaves: [0,8) 8 rows, [8,12) 4 rows, [12,20) 8 rows; p_min 5
        let t = fitted(&[8.0, 12.0]);
        assert_eq!(t.leaf_count(), 3);
        let out = sweep(&t, 5).unwrap();
        assert_eq!(out.status, SweepStatus::Swept);
        assert_eq!(out.tree.leaf_count(), 2);
        for l in out.tree.leaves() {
            assert!(out.tree.counts(l).unwrap().iter().sum::<u32>() >= 5);
        }
        // counts after the collapse equal a fresh refit
        assert_eq!(out.tree, out.tree.refit(&data(), 1).unwrap().tree);
    }

    #[test]
    fn two_violations_reject() {
        // [0,3) 3 rows, [3,6) 3 rows, rest 14
        let t = fitted(&[3.0, 6.0]);
        let t2 = {
            // put the two small leaves under one parent elsewhere too
            let t = DecisionTree::leaf(2).split_leaf(0, SplitRule::new(0, 6.0)).unwrap();
            t.split_leaf(1, SplitRule::new(0, 3.0)).unwrap().refit(&data(), 1).unwrap().tree
        };
        assert_eq!(sweep(&t, 4).unwrap().status, SweepStatus::Reject);
        assert_eq!(sweep(&t2, 4).unwrap().status, SweepStatus::Reject);
    }
}
