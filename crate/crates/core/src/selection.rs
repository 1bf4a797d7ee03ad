//! Picking one interpretable tree out of an ensemble.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::ensemble::{Ensemble, EnvelopeStatus};
use crate::error::{BdtError, Result};
use crate::exec::Exec;
use crate::likelihood::{log_marginal_likelihood, log_tree_prior, PriorConfig};
use crate::tree::DecisionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Sc,
    Map,
    Mapw,
}

impl SelectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Sc => "sc",
            SelectionMethod::Map => "map",
            SelectionMethod::Mapw => "mapw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub method: SelectionMethod,
    /// Position of the chosen tree in chain order.
    pub index: usize,
    pub tree: DecisionTree,
    /// `|S1|, |S2|, |S3|` (SC only).
    pub set_sizes: Option<[usize; 3]>,
    /// Confident-correct training rows the chosen tree also classifies correctly (SC only).
    pub train_coverage: Option<usize>,
    /// Total node count of the chosen tree.
    pub tree_size: usize,
    /// MAP: log posterior score per tree. MAPW: group weight per tree.
    pub scores: Vec<f64>,
}

fn report(method: SelectionMethod, ens: &Ensemble, index: usize) -> SelectionReport {
    let tree = ens.trees()[index].clone();
    SelectionReport {
        method,
        index,
        tree_size: tree.node_count(),
        tree,
        set_sizes: None,
        train_coverage: None,
        scores: Vec::new(),
    }
}

fn check_schema(ens: &Ensemble, data: &Dataset) -> Result<()> {
    if data.n_features() != ens.n_features() {
        return Err(BdtError::Schema { expected: ens.n_features(), actual: data.n_features() });
    }
    Ok(())
}

fn keep_min<F: Fn(usize) -> i64>(set: &[usize], key: F) -> Vec<usize> {
    let best = set.iter().map(|&i| key(i)).min().unwrap_or(0);
    set.iter().copied().filter(|&i| key(i) == best).collect()
}

/// The "sure correct" procedure:
///
/// 1. `S1`: trees correct on the most training rows the ensemble classifies
///    confidently and correctly at `gamma0` (all trees if there are none).
/// 2. `D1`: training rows minus those the ensemble misclassifies.
/// 3. `S2`: members of `S1` with the fewest errors on `D1`.
/// 4. `S3`: members of `S2` with the fewest nodes; the first in chain order wins.
pub fn select_sc(ens: &Ensemble, train: &Dataset, gamma0: f64) -> Result<SelectionReport> {
    select_sc_with(ens, train, gamma0, Exec::default())
}

pub fn select_sc_with(ens: &Ensemble, train: &Dataset, gamma0: f64, exec: Exec) -> Result<SelectionReport> {
    check_schema(ens, train)?;
    let env = ens.envelope(train.feature_buffer(), Some(train.labels()), gamma0, exec)?;
    let sure: Vec<usize> = env
        .outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.status == EnvelopeStatus::ConfidentCorrect)
        .map(|(i, _)| i)
        .collect();
    let d1: Vec<usize> =
        env.outcomes.iter().enumerate().filter(|(i, o)| o.predicted == train.label(*i)).map(|(i, _)| i).collect();

    // (covered confident-correct rows, errors on D1) per tree
    let tallies = exec.map_slice(ens.trees(), |t| {
        let covered = sure.iter().filter(|&&i| t.predict_class(train.row(i)) == train.label(i)).count();
        let errors = d1.iter().filter(|&&i| t.predict_class(train.row(i)) != train.label(i)).count();
        (covered, errors)
    });
    let all: Vec<usize> = (0..ens.len()).collect();
    let s1 = keep_min(&all, |i| -(tallies[i].0 as i64));
    let s2 = keep_min(&s1, |i| tallies[i].1 as i64);
    let s3 = keep_min(&s2, |i| ens.trees()[i].node_count() as i64);
    let chosen = s3[0];
    let mut r = report(SelectionMethod::Sc, ens, chosen);
    r.set_sizes = Some([s1.len(), s2.len(), s3.len()]);
    r.train_coverage = Some(tallies[chosen].0);
    Ok(r)
}

/// Log posterior score (`log marginal likelihood + log prior`) of every tree
/// after refitting it to `train`.
pub fn map_scores(ens: &Ensemble, train: &Dataset, prior: &PriorConfig, exec: Exec) -> Result<Vec<f64>> {
    check_schema(ens, train)?;
    let alpha = ens.meta().alpha;
    exec.map_slice(ens.trees(), |t| {
        let fitted = t.refit(train, 1)?.tree;
        Ok(log_marginal_likelihood(&fitted, train, alpha)? + log_tree_prior(&fitted, prior, train)?)
    })
    .into_iter()
    .collect()
}

/// Tree with the highest log posterior; ties go to the smaller tree, then chain order.
pub fn select_map(ens: &Ensemble, train: &Dataset, prior: &PriorConfig) -> Result<SelectionReport> {
    let scores = map_scores(ens, train, prior, Exec::default())?;
    let mut best = 0;
    for i in 1..scores.len() {
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best] && ens.trees()[i].node_count() < ens.trees()[best].node_count());
        if better {
            best = i;
        }
    }
    let mut r = report(SelectionMethod::Map, ens, best);
    r.scores = scores;
    Ok(r)
}

/// Groups of structurally identical trees (same shape and split features,
/// thresholds within `tol` on the normalized scale). Each tree joins the
/// first group whose representative it matches; groups are in order of
/// first appearance.
pub fn mapw_groups(ens: &Ensemble, tol: f64) -> Vec<Vec<usize>> {
    let ranges = &ens.meta().ranges;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, t) in ens.trees().iter().enumerate() {
        match groups.iter_mut().find(|g| ens.trees()[g[0]].same_structure(t, ranges, tol)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// Representative of the most frequently sampled structure; ties go to the
/// smaller tree, then to the earlier group.
pub fn select_mapw(ens: &Ensemble, tol: f64) -> Result<SelectionReport> {
    if ens.is_empty() {
        return Err(BdtError::State("ensemble has no trees".into()));
    }
    let groups = mapw_groups(ens, tol);
    let mut best = 0;
    for (g, members) in groups.iter().enumerate().skip(1) {
        let cur = &groups[best];
        let size = |m: &Vec<usize>| ens.trees()[m[0]].node_count();
        if members.len() > cur.len() || (members.len() == cur.len() && size(members) < size(cur)) {
            best = g;
        }
    }
    let n = ens.len() as f64;
    let mut weights = vec![0.0; ens.len()];
    for g in &groups {
        for &i in g {
            weights[i] = g.len() as f64 / n;
        }
    }
    let mut r = report(SelectionMethod::Mapw, ens, groups[best][0]);
    r.scores = weights;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureRange;
    use crate::ensemble::EnsembleMeta;
    use crate::hyper::PriorKind;
    use crate::tree::SplitRule;

    fn meta() -> EnsembleMeta {
        EnsembleMeta {
            feature_names: vec!["a".into(), "b".into()],
            label_name: "y".into(),
            class_names: vec!["0".into(), "1".into()],
            ranges: vec![FeatureRange { min: 0.0, max: 10.0 }; 2],
            alpha: 1.0,
            hyper: None,
        }
    }

    fn stump(f: usize, thr: f64) -> DecisionTree {
        DecisionTree::leaf(2).split_leaf(0, SplitRule::new(f, thr)).unwrap()
    }

    fn data() -> Dataset {
        // label = a >= 5, except row 9 which is noise
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, ((i * 3) % 10) as f64]).collect();
        let mut labels: Vec<usize> = (0..10).map(|i| (i >= 5) as usize).collect();
        labels[9] = 0;
        Dataset::new(rows, labels, vec!["a".into(), "b".into()], 2).unwrap()
    }

    fn fitted(t: DecisionTree) -> DecisionTree {
        t.refit(&data(), 1).unwrap().tree
    }

    #[test]
    fn sc_identical_trees() {
        let t = fitted(stump(0, 5.0));
        let e = Ensemble::new(vec![t.clone(); 5], meta()).unwrap();
        let r = select_sc(&e, &data(), 0.99).unwrap();
        assert_eq!(r.set_sizes, Some([5, 5, 5]));
        assert_eq!(r.index, 0);
        assert_eq!(r.tree, t);
    }

    #[test]
    fn sc_hand_built_fixture() {
        let d = data();
        // A: deeper tree that is right on 0..9 except 9 -> same as B on every row but bigger
        let a = {
            let t = stump(0, 5.0);
            fitted(t.split_leaf(2, SplitRule::new(1, 100.0)).unwrap())
        };
        // B: the stump on a
        let b = fitted(stump(0, 5.0));
        // C: a poor stump on b
        let c = fitted(stump(1, 5.0));
        let e = Ensemble::new(vec![a.clone(), b.clone(), c.clone(), a.clone(), b.clone()], meta()).unwrap();
        let r = select_sc(&e, &d, 0.8).unwrap();
        // confident rows: A,B,A,B agree (4/5 = 0.8); C disagrees on some rows.
        // S1 = {A, B, A, B}, S2 same (identical errors on D1), S3 = the B copies.
        let [s1, s2, s3] = r.set_sizes.unwrap();
        assert_eq!((s1, s2, s3), (4, 4, 2));
        assert_eq!(r.index, 1);
        assert_eq!(r.tree_size, 3);
        assert!(s3 <= s2 && s2 <= s1 && s1 <= e.len());
    }

    #[test]
    fn sc_at_floor_covers_every_correct_row() {
        let d = data();
        let trees = vec![fitted(stump(0, 5.0)), fitted(stump(1, 5.0)), fitted(stump(0, 3.0))];
        let e = Ensemble::new(trees, meta()).unwrap();
        let env = e.classify_with_envelope(&d, 0.5).unwrap();
        let correct = env.outcomes.iter().enumerate().filter(|(i, o)| o.predicted == d.label(*i)).count();
        let cc = env.counts.unwrap().confident_correct;
        assert_eq!(correct, cc);
        let r = select_sc(&e, &d, 0.5).unwrap();
        assert!(r.train_coverage.unwrap() <= cc);
    }

    #[test]
    fn map_examples() {
        let d = data();
        let prior = PriorConfig::for_data(PriorKind::UniformLeaves, &d);
        let e = Ensemble::new(vec![fitted(stump(1, 5.0))], meta()).unwrap();
        assert_eq!(select_map(&e, &d, &prior).unwrap().index, 0);

        // same prior (one split, same candidate count 9), better fit wins
        let e = Ensemble::new(vec![fitted(stump(1, 5.0)), fitted(stump(0, 5.0))], meta()).unwrap();
        let r = select_map(&e, &d, &prior).unwrap();
        assert_eq!(r.index, 1);
        assert!(r.scores.iter().all(|&s| s <= r.scores[r.index]));
    }

    #[test]
    fn mapw_examples() {
        let mut trees = vec![stump(0, 5.0); 6];
        trees.extend([stump(1, 2.0), stump(1, 7.0), stump(0, 1.0), stump(1, 4.0)]);
        let e = Ensemble::new(trees, meta()).unwrap();
        let r = select_mapw(&e, 1e-9).unwrap();
        assert_eq!(r.index, 0);
        assert!((r.scores[0] - 0.6).abs() < 1e-15);

        // all distinct -> smallest tree wins
        let big = stump(0, 5.0).split_leaf(1, SplitRule::new(1, 3.0)).unwrap();
        let e = Ensemble::new(vec![big, stump(1, 2.0), stump(0, 8.0)], meta()).unwrap();
        let r = select_mapw(&e, 1e-9).unwrap();
        assert_eq!(r.index, 1);
        assert_eq!(r.tree_size, 3);

        // threshold tolerance is on the normalized scale: 0.5 / 10 = 0.05
        let e = Ensemble::new(vec![stump(0, 5.0), stump(0, 5.5), stump(1, 1.0)], meta()).unwrap();
        assert_eq!(mapw_groups(&e, 0.06).len(), 2);
        assert_eq!(mapw_groups(&e, 0.04).len(), 3);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let d = Dataset::new(vec![vec![1.0], vec![2.0]], vec![0, 1], vec!["a".into()], 2).unwrap();
        let e = Ensemble::new(vec![stump(0, 1.5)], meta()).unwrap();
        assert!(matches!(select_sc(&e, &d, 0.9), Err(BdtError::Schema { .. })));
    }
}
