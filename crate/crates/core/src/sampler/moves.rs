use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::chain::{ChainState, Sampler};
use super::MoveKind;
use crate::dataset::Dataset;
use crate::hyper::{MoveProbs, ThresholdMode};
use crate::likelihood::ln_shape_growth;
use crate::tree::{DecisionTree, NodeId, SplitRule};

/// A candidate tree (not yet refitted) and the log Hastings ratio
/// `ln q(current | candidate) - ln q(candidate | current)`.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub kind: MoveKind,
    pub tree: DecisionTree,
    pub log_ratio: f64,
    /// Node the move acted on, in the current tree's layout.
    pub node: NodeId,
}

/// Combined prior-and-proposal ratio of a birth from `k` to `k + 1`
/// terminals under the uniform-leaves prior:
/// `(d / b) * (k / D_Q1) * (S_k / S_{k+1})`, where `D_Q1` counts the
/// candidate's splitting nodes with two terminal children.
pub fn log_birth_ratio(k: usize, d_q1: usize, probs: &MoveProbs) -> f64 {
    (probs.death.ln() - probs.birth.ln()) + ((k as f64).ln() - (d_q1 as f64).ln()) - ln_shape_growth(k)
}

/// Combined ratio of a death from `k` to `k - 1` terminals:
/// `(b / d) * (D_Q / (k - 1)) * (S_k / S_{k-1})`.
pub fn log_death_ratio(k: usize, d_q: usize, probs: &MoveProbs) -> f64 {
    (probs.birth.ln() - probs.death.ln()) + ((d_q as f64).ln() - ((k - 1) as f64).ln()) + ln_shape_growth(k - 1)
}

/// Midpoints between consecutive distinct values of `feature` among `rows`.
pub fn node_midpoints(data: &Dataset, rows: &[u32], feature: usize) -> Vec<f64> {
    let mut values: Vec<f64> = rows.iter().map(|&r| data.value(r as usize, feature)).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn node_range(data: &Dataset, rows: &[u32], feature: usize) -> (f64, f64) {
    rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
        let v = data.value(r as usize, feature);
        (lo.min(v), hi.max(v))
    })
}

fn pick<T: Copy, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> T {
    items[rng.random_range(0..items.len())]
}

impl Sampler<'_> {
    /// Splits a uniformly chosen terminal on a uniformly chosen feature.
    pub fn propose_birth<R: Rng + ?Sized>(&mut self, state: &ChainState, rng: &mut R) -> Option<Proposal> {
        let tree = state.tree();
        let k = tree.leaf_count();
        if k >= self.max_leaves() {
            return None;
        }
        let leaves: Vec<NodeId> = tree.leaves().collect();
        let leaf = pick(&leaves, rng);
        let m = self.data().n_features();
        let feature = rng.random_range(0..m);
        let rows = state.spans().rows(leaf);
        if rows.len() < 2 * self.hyper().p_min {
            return None;
        }
        let threshold = match self.hyper().threshold_mode {
            ThresholdMode::Continuous => {
                let (lo, hi) = node_range(self.data(), rows, feature);
                if lo >= hi {
                    return None;
                }
                lo + rng.random::<f64>() * (hi - lo)
            }
            ThresholdMode::Midpoints => {
                let mids = node_midpoints(self.data(), rows, feature);
                if mids.is_empty() {
                    return None;
                }
                pick(&mids, rng)
            }
        };
        let candidates = {
            let data = self.data();
            self.counter().candidates(data, rows, feature)
        };
        let new_tree = tree.split_leaf(leaf, SplitRule::new(feature, threshold)).ok()?;
        let d_q1 = new_tree.prunable().len();
        let probs = self.hyper().move_probs;
        let log_ratio =
            (probs.death.ln() - probs.birth.ln()) + (k as f64).ln() + (m as f64).ln() + (candidates as f64).ln()
                - (d_q1 as f64).ln();
        Some(Proposal { kind: MoveKind::Birth, tree: new_tree, log_ratio, node: leaf })
    }

    /// Collapses a uniformly chosen split whose children are both terminal.
    pub fn propose_death<R: Rng + ?Sized>(&mut self, state: &ChainState, rng: &mut R) -> Option<Proposal> {
        let tree = state.tree();
        let k = tree.leaf_count();
        if k < 2 {
            return None;
        }
        let prunable = tree.prunable();
        let node = pick(&prunable, rng);
        let feature = tree.rule(node).unwrap().feature;
        let candidates = {
            let data = self.data();
            self.counter().candidates(data, state.spans().rows(node), feature)
        };
        let m = self.data().n_features();
        let probs = self.hyper().move_probs;
        let log_ratio = (probs.birth.ln() - probs.death.ln()) + (prunable.len() as f64).ln()
            - ((k - 1) as f64).ln()
            - (m as f64).ln()
            - (candidates as f64).ln();
        let new_tree = tree.collapse(node).ok()?;
        Some(Proposal { kind: MoveKind::Death, tree: new_tree, log_ratio, node })
    }

    /// Gives a uniformly chosen split a fresh feature and threshold.
    pub fn propose_change_split<R: Rng + ?Sized>(&mut self, state: &ChainState, rng: &mut R) -> Option<Proposal> {
        let tree = state.tree();
        if tree.leaf_count() < 2 {
            return None;
        }
        let internals: Vec<NodeId> = tree.internals().collect();
        let node = pick(&internals, rng);
        let old = *tree.rule(node).unwrap();
        let feature = rng.random_range(0..self.data().n_features());
        let rows = state.spans().rows(node);
        let (threshold, log_ratio) = match self.hyper().threshold_mode {
            ThresholdMode::Continuous => {
                let (lo, hi) = node_range(self.data(), rows, feature);
                if lo >= hi {
                    return None;
                }
                let (old_lo, old_hi) = node_range(self.data(), rows, old.feature);
                // reverse density 1/W_old over forward density 1/W_new
                (lo + rng.random::<f64>() * (hi - lo), ((hi - lo) / (old_hi - old_lo)).ln())
            }
            ThresholdMode::Midpoints => {
                let mids = node_midpoints(self.data(), rows, feature);
                if mids.is_empty() {
                    return None;
                }
                let old_n = {
                    let data = self.data();
                    self.counter().candidates(data, rows, old.feature)
                };
                (pick(&mids, rng), (mids.len() as f64).ln() - (old_n as f64).ln())
            }
        };
        let new_tree = tree.with_rule(node, SplitRule::new(feature, threshold)).ok()?;
        Some(Proposal { kind: MoveKind::ChangeSplit, tree: new_tree, log_ratio, node })
    }

    /// Perturbs the threshold of a uniformly chosen split.
    pub fn propose_change_rule<R: Rng + ?Sized>(&mut self, state: &ChainState, rng: &mut R) -> Option<Proposal> {
        let tree = state.tree();
        if tree.leaf_count() < 2 {
            return None;
        }
        let internals: Vec<NodeId> = tree.internals().collect();
        let node = pick(&internals, rng);
        let rule = *tree.rule(node).unwrap();
        let z: f64 = StandardNormal.sample(rng);
        let threshold = match self.hyper().threshold_mode {
            ThresholdMode::Continuous => {
                let scale = self.data().ranges()[rule.feature].scale();
                rule.threshold + self.hyper().proposal_std * scale * z
            }
            ThresholdMode::Midpoints => {
                // symmetric discrete walk over the node's candidate thresholds
                let mids = node_midpoints(self.data(), state.spans().rows(node), rule.feature);
                let at = mids.iter().position(|&t| t == rule.threshold)?;
                let mut step = (self.hyper().proposal_std * mids.len() as f64 * z).round() as i64;
                if step == 0 {
                    step = if rng.random::<bool>() { 1 } else { -1 };
                }
                let to = at as i64 + step;
                if to < 0 || to >= mids.len() as i64 {
                    return None;
                }
                mids[to as usize]
            }
        };
        if !threshold.is_finite() {
            return None;
        }
        let new_tree = tree.with_rule(node, SplitRule::new(rule.feature, threshold)).ok()?;
        Some(Proposal { kind: MoveKind::ChangeRule, tree: new_tree, log_ratio: 0.0, node })
    }

    pub fn propose<R: Rng + ?Sized>(&mut self, kind: MoveKind, state: &ChainState, rng: &mut R) -> Option<Proposal> {
        match kind {
            MoveKind::Birth => self.propose_birth(state, rng),
            MoveKind::Death => self.propose_death(state, rng),
            MoveKind::ChangeSplit => self.propose_change_split(state, rng),
            MoveKind::ChangeRule => self.propose_change_rule(state, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyper::{Hyperparameters, PriorKind};
    use crate::likelihood::{count_tree_shapes, log_tree_prior, PriorConfig};
    use crate::sampler::ChainRng;
    use rand::SeedableRng;

    fn data(n: usize, m: usize) -> Dataset {
        let rows = (0..n).map(|i| (0..m).map(|j| ((i * (j + 3) * 7) % 23) as f64 + j as f64 * 0.5).collect()).collect();
        Dataset::new(
            rows,
            (0..n).map(|i| (i * 5 % 3 == 0) as usize).collect(),
            (0..m).map(|j| format!("x{j}")).collect(),
            2,
        )
        .unwrap()
    }

    fn hyper() -> Hyperparameters {
        Hyperparameters { p_min: 1, ..Default::default() }
    }

    fn s(k: usize) -> f64 {
        count_tree_shapes(k).unwrap().to_string().parse().unwrap()
    }

    #[test]
    fn structure_ratio_examples() {
        let probs = MoveProbs::default();
        // 2 -> 3: D_Q1 = 1, S2/S3 = 1/2
        assert!(log_birth_ratio(2, 1, &probs).abs() < 1e-15);
        assert!(log_death_ratio(3, 1, &probs).abs() < 1e-15);
        // 3 -> 4 with D_Q1 in {1, 2}
        for dq1 in [1usize, 2] {
            let expected = (3.0 / dq1 as f64 * s(3) / s(4)).ln();
            assert!((log_birth_ratio(3, dq1, &probs) - expected).abs() < 1e-12);
        }
        for k in 1..=6 {
            for dq in 1..=k.max(1) {
                let sum = log_birth_ratio(k, dq, &probs) + log_death_ratio(k + 1, dq, &probs);
                assert!(sum.abs() < 1e-12, "k={k} dq={dq} sum={sum}");
            }
        }
    }

    #[test]
    fn birth_unavailable_at_cap_and_death_at_root() {
        let d = data(6, 1);
        let h = Hyperparameters { max_leaves: Some(1), ..hyper() };
        let mut sampler = Sampler::new(&d, &h).unwrap();
        let state = sampler.initial_state().unwrap();
        let mut rng = ChainRng::seed_from_u64(1);
        assert!(sampler.propose_birth(&state, &mut rng).is_none());
        assert!(sampler.propose_death(&state, &mut rng).is_none());
        assert!(sampler.propose_change_split(&state, &mut rng).is_none());
        assert!(sampler.propose_change_rule(&state, &mut rng).is_none());
    }

    #[test]
    fn hastings_plus_uniform_prior_gives_structure_ratio() {
        let d = data(40, 3);
        let h = hyper();
        let mut sampler = Sampler::new(&d, &h).unwrap();
        let cfg = PriorConfig::for_data(PriorKind::UniformLeaves, &d);
        let mut rng = ChainRng::seed_from_u64(7);
        let mut state = sampler.initial_state().unwrap();
        let mut checked = 0;
        for _ in 0..400 {
            if let Some(p) = sampler.propose_birth(&state, &mut rng) {
                let fitted = p.tree.refit(&d, 1).unwrap();
                if fitted.undersized > 0 {
                    continue;
                }
                let k = state.tree().leaf_count();
                let dp =
                    log_tree_prior(&fitted.tree, &cfg, &d).unwrap() - log_tree_prior(state.tree(), &cfg, &d).unwrap();
                let combined = p.log_ratio + dp;
                let expected = log_birth_ratio(k, fitted.tree.prunable().len(), &h.move_probs);
                assert!((combined - expected).abs() < 1e-9, "{combined} vs {expected}");

                // the matching death from the candidate reverses it exactly
                let next = sampler.state_for(fitted.tree).unwrap();
                let prunable = next.tree().prunable();
                for &node in &prunable {
                    let feature = next.tree().rule(node).unwrap().feature;
                    let n = sampler.counter().candidates(&d, next.spans().rows(node), feature);
                    let death = (h.move_probs.birth.ln() - h.move_probs.death.ln()) + (prunable.len() as f64).ln()
                        - (k as f64).ln()
                        - (3f64).ln()
                        - (n as f64).ln();
                    let collapsed = next.tree().collapse(node).unwrap();
                    if collapsed == *state.tree() {
                        assert!((death + p.log_ratio).abs() < 1e-12);
                        checked += 1;
                    }
                }
                if next.tree().leaf_count() < 7 {
                    state = next;
                }
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn change_split_ratio_is_width_ratio() {
        // two features: x0 spans [0, 2], x1 spans [0, 1] on the root's rows
        let d = Dataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![2.0, 1.0], vec![0.5, 0.2]],
            vec![0, 1, 1, 0],
            vec!["a".into(), "b".into()],
            2,
        )
        .unwrap();
        let h = hyper();
        let mut sampler = Sampler::new(&d, &h).unwrap();
        let tree = DecisionTree::leaf(2).split_leaf(0, SplitRule::new(1, 0.3)).unwrap();
        let state = sampler.state_for(tree.refit(&d, 1).unwrap().tree).unwrap();
        let mut rng = ChainRng::seed_from_u64(3);
        let mut seen = [false; 2];
        for _ in 0..100 {
            let p = sampler.propose_change_split(&state, &mut rng).unwrap();
            let f = p.tree.rule(0).unwrap().feature;
            let expected = if f == 0 { 2f64.ln() } else { 0.0 };
            assert!((p.log_ratio - expected).abs() < 1e-15);
            seen[f] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn change_rule_scales_with_feature_range() {
        let d = Dataset::new(
            (0..=100).map(|i| vec![i as f64]).collect(),
            (0..=100).map(|i| (i > 50) as usize).collect(),
            vec!["x".into()],
            2,
        )
        .unwrap();
        let h = hyper();
        let mut sampler = Sampler::new(&d, &h).unwrap();
        let tree = DecisionTree::leaf(2).split_leaf(0, SplitRule::new(0, 50.0)).unwrap();
        let state = sampler.state_for(tree.refit(&d, 1).unwrap().tree).unwrap();
        let mut rng = ChainRng::seed_from_u64(11);
        let deltas: Vec<f64> = (0..20_000)
            .map(|_| sampler.propose_change_rule(&state, &mut rng).unwrap())
            .map(|p| {
                assert_eq!(p.log_ratio, 0.0);
                p.tree.rule(0).unwrap().threshold - 50.0
            })
            .collect();
        let var = deltas.iter().map(|x| x * x).sum::<f64>() / deltas.len() as f64;
        // std 0.3 * range 100 = 30
        assert!((var.sqrt() - 30.0).abs() < 0.6, "std {}", var.sqrt());
    }

    #[test]
    fn midpoint_mode_draws_only_midpoints() {
        let d = data(12, 2);
        let h = Hyperparameters { threshold_mode: ThresholdMode::Midpoints, ..hyper() };
        let mut sampler = Sampler::new(&d, &h).unwrap();
        let state = sampler.initial_state().unwrap();
        let mut rng = ChainRng::seed_from_u64(5);
        for _ in 0..50 {
            let p = sampler.propose_birth(&state, &mut rng).unwrap();
            let rule = p.tree.rule(0).unwrap();
            let all: Vec<u32> = (0..12).collect();
            assert!(node_midpoints(&d, &all, rule.feature).contains(&rule.threshold));
        }
    }
}
