use std::collections::BTreeMap;
use std::ops::Range;

use crate::dataset::{check_point, Dataset, FeatureRange};
use crate::error::{BdtError, Result};

pub type NodeId = usize;

/// A threshold question: a point goes left iff `x[feature] < threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
}

impl SplitRule {
    pub fn new(feature: usize, threshold: f64) -> Self {
        Self { feature, threshold }
    }

    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.feature] < self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split { rule: SplitRule, left: NodeId, right: NodeId },
    Leaf { counts: Vec<u32> },
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

/// Strictly binary decision tree stored as an arena in preorder, root at 0.
///
/// Every structural edit returns a new tree re-laid out in preorder, so two
/// trees with the same shape and rules have identical node vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    class_count: usize,
}

/// Rows routed through a tree: `order` is a permutation of the row indices
/// and every node owns a contiguous span of it.
#[derive(Debug, Clone)]
pub struct Spans {
    pub order: Vec<u32>,
    pub spans: Vec<Range<usize>>,
}

impl Spans {
    pub fn rows(&self, node: NodeId) -> &[u32] {
        &self.order[self.spans[node].clone()]
    }

    pub fn len(&self, node: NodeId) -> usize {
        self.spans[node].len()
    }

    pub fn is_empty(&self, node: NodeId) -> bool {
        self.spans[node].is_empty()
    }
}

/// Result of [`DecisionTree::refit`].
#[derive(Debug, Clone)]
pub struct Refit {
    pub tree: DecisionTree,
    /// Terminal nodes holding fewer than `p_min` rows.
    pub undersized: usize,
}

impl DecisionTree {
    /// A single terminal node with zero counts.
    pub fn leaf(class_count: usize) -> Self {
        Self { nodes: vec![Node::Leaf { counts: vec![0; class_count] }], class_count }
    }

    /// Builds a tree from an arbitrary arena with root `root`. The arena is
    /// checked for strict binarity, reachability and count lengths, then
    /// re-laid out in preorder.
    pub fn from_nodes(nodes: Vec<Node>, root: NodeId, class_count: usize) -> Result<Self> {
        if root >= nodes.len() {
            return Err(BdtError::Structural("root out of range".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if id >= nodes.len() {
                return Err(BdtError::Structural(format!("child id {id} out of range")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(BdtError::Structural(format!("node {id} reachable twice")));
            }
            match &nodes[id] {
                Node::Split { left, right, rule } => {
                    if !rule.threshold.is_finite() {
                        return Err(BdtError::Structural(format!("node {id} has non-finite threshold")));
                    }
                    stack.push(*right);
                    stack.push(*left);
                }
                Node::Leaf { counts } => {
                    if counts.len() != class_count {
                        return Err(BdtError::Structural(format!(
                            "leaf {id} has {} counts, expected {class_count}",
                            counts.len()
                        )));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(BdtError::Structural("arena contains unreachable nodes".into()));
        }
        let mut tree = Self { nodes, class_count };
        tree.relayout(root);
        Ok(tree)
    }

    fn relayout(&mut self, root: NodeId) {
        let old = std::mem::take(&mut self.nodes);
        let mut out = Vec::with_capacity(old.len());
        fn copy(old: &[Node], id: NodeId, out: &mut Vec<Node>) -> NodeId {
            let me = out.len();
            match &old[id] {
                Node::Leaf { counts } => out.push(Node::Leaf { counts: counts.clone() }),
                Node::Split { rule, left, right } => {
                    out.push(Node::Split { rule: *rule, left: 0, right: 0 });
                    let l = copy(old, *left, out);
                    let r = copy(old, *right, out);
                    out[me] = Node::Split { rule: *rule, left: l, right: r };
                }
            }
            me
        }
        copy(&old, root, &mut out);
        self.nodes = out;
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_leaf()).map(|(i, _)| i)
    }

    pub fn internals(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| !n.is_leaf()).map(|(i, _)| i)
    }

    pub fn rule(&self, id: NodeId) -> Option<&SplitRule> {
        match &self.nodes[id] {
            Node::Split { rule, .. } => Some(rule),
            Node::Leaf { .. } => None,
        }
    }

    pub fn children(&self, id: NodeId) -> Option<(NodeId, NodeId)> {
        match &self.nodes[id] {
            Node::Split { left, right, .. } => Some((*left, *right)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn counts(&self, id: NodeId) -> Option<&[u32]> {
        match &self.nodes[id] {
            Node::Leaf { counts } => Some(counts),
            Node::Split { .. } => None,
        }
    }

    /// Parent of every node (`None` for the root).
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parents = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = node {
                parents[*left] = Some(id);
                parents[*right] = Some(id);
            }
        }
        parents
    }

    /// Number of splits above every node.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        // preorder: parents precede children
        for id in 0..self.nodes.len() {
            if let Node::Split { left, right, .. } = self.nodes[id] {
                depth[left] = depth[id] + 1;
                depth[right] = depth[id] + 1;
            }
        }
        depth
    }

    /// Internal nodes whose two children are both terminal.
    pub fn prunable(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match n {
                Node::Split { left, right, .. } if self.nodes[*left].is_leaf() && self.nodes[*right].is_leaf() => {
                    Some(id)
                }
                _ => None,
            })
            .collect()
    }

    /// Replaces terminal `leaf` by a split with two empty terminals.
    pub fn split_leaf(&self, leaf: NodeId, rule: SplitRule) -> Result<Self> {
        if !self.nodes.get(leaf).is_some_and(Node::is_leaf) {
            return Err(BdtError::Structural(format!("node {leaf} is not a terminal node")));
        }
        let mut nodes = self.nodes.clone();
        let l = nodes.len();
        nodes.push(Node::Leaf { counts: vec![0; self.class_count] });
        nodes.push(Node::Leaf { counts: vec![0; self.class_count] });
        nodes[leaf] = Node::Split { rule, left: l, right: l + 1 };
        let mut t = Self { nodes, class_count: self.class_count };
        t.relayout(0);
        Ok(t)
    }

    /// Collapses the subtree at `node` into one terminal carrying the summed counts.
    pub fn collapse(&self, node: NodeId) -> Result<Self> {
        if node >= self.nodes.len() {
            return Err(BdtError::Structural(format!("node {node} out of range")));
        }
        let mut counts = vec![0u32; self.class_count];
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            match &self.nodes[id] {
                Node::Leaf { counts: c } => counts.iter_mut().zip(c).for_each(|(a, b)| *a += b),
                Node::Split { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        let mut nodes = self.nodes.clone();
        nodes[node] = Node::Leaf { counts };
        let mut t = Self { nodes, class_count: self.class_count };
        t.relayout(0);
        Ok(t)
    }

    /// Replaces the rule of internal node `node`; the layout is unchanged.
    pub fn with_rule(&self, node: NodeId, rule: SplitRule) -> Result<Self> {
        let mut t = self.clone();
        match t.nodes.get_mut(node) {
            Some(Node::Split { rule: r, .. }) => {
                *r = rule;
                Ok(t)
            }
            _ => Err(BdtError::Structural(format!("node {node} is not a splitting node"))),
        }
    }

    fn check_features(&self, m: usize) -> Result<()> {
        for node in &self.nodes {
            if let Node::Split { rule, .. } = node {
                if rule.feature >= m {
                    return Err(BdtError::Structural(format!(
                        "split on feature {} but data has {m} features",
                        rule.feature
                    )));
                }
            }
        }
        Ok(())
    }

    /// Terminal node reached by `x`. No bounds checks.
    #[inline]
    pub fn route(&self, x: &[f64]) -> NodeId {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split { rule, left, right } => {
                    id = if rule.goes_left(x) { *left } else { *right };
                }
            }
        }
    }

    /// Routes every row of `data`, giving each node the span of rows reaching it.
    pub fn spans(&self, data: &Dataset) -> Result<Spans> {
        self.check_features(data.n_features())?;
        let n = data.n_rows();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut spans = vec![0..0; self.nodes.len()];
        self.fill_spans(data, &mut order, &mut spans);
        Ok(Spans { order, spans })
    }

    /// Same as [`spans`](Self::spans) but reuses caller buffers and skips
    /// feature validation.
    pub(crate) fn fill_spans(&self, data: &Dataset, order: &mut Vec<u32>, spans: &mut Vec<Range<usize>>) {
        let n = data.n_rows();
        order.clear();
        order.extend(0..n as u32);
        spans.clear();
        spans.resize(self.nodes.len(), 0..0);
        let mut stack = vec![(0usize, 0usize, n)];
        while let Some((id, lo, hi)) = stack.pop() {
            spans[id] = lo..hi;
            if let Node::Split { rule, left, right } = &self.nodes[id] {
                // stable-free in-place partition: lefts to the front
                let slice = &mut order[lo..hi];
                let mut mid = 0;
                for k in 0..slice.len() {
                    if data.value(slice[k] as usize, rule.feature) < rule.threshold {
                        slice.swap(mid, k);
                        mid += 1;
                    }
                }
                stack.push((*right, lo + mid, hi));
                stack.push((*left, lo, lo + mid));
            }
        }
    }

    /// Maps every terminal node to the rows routed to it.
    pub fn partition(&self, data: &Dataset) -> Result<BTreeMap<NodeId, Vec<usize>>> {
        let spans = self.spans(data)?;
        Ok(self
            .leaves()
            .map(|id| {
                let mut rows: Vec<usize> = spans.rows(id).iter().map(|&r| r as usize).collect();
                rows.sort_unstable();
                (id, rows)
            })
            .collect())
    }

    /// Recomputes terminal class counts from `data`.
    pub fn refit(&self, data: &Dataset, p_min: usize) -> Result<Refit> {
        let spans = self.spans(data)?;
        Ok(self.refit_with(data, &spans, p_min))
    }

    pub(crate) fn refit_with(&self, data: &Dataset, spans: &Spans, p_min: usize) -> Refit {
        let mut tree = self.clone();
        tree.class_count = data.class_count();
        let mut undersized = 0;
        for (id, node) in tree.nodes.iter_mut().enumerate() {
            if let Node::Leaf { counts } = node {
                counts.clear();
                counts.resize(data.class_count(), 0);
                for &r in spans.rows(id) {
                    counts[data.label(r as usize)] += 1;
                }
                if spans.len(id) < p_min {
                    undersized += 1;
                }
            }
        }
        Refit { tree, undersized }
    }

    /// Posterior-mean class probabilities at the terminal reached by `x`:
    /// `(n_c + alpha) / (n + C alpha)`.
    pub fn predict_proba(&self, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BdtError::Input("feature vector contains non-finite values".into()));
        }
        let max_feature = self.nodes.iter().filter_map(|n| match n {
            Node::Split { rule, .. } => Some(rule.feature),
            _ => None,
        });
        if let Some(f) = max_feature.max() {
            if f >= x.len() {
                return Err(BdtError::Schema { expected: f + 1, actual: x.len() });
            }
        }
        Ok(self.leaf_proba(self.route(x), alpha))
    }

    /// Same as [`predict_proba`](Self::predict_proba), checking `x` against a known width.
    pub fn predict_proba_checked(&self, x: &[f64], m: usize, alpha: f64) -> Result<Vec<f64>> {
        check_point(x, m)?;
        Ok(self.leaf_proba(self.route(x), alpha))
    }

    pub fn leaf_proba(&self, leaf: NodeId, alpha: f64) -> Vec<f64> {
        let counts = self.counts(leaf).expect("terminal node");
        let total: u32 = counts.iter().sum();
        let denom = total as f64 + self.class_count as f64 * alpha;
        counts.iter().map(|&c| (c as f64 + alpha) / denom).collect()
    }

    /// Majority class at the terminal reached by `x`; ties go to the lowest index.
    pub fn predict_class(&self, x: &[f64]) -> usize {
        let counts = self.counts(self.route(x)).expect("terminal node");
        argmax_u32(counts)
    }

    /// Same shape, same split features, thresholds within `tol` on the
    /// normalized scale given by `ranges`.
    pub fn same_structure(&self, other: &Self, ranges: &[FeatureRange], tol: f64) -> bool {
        if self.nodes.len() != other.nodes.len() {
            return false;
        }
        self.nodes.iter().zip(&other.nodes).all(|(a, b)| match (a, b) {
            (Node::Leaf { .. }, Node::Leaf { .. }) => true,
            (Node::Split { rule: ra, left: la, right: rra }, Node::Split { rule: rb, left: lb, right: rrb }) => {
                la == lb
                    && rra == rrb
                    && ra.feature == rb.feature
                    && ranges.get(ra.feature).map_or(ra.threshold == rb.threshold, |r| {
                        ((ra.threshold - rb.threshold) / r.scale()).abs() <= tol
                    })
            }
            _ => false,
        })
    }
}

pub(crate) fn argmax_u32(xs: &[u32]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn argmax_f64(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn data(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Dataset {
        let m = rows[0].len();
        Dataset::new(rows, labels, (0..m).map(|j| format!("x{j}")).collect(), 2).unwrap()
    }

    fn stump(feature: usize, threshold: f64) -> DecisionTree {
        DecisionTree::leaf(2).split_leaf(0, SplitRule::new(feature, threshold)).unwrap()
    }

    /// Three-leaf chain: x0 < 0.5 ? leaf : (x1 < 0.5 ? leaf : leaf).
    fn chain3() -> DecisionTree {
        let t = stump(0, 0.5);
        let right = t.children(0).unwrap().1;
        t.split_leaf(right, SplitRule::new(1, 0.5)).unwrap()
    }

    #[test]
    fn single_leaf_partition() {
        let d = data((0..5).map(|i| vec![i as f64]).collect(), vec![0, 1, 0, 1, 0]);
        let p = DecisionTree::leaf(2).partition(&d).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[&0], vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn stump_routes_by_strict_less_than() {
        let d = data(vec![vec![0.1], vec![0.9], vec![0.5]], vec![0, 1, 1]);
        let t = stump(0, 0.5);
        let (l, r) = t.children(0).unwrap();
        let p = t.partition(&d).unwrap();
        assert_eq!(p[&l], vec![0]);
        // equality goes right
        assert_eq!(p[&r], vec![1, 2]);
    }

    #[test]
    fn chain_partition_matches_row_walk() {
        let rows = vec![
            vec![0.1, 0.1],
            vec![0.1, 0.9],
            vec![0.7, 0.2],
            vec![0.7, 0.8],
            vec![0.5, 0.5],
            vec![0.49, 0.51],
            vec![0.9, 0.49],
            vec![0.3, 0.0],
        ];
        let d = data(rows.clone(), vec![0, 1, 0, 1, 0, 1, 0, 1]);
        let t = chain3();
        let p = t.partition(&d).unwrap();
        // independent walk: explicit nested conditionals on the fixture
        let (l0, r0) = t.children(0).unwrap();
        let (l1, r1) = t.children(r0).unwrap();
        let mut expected: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (i, x) in rows.iter().enumerate() {
            let leaf = if x[0] < 0.5 {
                l0
            } else if x[1] < 0.5 {
                l1
            } else {
                r1
            };
            expected.entry(leaf).or_default().push(i);
        }
        assert_eq!(p, expected);
    }

    #[test]
    fn out_of_range_feature_is_structural_error() {
        let d = data(vec![vec![0.1], vec![0.9]], vec![0, 1]);
        let t = stump(3, 0.5);
        assert!(matches!(t.partition(&d), Err(BdtError::Structural(_))));
    }

    #[test]
    fn refit_conserves_and_counts_violations() {
        let d = data((0..10).map(|i| vec![i as f64]).collect(), vec![0, 1, 0, 1, 0, 1, 0, 1, 1, 1]);
        let t = stump(0, 3.0);
        let r = t.refit(&d, 5).unwrap();
        let total: u32 = r.tree.leaves().map(|l| r.tree.counts(l).unwrap().iter().sum::<u32>()).sum();
        assert_eq!(total, 10);
        assert_eq!(r.undersized, 1);
        let (l, rr) = r.tree.children(0).unwrap();
        assert_eq!(r.tree.counts(l).unwrap(), &[2, 1]);
        assert_eq!(r.tree.counts(rr).unwrap(), &[2, 5]);
    }

    #[test]
    fn leaf_posterior_mean() {
        let mut t = DecisionTree::leaf(2);
        t.nodes[0] = Node::Leaf { counts: vec![3, 1] };
        let p = t.predict_proba(&[0.0], 1.0).unwrap();
        assert!((p[0] - 4.0 / 6.0).abs() < 1e-12 && (p[1] - 2.0 / 6.0).abs() < 1e-12);
        t.nodes[0] = Node::Leaf { counts: vec![0, 0] };
        assert_eq!(t.predict_proba(&[0.0], 1.0).unwrap(), vec![0.5, 0.5]);
        t.nodes[0] = Node::Leaf { counts: vec![5, 0] };
        let p = t.predict_proba(&[0.0], 1.0).unwrap();
        assert!((p[0] - 6.0 / 7.0).abs() < 1e-12 && (p[1] - 1.0 / 7.0).abs() < 1e-12);
        assert!(t.predict_proba(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn split_and_collapse_are_inverse() {
        let t = chain3();
        assert_eq!(t.leaf_count(), 3);
        assert_eq!(t.internal_count(), 2);
        let (_, r0) = t.children(0).unwrap();
        assert_eq!(t.prunable(), vec![r0]);
        let back = t.collapse(r0).unwrap();
        assert_eq!(back.nodes(), stump(0, 0.5).nodes());
        assert_eq!(t.depths(), vec![0, 1, 1, 2, 2]);
    }

    #[test]
    fn from_nodes_rejects_bad_arenas() {
        let leaf = || Node::Leaf { counts: vec![0, 0] };
        let split = |l, r| Node::Split { rule: SplitRule::new(0, 0.0), left: l, right: r };
        assert!(DecisionTree::from_nodes(vec![split(1, 1), leaf()], 0, 2).is_err());
        assert!(DecisionTree::from_nodes(vec![split(1, 5), leaf()], 0, 2).is_err());
        assert!(DecisionTree::from_nodes(vec![leaf(), leaf()], 0, 2).is_err());
        let t = DecisionTree::from_nodes(vec![leaf(), split(2, 0), leaf()], 1, 2).unwrap();
        assert_eq!(t.nodes(), stump(0, 0.0).nodes());
    }

    fn random_tree(splits: &[(usize, usize, f64)], m: usize) -> DecisionTree {
        let mut t = DecisionTree::leaf(2);
        for &(pick, f, thr) in splits {
            let leaves: Vec<_> = t.leaves().collect();
            t = t.split_leaf(leaves[pick % leaves.len()], SplitRule::new(f % m, thr)).unwrap();
        }
        t
    }

    proptest! {
        #[test]
        fn partition_complete_and_counts_conserved(
            splits in prop::collection::vec((0usize..8, 0usize..3, 0.0f64..1.0), 0..6),
            rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 2..30),
            seed in 0usize..100,
        ) {
            let n = rows.len();
            let labels: Vec<usize> = (0..n).map(|i| (i + seed) % 2).collect();
            let d = data(rows, labels.clone());
            let t = random_tree(&splits, 3);
            prop_assert_eq!(t.internal_count() + 1, t.leaf_count());
            let p = t.partition(&d).unwrap();
            let mut all: Vec<usize> = p.values().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let r = t.refit(&d, 1).unwrap();
            let mut total = 0u32;
            for leaf in r.tree.leaves() {
                // histogram oracle over the partition
                let mut hist = [0u32; 2];
                for &i in &p[&leaf] { hist[labels[i]] += 1; }
                prop_assert_eq!(r.tree.counts(leaf).unwrap(), &hist[..]);
                total += hist.iter().sum::<u32>();
                let probs = r.tree.leaf_proba(leaf, 1.0);
                prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(probs.iter().all(|&q| q > 0.0));
            }
            prop_assert_eq!(total as usize, n);
        }
    }
}
