//! Text rendering of a single tree, one line per split:
//!
//! ```text
//! node01 X4 < 1847.05, then node02, otherwise node03
//! node02 X3 < 1713.61, then alert(0.99), otherwise alert(0.06)
//! ```
//!
//! Split nodes are numbered in breadth-first order starting from `node01`.
//! Terminals are written inline as the label name (for two classes) or the
//! majority class name (otherwise) followed by its predictive probability to
//! two decimals. Thresholds keep full precision so the diagram routes points
//! exactly like the source tree.

use std::collections::{HashMap, VecDeque};

use bdt_core::{DecisionTree, EnsembleMeta, NodeId};

use crate::error::{CliError, Result};

fn leaf_text(tree: &DecisionTree, leaf: NodeId, meta: &EnsembleMeta) -> String {
    let p = tree.leaf_proba(leaf, meta.alpha);
    if p.len() == 2 {
        format!("{}({:.2})", meta.label_name, p[1])
    } else {
        let best = (0..p.len()).fold(0, |b, c| if p[c] > p[b] { c } else { b });
        format!("{}({:.2})", meta.class_names[best], p[best])
    }
}

pub fn render(tree: &DecisionTree, meta: &EnsembleMeta) -> String {
    if tree.internal_count() == 0 {
        return format!("{}\n", leaf_text(tree, 0, meta));
    }
    let mut number: HashMap<NodeId, usize> = HashMap::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::from([0]);
    while let Some(id) = queue.pop_front() {
        if let Some((l, r)) = tree.children(id) {
            number.insert(id, order.len() + 1);
            order.push(id);
            queue.push_back(l);
            queue.push_back(r);
        }
    }
    let width = order.len().to_string().len().max(2);
    let target = |id: NodeId| match number.get(&id) {
        Some(n) => format!("node{n:0width$}"),
        None => leaf_text(tree, id, meta),
    };
    let mut out = String::new();
    for &id in &order {
        let rule = tree.rule(id).unwrap();
        let (l, r) = tree.children(id).unwrap();
        out.push_str(&format!(
            "node{:0width$} {} < {}, then {}, otherwise {}\n",
            number[&id],
            meta.feature_names[rule.feature],
            rule.threshold,
            target(l),
            target(r)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Target {
    Node(usize),
    Terminal { class: usize, probability: f64 },
}

#[derive(Debug, Clone, PartialEq)]
struct Line {
    feature: usize,
    threshold: f64,
    then: Target,
    otherwise: Target,
}

/// A tree read back from its diagram. Terminals keep only the printed
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagram {
    root: Target,
    lines: HashMap<usize, Line>,
    class_count: usize,
}

impl Diagram {
    pub fn parse(text: &str, meta: &EnsembleMeta) -> Result<Self> {
        let err = |line: usize, msg: &str| CliError::Diagram(format!("line {}: {msg}", line + 1));
        let class_count = meta.class_names.len();
        let terminal = |s: &str, ln: usize| -> Result<Target> {
            let (name, rest) = s.split_once('(').ok_or_else(|| err(ln, "bad terminal"))?;
            let p: f64 = rest
                .strip_suffix(')')
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(ln, "bad terminal probability"))?;
            let class = if class_count == 2 && name == meta.label_name {
                if p > 0.5 {
                    1
                } else {
                    0
                }
            } else {
                meta.class_names.iter().position(|c| c == name).ok_or_else(|| err(ln, "unknown class"))?
            };
            Ok(Target::Terminal { class, probability: p })
        };
        let target = |s: &str, ln: usize| -> Result<Target> {
            match s.strip_prefix("node").and_then(|n| n.parse::<usize>().ok()) {
                Some(n) => Ok(Target::Node(n)),
                None => terminal(s, ln),
            }
        };

        let body: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if body.len() == 1 && !body[0].starts_with("node") {
            return Ok(Self { root: terminal(body[0].trim(), 0)?, lines: HashMap::new(), class_count });
        }
        let mut lines = HashMap::new();
        let mut first = None;
        for (ln, raw) in body.iter().enumerate() {
            let (head, rest) = raw.trim().split_once(' ').ok_or_else(|| err(ln, "missing rule"))?;
            let id = match target(head, ln)? {
                Target::Node(n) => n,
                _ => return Err(err(ln, "line must start with a node name")),
            };
            let (question, branches) = rest.split_once(", then ").ok_or_else(|| err(ln, "missing 'then'"))?;
            let (then, otherwise) =
                branches.split_once(", otherwise ").ok_or_else(|| err(ln, "missing 'otherwise'"))?;
            let (name, thr) = question.split_once(" < ").ok_or_else(|| err(ln, "missing '<'"))?;
            let feature =
                meta.feature_names.iter().position(|f| f == name).ok_or_else(|| err(ln, "unknown feature"))?;
            let threshold: f64 = thr.parse().map_err(|_| err(ln, "bad threshold"))?;
            let line = Line { feature, threshold, then: target(then, ln)?, otherwise: target(otherwise, ln)? };
            if lines.insert(id, line).is_some() {
                return Err(err(ln, "duplicate node"));
            }
            first.get_or_insert(id);
        }
        let root = Target::Node(first.ok_or_else(|| CliError::Diagram("empty diagram".into()))?);
        let d = Self { root, lines, class_count };
        d.check()?;
        Ok(d)
    }

    /// Every referenced node exists and is reached exactly once.
    fn check(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.root.clone()];
        while let Some(t) = stack.pop() {
            if let Target::Node(n) = t {
                let line = self.lines.get(&n).ok_or_else(|| CliError::Diagram(format!("node{n:02} is not defined")))?;
                if !seen.insert(n) {
                    return Err(CliError::Diagram(format!("node{n:02} is reached twice")));
                }
                stack.push(line.then.clone());
                stack.push(line.otherwise.clone());
            }
        }
        if seen.len() != self.lines.len() {
            return Err(CliError::Diagram("diagram has unreachable nodes".into()));
        }
        Ok(())
    }

    fn terminal(&self, x: &[f64]) -> (usize, f64) {
        let mut t = &self.root;
        loop {
            match t {
                Target::Terminal { class, probability } => return (*class, *probability),
                Target::Node(n) => {
                    let line = &self.lines[n];
                    t = if x[line.feature] < line.threshold { &line.then } else { &line.otherwise };
                }
            }
        }
    }

    pub fn predict_class(&self, x: &[f64]) -> usize {
        self.terminal(x).0
    }

    /// Printed probability of the terminal `x` falls into: the last class for
    /// two-class trees, the printed class otherwise.
    pub fn printed_probability(&self, x: &[f64]) -> f64 {
        self.terminal(x).1
    }

    pub fn split_count(&self) -> usize {
        self.lines.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bdt_core::{FeatureRange, Node, SplitRule};

    fn meta() -> EnsembleMeta {
        EnsembleMeta {
            feature_names: (1..=5).map(|j| format!("X{j}")).collect(),
            label_name: "alert".into(),
            class_names: vec!["0".into(), "1".into()],
            ranges: vec![FeatureRange { min: 0.0, max: 1.0 }; 5],
            alpha: 1.0,
            hyper: None,
        }
    }

    fn leaf(a: u32, b: u32) -> Node {
        Node::Leaf { counts: vec![a, b] }
    }

    fn tree() -> DecisionTree {
        let nodes = vec![
            Node::Split { rule: SplitRule::new(3, 1847.05), left: 1, right: 2 },
            Node::Split { rule: SplitRule::new(2, 1713.61), left: 3, right: 4 },
            leaf(90, 1),
            leaf(0, 98),
            Node::Split { rule: SplitRule::new(0, -1.64), left: 5, right: 6 },
            leaf(10, 10),
            leaf(49, 1),
        ];
        DecisionTree::from_nodes(nodes, 0, 2).unwrap()
    }

    #[test]
    fn renders_breadth_first() {
        let text = render(&tree(), &meta());
        assert_eq!(
            text,
            "node01 X4 < 1847.05, then node02, otherwise alert(0.02)\n\
             node02 X3 < 1713.61, then alert(0.99), otherwise node03\n\
             node03 X1 < -1.64, then alert(0.50), otherwise alert(0.04)\n"
        );
    }

    #[test]
    fn parse_reproduces_predictions() {
        let t = tree();
        let m = meta();
        let d = Diagram::parse(&render(&t, &m), &m).unwrap();
        assert_eq!(d.split_count(), 3);
        for x in [
            [0.0, 0.0, 0.0, 0.0, 0.0],
            [-2.0, 0.0, 2000.0, 100.0, 0.0],
            [5.0, 0.0, 1713.61, 1847.0, 0.0],
            [0.0, 0.0, 0.0, 1847.05, 0.0],
        ] {
            let p = t.predict_proba(&x, 1.0).unwrap()[1];
            assert!((d.printed_probability(&x) - p).abs() <= 0.005 + 1e-12);
        }
    }

    #[test]
    fn single_leaf_and_bad_input() {
        let m = meta();
        let t = DecisionTree::from_nodes(vec![leaf(3, 1)], 0, 2).unwrap();
        let text = render(&t, &m);
        assert_eq!(text, "alert(0.33)\n");
        assert_eq!(Diagram::parse(&text, &m).unwrap().predict_class(&[0.0; 5]), 0);
        assert!(Diagram::parse("node01 X9 < 1, then alert(0.1), otherwise alert(0.2)", &m).is_err());
        assert!(Diagram::parse("node01 X1 < 1, then node02, otherwise alert(0.2)", &m).is_err());
    }
}
