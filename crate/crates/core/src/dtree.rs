//! Information-gain decision tree over numeric attributes.
//!
//! Every split is binary: `x[a] <= t` goes left, `x[a] > t` goes right, with
//! candidate thresholds at midpoints between consecutive distinct values of
//! the examples reaching the node. Attributes stay available below a split,
//! so one attribute may be tested several times along a path with different
//! thresholds. There is no pruning.
//!
//! The split search is exhaustive and deterministic: candidates are visited in
//! ascending attribute index, then ascending threshold, and a later candidate
//! only replaces the incumbent when its gain is larger by more than
//! [`GAIN_EPSILON`].

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gains closer than this are treated as ties.
pub const GAIN_EPSILON: f64 = 1e-12;

/// Node sizes below which attribute scans are not parallelised.
const PARALLEL_SCAN_MIN: usize = 8192;

const TREE_FORMAT: &str = "alnid-tree";
const TREE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("class histogram is empty")]
    EmptyHistogram,
    #[error("no examples")]
    EmptyExamples,
    #[error("row has {found} values, expected {expected}")]
    RowLength { expected: usize, found: usize },
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("attribute index {0} out of range")]
    BadAttribute(usize),
    #[error("invalid tree document: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Row-major examples with integer class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl TrainingSet {
    pub fn new(n_features: usize, class_names: Vec<String>) -> Self {
        TrainingSet {
            n_features,
            features: Vec::new(),
            labels: Vec::new(),
            class_names,
        }
    }

    pub fn with_capacity(n_features: usize, class_names: Vec<String>, rows: usize) -> Self {
        TrainingSet {
            n_features,
            features: Vec::with_capacity(rows * n_features),
            labels: Vec::with_capacity(rows),
            class_names,
        }
    }

    pub fn push(&mut self, row: &[f64], label: usize) -> Result<(), TreeError> {
        if row.len() != self.n_features {
            return Err(TreeError::RowLength {
                expected: self.n_features,
                found: row.len(),
            });
        }
        if label >= self.class_names.len() {
            return Err(TreeError::BadLabel {
                label,
                classes: self.class_names.len(),
            });
        }
        self.features.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    fn value(&self, i: usize, attribute: usize) -> f64 {
        self.features[i * self.n_features + attribute]
    }

    fn histogram(&self, idx: &[usize]) -> Vec<u64> {
        let mut h = vec![0u64; self.n_classes()];
        for &i in idx {
            h[self.labels[i]] += 1;
        }
        h
    }
}

/// Shannon entropy (bits) of the class distribution given by `counts`.
pub fn class_info(counts: &[u64]) -> Result<f64, TreeError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(TreeError::EmptyHistogram);
    }
    Ok(entropy(counts, total))
}

#[inline]
fn entropy(counts: &[u64], total: u64) -> f64 {
    let n = total as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

#[inline]
fn weighted_entropy(left: &[u64], n_left: u64, right: &[u64], n_right: u64) -> f64 {
    let n = (n_left + n_right) as f64;
    let mut e = 0.0;
    if n_left > 0 {
        e += n_left as f64 / n * entropy(left, n_left);
    }
    if n_right > 0 {
        e += n_right as f64 / n * entropy(right, n_right);
    }
    e
}

/// Weighted child entropy of the binary split `x[attribute] <= threshold`.
pub fn split_entropy(
    examples: &TrainingSet,
    attribute: usize,
    threshold: f64,
) -> Result<f64, TreeError> {
    if examples.is_empty() {
        return Err(TreeError::EmptyExamples);
    }
    if attribute >= examples.n_features {
        return Err(TreeError::BadAttribute(attribute));
    }
    let k = examples.n_classes();
    let mut left = vec![0u64; k];
    let mut right = vec![0u64; k];
    for i in 0..examples.len() {
        if examples.value(i, attribute) <= threshold {
            left[examples.labels[i]] += 1;
        } else {
            right[examples.labels[i]] += 1;
        }
    }
    let (nl, nr) = (left.iter().sum(), right.iter().sum());
    Ok(weighted_entropy(&left, nl, &right, nr))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub attribute: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best information-gain split of all examples over `available` attributes,
/// or `None` when no candidate has positive gain.
pub fn best_split(examples: &TrainingSet, available: &[usize]) -> Option<SplitCandidate> {
    if examples.is_empty() {
        return None;
    }
    let idx: Vec<usize> = (0..examples.len()).collect();
    let parent = examples.histogram(&idx);
    best_split_at(examples, &idx, available, &parent)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// All (threshold, gain) candidates for one attribute, ascending threshold.
fn attribute_candidates(
    set: &TrainingSet,
    idx: &[usize],
    attribute: usize,
    parent: &[u64],
    parent_info: f64,
) -> Vec<(f64, f64)> {
    let mut order: Vec<(f64, usize)> = idx
        .iter()
        .map(|&i| (set.value(i, attribute), set.labels[i]))
        .collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let total = idx.len() as u64;
    let mut left = vec![0u64; parent.len()];
    let mut right = parent.to_vec();
    let mut out = Vec::new();
    for k in 0..order.len().saturating_sub(1) {
        let (v, label) = order[k];
        left[label] += 1;
        right[label] -= 1;
        let next = order[k + 1].0;
        if v < next {
            let n_left = k as u64 + 1;
            let e = weighted_entropy(&left, n_left, &right, total - n_left);
            out.push((midpoint(v, next), parent_info - e));
        }
    }
    out
}

fn best_split_at(
    set: &TrainingSet,
    idx: &[usize],
    available: &[usize],
    parent: &[u64],
) -> Option<SplitCandidate> {
    let total: u64 = parent.iter().sum();
    if total == 0 {
        return None;
    }
    let parent_info = entropy(parent, total);
    let mut attrs: Vec<usize> = available
        .iter()
        .copied()
        .filter(|&a| a < set.n_features)
        .collect();
    attrs.sort_unstable();
    attrs.dedup();

    let scan = |&a: &usize| (a, attribute_candidates(set, idx, a, parent, parent_info));
    let per_attr: Vec<(usize, Vec<(f64, f64)>)> = if idx.len() >= PARALLEL_SCAN_MIN {
        attrs.par_iter().map(scan).collect()
    } else {
        attrs.iter().map(scan).collect()
    };

    let mut best: Option<SplitCandidate> = None;
    for (attribute, cands) in per_attr {
        for (threshold, gain) in cands {
            if best.map_or(true, |b| gain > b.gain + GAIN_EPSILON) {
                best = Some(SplitCandidate {
                    attribute,
                    threshold,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > GAIN_EPSILON)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Nodes with fewer examples than this become leaves.
    pub min_leaf_size: usize,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf_size: 2,
            max_depth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Internal {
        attribute: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        histogram: Vec<u64>,
        class: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Left,
    Right,
}

/// One internal-node test met while descending the tree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub attribute: usize,
    pub threshold: f64,
    pub branch: Branch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Le,
    Gt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: usize,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, x: &[f64]) -> bool {
        match self.comparator {
            Comparator::Le => x[self.attribute] <= self.threshold,
            Comparator::Gt => x[self.attribute] > self.threshold,
        }
    }
}

/// A root-to-leaf path read as a conjunctive rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub class: usize,
    pub label: String,
    pub leaf: usize,
}

impl Rule {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(x))
    }

    pub fn attribute_counts(&self, n_features: usize) -> Vec<u32> {
        let mut counts = vec![0u32; n_features];
        for c in &self.conditions {
            counts[c.attribute] += 1;
        }
        counts
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IF ")?;
        if self.conditions.is_empty() {
            f.write_str("TRUE")?;
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            let op = match c.comparator {
                Comparator::Le => "<=",
                Comparator::Gt => ">",
            };
            write!(f, "a{} {} {:?}", c.attribute, op, c.threshold)?;
        }
        write!(f, " THEN {}", self.label)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    n_features: usize,
    class_names: Vec<String>,
    params: TreeParams,
    nodes: Vec<Node>,
}

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    format: String,
    version: u32,
    n_features: usize,
    class_names: Vec<String>,
    params: TreeParams,
    nodes: Vec<Node>,
}

/// Grows a tree from `examples`. Node 0 is the root; children always have
/// larger indices than their parent.
pub fn build_tree(examples: &TrainingSet, params: TreeParams) -> Result<DecisionTree, TreeError> {
    if examples.is_empty() {
        return Err(TreeError::EmptyExamples);
    }
    let all_attrs: Vec<usize> = (0..examples.n_features).collect();
    let mut nodes: Vec<Option<Node>> = vec![None];
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, (0..examples.len()).collect(), 0)];

    while let Some((slot, idx, depth)) = stack.pop() {
        let hist = examples.histogram(&idx);
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        let stop = pure
            || idx.len() < params.min_leaf_size
            || params.max_depth.is_some_and(|m| depth >= m);
        let split = if stop {
            None
        } else {
            best_split_at(examples, &idx, &all_attrs, &hist)
        };
        match split {
            None => {
                let class = majority_class(&hist, &examples.class_names);
                nodes[slot] = Some(Node::Leaf {
                    histogram: hist,
                    class,
                });
            }
            Some(c) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .partition(|&&i| examples.value(i, c.attribute) <= c.threshold);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(None);
                nodes.push(None);
                nodes[slot] = Some(Node::Internal {
                    attribute: c.attribute,
                    threshold: c.threshold,
                    left,
                    right,
                });
                stack.push((right, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
        }
    }

    Ok(DecisionTree {
        n_features: examples.n_features,
        class_names: examples.class_names.clone(),
        params,
        nodes: nodes.into_iter().map(|n| n.expect("every slot filled")).collect(),
    })
}

/// Argmax of the histogram; ties go to the lexicographically smallest name.
fn majority_class(hist: &[u64], names: &[String]) -> usize {
    let mut best = 0;
    for i in 1..hist.len() {
        if hist[i] > hist[best] || (hist[i] == hist[best] && names[i] < names[best]) {
            best = i;
        }
    }
    best
}

impl DecisionTree {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn params(&self) -> TreeParams {
        self.params
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn internal_count(&self) -> usize {
        self.node_count() - self.leaf_count()
    }

    /// Root attribute, if the root is an internal node.
    pub fn root_attribute(&self) -> Option<usize> {
        match self.nodes[0] {
            Node::Internal { attribute, .. } => Some(attribute),
            Node::Leaf { .. } => None,
        }
    }

    /// Depth of every node (root = 0).
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depth = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Internal { left, right, .. } = *n {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
            }
        }
        depth
    }

    pub fn depth(&self) -> usize {
        self.node_depths().into_iter().max().unwrap_or(0)
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        while let Node::Internal {
            attribute,
            threshold,
            left,
            right,
        } = self.nodes[at]
        {
            at = if x[attribute] <= threshold { left } else { right };
        }
        at
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { class, .. } => *class,
            Node::Internal { .. } => unreachable!("descent ends on a leaf"),
        }
    }

    pub fn predict_label(&self, x: &[f64]) -> &str {
        &self.class_names[self.predict(x)]
    }

    pub fn trace_path(&self, x: &[f64]) -> Vec<PathStep> {
        let mut path = Vec::new();
        let mut at = 0;
        while let Node::Internal {
            attribute,
            threshold,
            left,
            right,
        } = self.nodes[at]
        {
            let branch = if x[attribute] <= threshold {
                at = left;
                Branch::Left
            } else {
                at = right;
                Branch::Right
            };
            path.push(PathStep {
                attribute,
                threshold,
                branch,
            });
        }
        path
    }

    /// Per-attribute test counts along the path of `x`, without allocating the path.
    pub fn path_attribute_counts(&self, x: &[f64], counts: &mut [u32]) {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut at = 0;
        while let Node::Internal {
            attribute,
            threshold,
            left,
            right,
        } = self.nodes[at]
        {
            counts[attribute] += 1;
            at = if x[attribute] <= threshold { left } else { right };
        }
    }

    /// One rule per leaf, in depth-first (left before right) order.
    pub fn extract_rules(&self) -> Vec<Rule> {
        let mut rules = Vec::with_capacity(self.leaf_count());
        let mut stack: Vec<(usize, Vec<Condition>)> = vec![(0, Vec::new())];
        while let Some((at, conds)) = stack.pop() {
            match &self.nodes[at] {
                Node::Leaf { class, .. } => rules.push(Rule {
                    conditions: conds,
                    class: *class,
                    label: self.class_names[*class].clone(),
                    leaf: at,
                }),
                &Node::Internal {
                    attribute,
                    threshold,
                    left,
                    right,
                } => {
                    let mut r = conds.clone();
                    r.push(Condition {
                        attribute,
                        comparator: Comparator::Gt,
                        threshold,
                    });
                    let mut l = conds;
                    l.push(Condition {
                        attribute,
                        comparator: Comparator::Le,
                        threshold,
                    });
                    stack.push((right, r));
                    stack.push((left, l));
                }
            }
        }
        rules
    }

    /// Fraction of `examples` whose predicted class equals their label.
    pub fn accuracy(&self, examples: &TrainingSet) -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let hits = (0..examples.len())
            .into_par_iter()
            .filter(|&i| self.predict(examples.row(i)) == examples.label(i))
            .count();
        hits as f64 / examples.len() as f64
    }

    pub fn to_json(&self) -> Result<String, TreeError> {
        let doc = TreeDocument {
            format: TREE_FORMAT.to_string(),
            version: TREE_VERSION,
            n_features: self.n_features,
            class_names: self.class_names.clone(),
            params: self.params,
            nodes: self.nodes.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let doc: TreeDocument = serde_json::from_str(text)?;
        if doc.format != TREE_FORMAT || doc.version != TREE_VERSION {
            return Err(TreeError::Format(format!(
                "unsupported document {} v{}",
                doc.format, doc.version
            )));
        }
        validate_nodes(&doc.nodes, doc.n_features, doc.class_names.len())?;
        Ok(DecisionTree {
            n_features: doc.n_features,
            class_names: doc.class_names,
            params: doc.params,
            nodes: doc.nodes,
        })
    }
}

fn validate_nodes(nodes: &[Node], n_features: usize, n_classes: usize) -> Result<(), TreeError> {
    if nodes.is_empty() {
        return Err(TreeError::Format("no nodes".into()));
    }
    let mut parents = vec![0u32; nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        match n {
            Node::Internal {
                attribute,
                threshold,
                left,
                right,
            } => {
                if *attribute >= n_features || !threshold.is_finite() {
                    return Err(TreeError::Format(format!("node {i}: bad test")));
                }
                for &c in [left, right] {
                    if c <= i || c >= nodes.len() {
                        return Err(TreeError::Format(format!("node {i}: bad child {c}")));
                    }
                    parents[c] += 1;
                }
            }
            Node::Leaf { histogram, class } => {
                if histogram.len() != n_classes || *class >= n_classes {
                    return Err(TreeError::Format(format!("node {i}: bad leaf")));
                }
            }
        }
    }
    if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
        return Err(TreeError::Format("nodes do not form a tree".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[(&[f64], usize)], classes: usize) -> TrainingSet {
        let names = (0..classes).map(|c| format!("c{c}")).collect();
        let mut s = TrainingSet::new(rows[0].0.len(), names);
        for (r, l) in rows {
            s.push(r, *l).unwrap();
        }
        s
    }

    #[test]
    fn class_info_values() {
        assert_eq!(class_info(&[5]).unwrap(), 0.0);
        assert_eq!(class_info(&[1, 1]).unwrap(), 1.0);
        assert!((class_info(&[9, 5]).unwrap() - 0.940286).abs() < 1e-6);
        assert!(matches!(class_info(&[0, 0]), Err(TreeError::EmptyHistogram)));
        assert!(matches!(class_info(&[]), Err(TreeError::EmptyHistogram)));
    }

    fn nine_five() -> TrainingSet {
        // value 0: 6 A + 2 B, value 1: 3 A + 3 B
        let mut rows: Vec<(&[f64], usize)> = Vec::new();
        rows.extend(std::iter::repeat((&[0.0][..], 0)).take(6));
        rows.extend(std::iter::repeat((&[0.0][..], 1)).take(2));
        rows.extend(std::iter::repeat((&[1.0][..], 0)).take(3));
        rows.extend(std::iter::repeat((&[1.0][..], 1)).take(3));
        set(&rows, 2)
    }

    #[test]
    fn split_entropy_worked_example() {
        let s = nine_five();
        assert!((split_entropy(&s, 0, 0.5).unwrap() - 0.892159).abs() < 1e-6);
        let whole = class_info(&[9, 5]).unwrap();
        assert_eq!(split_entropy(&s, 0, -1.0).unwrap(), whole);
        assert_eq!(split_entropy(&s, 0, 5.0).unwrap(), whole);
    }

    #[test]
    fn split_entropy_errors() {
        let s = TrainingSet::new(1, vec!["a".into()]);
        assert!(matches!(split_entropy(&s, 0, 0.0), Err(TreeError::EmptyExamples)));
        assert!(matches!(
            split_entropy(&nine_five(), 3, 0.0),
            Err(TreeError::BadAttribute(3))
        ));
    }

    #[test]
    fn perfect_split_has_zero_entropy() {
        let s = set(&[(&[0.0], 0), (&[0.0], 0), (&[2.0], 1)], 2);
        assert_eq!(split_entropy(&s, 0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn best_split_pure_is_none() {
        let s = set(&[(&[0.0, 1.0], 0), (&[3.0, 2.0], 0)], 2);
        assert_eq!(best_split(&s, &[0, 1]), None);
    }

    #[test]
    fn best_split_perfect_separator() {
        let s = set(
            &[(&[5.0, 1.0], 0), (&[5.0, 2.0], 0), (&[1.0, 3.0], 1), (&[5.0, 4.0], 1)],
            2,
        );
        let c = best_split(&s, &[0, 1]).unwrap();
        assert_eq!((c.attribute, c.threshold), (1, 2.5));
        assert_eq!(c.gain, 1.0);
    }

    #[test]
    fn ties_prefer_lowest_attribute_then_threshold() {
        // both attributes separate perfectly
        let s = set(&[(&[0.0, 0.0], 0), (&[1.0, 1.0], 1)], 2);
        let c = best_split(&s, &[1, 0]).unwrap();
        assert_eq!((c.attribute, c.threshold), (0, 0.5));
    }

    #[test]
    fn single_leaf_for_pure_input() {
        let s = set(&[(&[0.0], 1), (&[1.0], 1)], 2);
        let t = build_tree(&s, TreeParams::default()).unwrap();
        assert_eq!((t.leaf_count(), t.depth()), (1, 0));
        assert!(t.trace_path(&[7.0]).is_empty());
        assert_eq!(t.predict(&[-100.0]), 1);
        let rules = t.extract_rules();
        assert_eq!(rules.len(), 1);
        assert!(rules[0].conditions.is_empty());
        assert_eq!(rules[0].to_string(), "IF TRUE THEN c1");
    }

    #[test]
    fn pure_xor_has_no_informative_root_split() {
        let s = set(
            &[(&[0.0, 0.0], 0), (&[0.0, 1.0], 1), (&[1.0, 0.0], 1), (&[1.0, 1.0], 0)],
            2,
        );
        assert_eq!(best_split(&s, &[0, 1]), None);
        let t = build_tree(&s, TreeParams { min_leaf_size: 1, max_depth: None }).unwrap();
        assert_eq!(t.leaf_count(), 1);
    }

    #[test]
    fn xor_like_needs_depth_two() {
        // only (0, 0) differs; both attributes must be tested to isolate it
        let s = set(
            &[(&[0.0, 0.0], 0), (&[0.0, 1.0], 1), (&[1.0, 0.0], 1), (&[1.0, 1.0], 1)],
            2,
        );
        let t = build_tree(&s, TreeParams { min_leaf_size: 1, max_depth: None }).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.accuracy(&s), 1.0);
        let rules = t.extract_rules();
        // the first split leaves one pure side, so three leaves
        assert_eq!(rules.len(), 3);
        let mut lens: Vec<usize> = rules.iter().map(|r| r.conditions.len()).collect();
        lens.sort();
        assert_eq!(lens, vec![1, 2, 2]);
    }

    #[test]
    fn empty_examples_rejected() {
        let s = TrainingSet::new(2, vec!["a".into()]);
        assert!(matches!(
            build_tree(&s, TreeParams::default()),
            Err(TreeError::EmptyExamples)
        ));
    }

    #[test]
    fn threshold_boundary_goes_left() {
        let s = set(&[(&[0.0], 0), (&[2.0], 1)], 2);
        let t = build_tree(&s, TreeParams::default()).unwrap();
        assert_eq!(t.predict(&[1.0]), 0);
        assert_eq!(t.trace_path(&[1.0])[0].branch, Branch::Left);
    }

    #[test]
    fn inconsistent_duplicates_become_majority_leaf() {
        let s = set(&[(&[1.0], 1), (&[1.0], 0), (&[1.0], 1)], 2);
        let t = build_tree(&s, TreeParams::default()).unwrap();
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.predict(&[1.0]), 1);
        // even split: lexicographically first name wins
        let s = set(&[(&[1.0], 1), (&[1.0], 0)], 2);
        assert_eq!(build_tree(&s, TreeParams::default()).unwrap().predict(&[1.0]), 0);
    }

    #[test]
    fn max_depth_and_min_leaf_size_stop_growth() {
        let s = set(
            &[(&[0.0, 0.0], 0), (&[0.0, 1.0], 1), (&[1.0, 0.0], 1), (&[1.0, 1.0], 0)],
            2,
        );
        let t = build_tree(&s, TreeParams { min_leaf_size: 1, max_depth: Some(1) }).unwrap();
        assert!(t.depth() <= 1);
        let t = build_tree(&s, TreeParams { min_leaf_size: 5, max_depth: None }).unwrap();
        assert_eq!(t.leaf_count(), 1);
    }

    #[test]
    fn rule_text_format() {
        let r = Rule {
            conditions: vec![
                Condition { attribute: 5, comparator: Comparator::Le, threshold: 2.5 },
                Condition { attribute: 0, comparator: Comparator::Gt, threshold: 1.0 },
            ],
            class: 0,
            label: "neptune".into(),
            leaf: 3,
        };
        assert_eq!(r.to_string(), "IF a5 <= 2.5 AND a0 > 1.0 THEN neptune");
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = set(
            &[(&[0.1, 0.0], 0), (&[0.3, 1.0], 1), (&[1.7, 0.0], 1), (&[1.9, 1.0], 0)],
            2,
        );
        let t = build_tree(&s, TreeParams { min_leaf_size: 1, max_depth: None }).unwrap();
        let back = DecisionTree::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);

        let mut doc: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        doc["nodes"][0]["left"] = serde_json::json!(0);
        assert!(DecisionTree::from_json(&doc.to_string()).is_err());
        doc["version"] = serde_json::json!(99);
        assert!(matches!(
            DecisionTree::from_json(&doc.to_string()),
            Err(TreeError::Format(_))
        ));
    }
}
