//! Top-k prediction by uniform-cost search over path products, and a
//! brute-force marginal oracle.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::data::SparseVector;
use crate::learner::{LearnerConfig, NodeClassifier};
use crate::tree::{LabelTree, NodeId};

/// Labels with their estimated marginals, sorted by score (descending) then
/// label id (ascending).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prediction {
    pub items: Vec<(u32, f64)>,
}

impl Prediction {
    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.items.iter().map(|&(l, _)| l)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn top(&self) -> Option<u32> {
        self.items.first().map(|&(l, _)| l)
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    node: NodeId,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // max-heap: higher score first, then lower node id
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn by_score_then_label(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Exact top-k labels by `∏ η̂(x, v)` along the root-to-leaf path.
///
/// Scores never increase going down, so the first `k` leaves popped are a
/// top-k set. Entries tied with the k-th score are drained as well, so the
/// final cut by (score, label id) matches a full sort.
pub fn predict_topk(
    tree: &LabelTree,
    classifiers: &[NodeClassifier],
    config: &LearnerConfig,
    x: &SparseVector,
    k: usize,
) -> Prediction {
    let mut out = Vec::new();
    if k == 0 || tree.num_labels() == 0 {
        return Prediction { items: out };
    }
    let root = tree.root();
    let mut queue = BinaryHeap::new();
    queue.push(Entry {
        score: classifiers[root.index()].predict(x, config),
        node: root,
    });
    let mut threshold: Option<f64> = None;
    while let Some(Entry { score, node }) = queue.pop() {
        if let Some(t) = threshold {
            if score < t {
                break;
            }
        }
        if tree.is_leaf(node) {
            if let Some(label) = tree.label(node) {
                out.push((label, score));
                if out.len() == k {
                    threshold = Some(score);
                }
            }
        } else {
            for &c in tree.children(node) {
                queue.push(Entry {
                    score: score * classifiers[c.index()].predict(x, config),
                    node: c,
                });
            }
        }
    }
    out.sort_by(by_score_then_label);
    out.truncate(k);
    Prediction { items: out }
}

/// Most probable label; ties go to the lower label id.
pub fn predict_class(
    tree: &LabelTree,
    classifiers: &[NodeClassifier],
    config: &LearnerConfig,
    x: &SparseVector,
) -> Option<u32> {
    predict_topk(tree, classifiers, config, x, 1).top()
}

/// Evaluates every node once and multiplies along each root-to-leaf path.
pub fn predict_marginals_bruteforce(
    tree: &LabelTree,
    classifiers: &[NodeClassifier],
    config: &LearnerConfig,
    x: &SparseVector,
) -> BTreeMap<u32, f64> {
    let node_probs: Vec<f64> = classifiers.iter().map(|c| c.predict(x, config)).collect();
    let mut out = BTreeMap::new();
    for label in tree.labels() {
        let leaf = tree.leaf_of(label).expect("label maps to a leaf");
        let mut path = tree.path_to_root(leaf);
        path.reverse();
        let mut score = 1.0;
        for (i, v) in path.iter().enumerate() {
            score = if i == 0 {
                node_probs[v.index()]
            } else {
                score * node_probs[v.index()]
            };
        }
        out.insert(label, score);
    }
    out
}

/// Top-k of the brute-force marginals with the same ordering rule.
pub fn topk_bruteforce(marginals: &BTreeMap<u32, f64>, k: usize) -> Prediction {
    let mut items: Vec<(u32, f64)> = marginals.iter().map(|(&l, &s)| (l, s)).collect();
    items.sort_by(by_score_then_label);
    items.truncate(k);
    Prediction { items }
}

/// Right-hand side of the L1 estimation bound for the leaf of `label`:
/// `Σ_{v ∈ Path(leaf)} η_{pa(v)} |η(v) − η̂(v)|` with `η_{pa(root)} = 1`,
/// where `eta` and `eta_hat` hold per-node conditional probabilities.
pub fn path_estimation_bound(tree: &LabelTree, leaf: NodeId, eta: &[f64], eta_hat: &[f64]) -> f64 {
    let mut path = tree.path_to_root(leaf);
    path.reverse();
    let mut parent_marginal = 1.0;
    let mut bound = 0.0;
    for v in path {
        bound += parent_marginal * (eta[v.index()] - eta_hat[v.index()]).abs();
        parent_marginal *= eta[v.index()];
    }
    bound
}

/// Marginal of a node from per-node conditionals (root first).
pub fn path_marginal(tree: &LabelTree, v: NodeId, conditionals: &[f64]) -> f64 {
    let mut path = tree.path_to_root(v);
    path.reverse();
    path.iter()
        .fold(1.0, |acc, u| acc * conditionals[u.index()])
}
