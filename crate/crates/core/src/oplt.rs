//! Fully online PLT: the tree grows with the stream while node classifiers
//! are trained.
//!
//! Every node carries a regular classifier; nodes that may still be chosen
//! to grow the tree also carry an auxiliary classifier that receives only the
//! positive updates of the node. New nodes are initialized from the
//! auxiliary classifier of the node they are attached to: an inserted
//! internal node gets copies of it, a new leaf gets an inverse wrapper over
//! it. This keeps the regular classifiers identical to what incremental
//! training on the final tree would produce.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Example, SparseVector};
use crate::error::{Error, Result};
use crate::kmeans::{build_kmeans_tree, label_representations};
use crate::learner::{LearnerConfig, NodeClassifier};
use crate::predict::{predict_class, predict_topk, Prediction};
use crate::trace::{ClassifierKind, UpdateEvent, UpdateObserver};
use crate::tree::{LabelTree, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Random,
    BestGreedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Balance/fit trade-off of the best-greedy score.
    pub alpha: f64,
    /// Maximum arity of internal nodes other than pre-leaves (b).
    pub arity: usize,
    /// Maximum arity of pre-leaves (b_max).
    pub preleaf_arity: usize,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: PolicyKind::BestGreedy,
            alpha: 0.75,
            arity: 2,
            preleaf_arity: 100,
            seed: 0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.arity < 2 {
            return Err(Error::Config(format!(
                "arity must be at least 2, got {}",
                self.arity
            )));
        }
        if self.preleaf_arity < self.arity {
            return Err(Error::Config(format!(
                "pre-leaf arity {} is below arity {}",
                self.preleaf_arity, self.arity
            )));
        }
        Ok(())
    }
}

/// Where auxiliary classifiers are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AuxRetention {
    #[default]
    All,
    /// Drop them at nodes the built-in policies can no longer select.
    Prune,
}

/// Outcome of one training step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    pub new_labels: usize,
    pub nodes_created: usize,
    /// Nodes visited by the policy descent (0 when no descent ran).
    pub policy_visits: usize,
}

#[derive(Debug, Clone)]
pub struct OpltModel {
    pub(crate) tree: LabelTree,
    pub(crate) regular: Vec<NodeClassifier>,
    pub(crate) auxiliary: Vec<Option<NodeClassifier>>,
    pub(crate) learner: LearnerConfig,
    pub(crate) policy: PolicyConfig,
    pub(crate) aux_mode: AuxRetention,
    pub(crate) rng: ChaCha8Rng,
    /// (stream position, selected node) of the last policy decision.
    pub(crate) selection: Option<(u64, NodeId)>,
    pub(crate) examples_seen: u64,
    // fault injection: skip the auxiliary update with this ordinal
    skip_aux_update: Option<u64>,
    aux_updates: u64,
    last_visits: usize,
}

impl OpltModel {
    /// A lone unlabeled root with a regular and an auxiliary classifier.
    pub fn init(
        learner: LearnerConfig,
        policy: PolicyConfig,
        aux_mode: AuxRetention,
    ) -> Result<Self> {
        Self::from_tree(LabelTree::new(), learner, policy, aux_mode)
    }

    /// Fresh regular and auxiliary classifiers at every node of `tree`.
    pub fn from_tree(
        tree: LabelTree,
        learner: LearnerConfig,
        policy: PolicyConfig,
        aux_mode: AuxRetention,
    ) -> Result<Self> {
        learner.validate()?;
        policy.validate()?;
        let n = tree.len();
        Ok(Self {
            tree,
            regular: vec![NodeClassifier::new(); n],
            auxiliary: vec![Some(NodeClassifier::new()); n],
            learner,
            policy,
            aux_mode,
            rng: ChaCha8Rng::seed_from_u64(policy.seed),
            selection: None,
            examples_seen: 0,
            skip_aux_update: None,
            aux_updates: 0,
            last_visits: 0,
        })
    }

    /// Wraps classifiers trained over a fixed tree. The result carries no
    /// auxiliary classifiers, so it predicts but cannot grow.
    pub fn from_classifiers(
        tree: LabelTree,
        regular: Vec<NodeClassifier>,
        learner: LearnerConfig,
        policy: PolicyConfig,
        examples_seen: u64,
    ) -> Result<Self> {
        if regular.len() != tree.len() {
            return Err(Error::Model(format!(
                "{} classifiers for a tree of {} nodes",
                regular.len(),
                tree.len()
            )));
        }
        let mut m = Self::from_tree(tree, learner, policy, AuxRetention::All)?;
        m.regular = regular;
        m.examples_seen = examples_seen;
        m.strip_auxiliary();
        Ok(m)
    }

    pub fn tree(&self) -> &LabelTree {
        &self.tree
    }

    pub fn regular(&self) -> &[NodeClassifier] {
        &self.regular
    }

    pub fn auxiliary(&self, v: NodeId) -> Option<&NodeClassifier> {
        self.auxiliary[v.index()].as_ref()
    }

    pub fn learner_config(&self) -> &LearnerConfig {
        &self.learner
    }

    pub fn policy_config(&self) -> &PolicyConfig {
        &self.policy
    }

    pub fn aux_mode(&self) -> AuxRetention {
        self.aux_mode
    }

    pub fn examples_seen(&self) -> u64 {
        self.examples_seen
    }

    pub fn num_auxiliary(&self) -> usize {
        self.auxiliary.iter().filter(|a| a.is_some()).count()
    }

    /// Drops every auxiliary classifier. The model can still predict but can
    /// no longer grow.
    pub fn strip_auxiliary(&mut self) {
        self.auxiliary.iter_mut().for_each(|a| *a = None);
    }

    /// Makes the `n`-th auxiliary update (0-based, counted from now) a no-op.
    #[doc(hidden)]
    pub fn inject_skipped_aux_update(&mut self, n: u64) {
        self.skip_aux_update = Some(self.aux_updates + n);
    }

    fn prepare(&self, x: &SparseVector) -> SparseVector {
        if self.learner.normalize {
            x.l2_normalized()
        } else {
            x.clone()
        }
    }

    pub fn train_example(&mut self, example: &Example) -> Result<StepReport> {
        self.train_example_observed(example, &mut ())
    }

    /// Extends the tree with unseen labels, then updates the classifiers.
    /// After return, the tree and regular classifiers form a consistent model.
    pub fn train_example_observed<O: UpdateObserver>(
        &mut self,
        example: &Example,
        observer: &mut O,
    ) -> Result<StepReport> {
        let x = self.prepare(&example.features);
        let mut report = StepReport::default();
        self.last_visits = 0;
        let new_labels: Vec<u32> = example
            .labels()
            .iter()
            .copied()
            .filter(|&l| !self.tree.contains_label(l))
            .collect();
        if !new_labels.is_empty() {
            let before = self.tree.len();
            self.update_tree(&x, &new_labels)?;
            report.new_labels = new_labels.len();
            report.nodes_created = self.tree.len() - before;
            report.policy_visits = self.last_visits;
        }
        self.update_classifiers(&x, example.labels(), observer)?;
        self.examples_seen += 1;
        Ok(report)
    }

    pub fn train_stream<'a, I>(&mut self, stream: I, passes: usize) -> Result<()>
    where
        I: IntoIterator<Item = &'a Example>,
        I::IntoIter: Clone,
    {
        if passes == 0 {
            return Err(Error::Config("passes must be at least 1".into()));
        }
        let it = stream.into_iter();
        for _ in 0..passes {
            for ex in it.clone() {
                self.train_example(ex)?;
            }
        }
        Ok(())
    }

    /// Adds a leaf for every label in `new_labels` (ascending order).
    pub fn update_tree(&mut self, x: &SparseVector, new_labels: &[u32]) -> Result<()> {
        let mut labels = new_labels.to_vec();
        labels.sort_unstable();
        labels.dedup();
        let mut touched = Vec::new();
        for j in labels {
            if self.tree.contains_label(j) {
                return Err(Error::DuplicateLabel(j));
            }
            if self.tree.num_labels() == 0 {
                let root = self.tree.root();
                self.tree.set_label(root, j)?;
                touched.push(root);
                continue;
            }
            let (v, insert) = self.policy_select(x);
            touched.push(v);
            if let Some(p) = self.tree.parent(v) {
                touched.push(p);
            }
            if insert {
                touched.push(self.insert_node(v)?);
            }
            touched.push(self.add_leaf(j, v)?);
        }
        if self.aux_mode == AuxRetention::Prune {
            for v in touched {
                self.prune_auxiliary_around(v);
            }
        }
        debug_assert!(self.tree.validate().is_ok());
        Ok(())
    }

    /// Chooses the node to extend and whether a node must be inserted below
    /// it first. The descent runs once per stream position; later calls for
    /// the same example reuse the saved node.
    pub fn policy_select(&mut self, x: &SparseVector) -> (NodeId, bool) {
        let position = self.examples_seen;
        let mut v = match self.selection {
            Some((pos, node)) if pos == position => node,
            _ => self.descend(x),
        };
        let mut leaves = self
            .tree
            .children(v)
            .iter()
            .filter(|&&c| self.tree.is_leaf(c));
        if let (Some(&only), None) = (leaves.next(), leaves.next()) {
            v = only;
        }
        self.selection = Some((position, v));
        let insert =
            self.tree.children(v).len() == self.policy.preleaf_arity || self.tree.is_leaf(v);
        (v, insert)
    }

    fn descend(&mut self, x: &SparseVector) -> NodeId {
        let tree = &self.tree;
        let mut v = tree.root();
        let mut visits = 1;
        loop {
            let ch = tree.children(v);
            if ch.iter().all(|&c| tree.is_leaf(c)) || ch.len() != self.policy.arity {
                break;
            }
            v = match self.policy.kind {
                PolicyKind::Random => ch[self.rng.gen_range(0..ch.len())],
                PolicyKind::BestGreedy => {
                    let alpha = self.policy.alpha;
                    let balance = (f64::from(tree.leaf_count(v))).ln() - (ch.len() as f64).ln();
                    let mut best: Option<(f64, NodeId)> = None;
                    for &c in ch {
                        let fit = self.regular[c.index()].predict(x, &self.learner);
                        let score = best_greedy_score(alpha, fit, tree.leaf_count(c), balance);
                        best = match best {
                            Some((s, b)) if s > score || (s == score && b < c) => Some((s, b)),
                            _ => Some((score, c)),
                        };
                    }
                    best.expect("arity >= 2").1
                }
            };
            visits += 1;
        }
        self.last_visits = visits;
        v
    }

    /// Inserts `v'` as the only child of `v` (taking over its label or its
    /// children); both its classifiers start as copies of `v`'s auxiliary one.
    pub fn insert_node(&mut self, v: NodeId) -> Result<NodeId> {
        let aux = self.auxiliary[v.index()]
            .as_ref()
            .ok_or(Error::MissingAuxiliary(v))?;
        let regular = aux.try_copy()?;
        let auxiliary = aux.try_copy()?;
        let new = self.tree.insert_below(v);
        debug_assert_eq!(new.index(), self.regular.len());
        self.regular.push(regular);
        self.auxiliary.push(Some(auxiliary));
        Ok(new)
    }

    /// Adds a leaf for label `j` under `v`. Its regular classifier is the
    /// inverse of `v`'s auxiliary one; its auxiliary classifier is fresh.
    pub fn add_leaf(&mut self, j: u32, v: NodeId) -> Result<NodeId> {
        if self.tree.contains_label(j) {
            return Err(Error::DuplicateLabel(j));
        }
        let aux = self.auxiliary[v.index()]
            .as_ref()
            .ok_or(Error::MissingAuxiliary(v))?;
        let regular = aux.try_inverse()?;
        let leaf = self.tree.add_leaf(v, j)?;
        debug_assert_eq!(leaf.index(), self.regular.len());
        self.regular.push(regular);
        self.auxiliary.push(Some(NodeClassifier::new()));
        Ok(leaf)
    }

    /// Positive updates for regular and auxiliary classifiers of positive
    /// nodes, negative updates for regular classifiers of negative nodes.
    pub fn update_classifiers<O: UpdateObserver>(
        &mut self,
        x: &SparseVector,
        labels: &[u32],
        observer: &mut O,
    ) -> Result<()> {
        let (positive, negative) = self.tree.assign_to_nodes(labels)?;
        let example = self.examples_seen as usize;
        for v in positive {
            self.regular[v.index()].update(x, true, &self.learner);
            observer.on_update(UpdateEvent {
                example,
                node: v,
                kind: ClassifierKind::Regular,
                positive: true,
            });
            if let Some(aux) = self.auxiliary[v.index()].as_mut() {
                let ordinal = self.aux_updates;
                self.aux_updates += 1;
                if self.skip_aux_update != Some(ordinal) {
                    aux.update(x, true, &self.learner);
                }
                observer.on_update(UpdateEvent {
                    example,
                    node: v,
                    kind: ClassifierKind::Auxiliary,
                    positive: true,
                });
            }
        }
        for v in negative {
            self.regular[v.index()].update(x, false, &self.learner);
            observer.on_update(UpdateEvent {
                example,
                node: v,
                kind: ClassifierKind::Regular,
                positive: false,
            });
        }
        Ok(())
    }

    fn prune_auxiliary_around(&mut self, v: NodeId) {
        self.prune_if_unselectable(v);
        let children = self.tree.children(v).to_vec();
        for c in children {
            if self.tree.is_leaf(c) {
                self.prune_if_unselectable(c);
            }
        }
    }

    /// An internal node with arity b and a non-leaf child is always passed
    /// through by the descent; a leaf whose parent has two or more leaf
    /// children is never the target of the single-leaf redirect. Neither
    /// condition can be undone by later growth.
    fn prune_if_unselectable(&mut self, v: NodeId) {
        if self.auxiliary[v.index()].is_none() {
            return;
        }
        let tree = &self.tree;
        let ch = tree.children(v);
        let unselectable = if ch.is_empty() {
            tree.parent(v).is_some_and(|p| {
                tree.children(p)
                    .iter()
                    .filter(|&&c| tree.is_leaf(c))
                    .count()
                    >= 2
            })
        } else {
            ch.len() == self.policy.arity && !ch.iter().all(|&c| tree.is_leaf(c))
        };
        if unselectable {
            self.auxiliary[v.index()] = None;
        }
    }

    fn prune_all(&mut self) {
        if self.aux_mode == AuxRetention::Prune {
            for v in self.tree.node_ids().collect::<Vec<_>>() {
                self.prune_if_unselectable(v);
            }
        }
    }

    pub fn predict_topk(&self, x: &SparseVector, k: usize) -> Prediction {
        let x = self.prepare(x);
        predict_topk(&self.tree, &self.regular, &self.learner, &x, k)
    }

    pub fn predict_class(&self, x: &SparseVector) -> Option<u32> {
        let x = self.prepare(x);
        predict_class(&self.tree, &self.regular, &self.learner, &x)
    }
}

/// `(1 − α)·fit + α·(ln|L_parent| − ln|Ch(parent)|) / |L_child|`; `balance`
/// is the parenthesized log term.
pub fn best_greedy_score(alpha: f64, fit: f64, child_leaves: u32, balance: f64) -> f64 {
    (1.0 - alpha) * fit + alpha * balance / f64::from(child_leaves)
}

/// Builds a 2-means tree over the labels of the first ⌈fraction·N⌉ examples,
/// trains regular and auxiliary classifiers on that prefix, and returns the
/// model with the prefix length. Training can continue online afterwards.
pub fn warm_start(
    data: &[Example],
    fraction: f64,
    learner: LearnerConfig,
    policy: PolicyConfig,
    aux_mode: AuxRetention,
) -> Result<(OpltModel, usize)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "warm-start fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let prefix_len = ((fraction * data.len() as f64).ceil() as usize).min(data.len());
    let prefix = &data[..prefix_len];
    let reps = label_representations(prefix);
    let mut model = if reps.is_empty() {
        OpltModel::init(learner, policy, aux_mode)?
    } else {
        let tree = build_kmeans_tree(&reps, policy.preleaf_arity, policy.seed)?;
        let mut m = OpltModel::from_tree(tree, learner, policy, aux_mode)?;
        m.prune_all();
        m
    };
    for ex in prefix {
        model.train_example(ex)?;
    }
    Ok((model, prefix_len))
}
