//! Incremental PLT training over a fixed tree, plus the balanced offline
//! tree builder.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Example, SparseVector};
use crate::error::{Error, Result};
use crate::learner::{LearnerConfig, NodeClassifier};
use crate::trace::{ClassifierKind, UpdateEvent, UpdateObserver};
use crate::tree::{LabelTree, NodeId};

/// A fixed tree together with one regular classifier per node.
#[derive(Debug, Clone)]
pub struct IpltModel {
    pub tree: LabelTree,
    pub classifiers: Vec<NodeClassifier>,
    pub config: LearnerConfig,
    examples_seen: usize,
}

impl IpltModel {
    /// Fresh classifiers at every node of `tree`.
    pub fn new(tree: LabelTree, config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        let classifiers = vec![NodeClassifier::new(); tree.len()];
        Ok(Self {
            tree,
            classifiers,
            config,
            examples_seen: 0,
        })
    }

    pub fn examples_seen(&self) -> usize {
        self.examples_seen
    }

    /// Positive updates to P, then negative updates to N, in discovery order.
    pub fn train_example<O: UpdateObserver>(
        &mut self,
        example: &Example,
        observer: &mut O,
    ) -> Result<()> {
        let (positive, negative) = self.tree.assign_to_nodes(example.labels())?;
        let normalized;
        let x = if self.config.normalize {
            normalized = example.features.l2_normalized();
            &normalized
        } else {
            &example.features
        };
        let idx = self.examples_seen;
        for v in positive {
            self.classifiers[v.index()].update(x, true, &self.config);
            observer.on_update(event(idx, v, true));
        }
        for v in negative {
            self.classifiers[v.index()].update(x, false, &self.config);
            observer.on_update(event(idx, v, false));
        }
        self.examples_seen += 1;
        Ok(())
    }

    pub fn predict(&self, x: &SparseVector, k: usize) -> crate::predict::Prediction {
        let x = if self.config.normalize {
            x.l2_normalized()
        } else {
            x.clone()
        };
        crate::predict::predict_topk(&self.tree, &self.classifiers, &self.config, &x, k)
    }
}

fn event(example: usize, node: NodeId, positive: bool) -> UpdateEvent {
    UpdateEvent {
        example,
        node,
        kind: ClassifierKind::Regular,
        positive,
    }
}

/// Trains fresh classifiers on `data`, repeating the same order `passes` times.
pub fn iplt_train(
    tree: &LabelTree,
    config: &LearnerConfig,
    data: &[Example],
    passes: usize,
) -> Result<Vec<NodeClassifier>> {
    iplt_train_observed(tree, config, data, passes, &mut ())
}

pub fn iplt_train_observed<O: UpdateObserver>(
    tree: &LabelTree,
    config: &LearnerConfig,
    data: &[Example],
    passes: usize,
    observer: &mut O,
) -> Result<Vec<NodeClassifier>> {
    if passes == 0 {
        return Err(Error::Config("passes must be at least 1".into()));
    }
    // reject unknown labels before issuing any update
    for ex in data {
        if let Some(&l) = ex.labels().iter().find(|&&l| !tree.contains_label(l)) {
            return Err(Error::UnknownLabel(l));
        }
    }
    let mut model = IpltModel::new(tree.clone(), *config)?;
    for _ in 0..passes {
        for ex in data {
            model.train_example(ex, observer)?;
        }
    }
    Ok(model.classifiers)
}

/// Complete `arity`-ary tree over ⌈m / preleaf_arity⌉ pre-leaves, each holding
/// at most `preleaf_arity` label leaves. Labels are shuffled with `seed` first.
pub fn build_balanced_tree(
    labels: &[u32],
    arity: usize,
    preleaf_arity: usize,
    seed: u64,
) -> Result<LabelTree> {
    if arity < 2 || preleaf_arity < arity {
        return Err(Error::Config(format!(
            "need arity >= 2 and pre-leaf arity >= arity, got {arity} and {preleaf_arity}"
        )));
    }
    let mut labels = labels.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let mut tree = LabelTree::new();
    if labels.is_empty() {
        return Ok(tree);
    }
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let groups: Vec<&[u32]> = split_even(&labels, labels.len().div_ceil(preleaf_arity));
    let root = tree.root();
    attach_groups(&mut tree, root, &groups, arity)?;
    Ok(tree)
}

fn attach_groups(
    tree: &mut LabelTree,
    node: NodeId,
    groups: &[&[u32]],
    arity: usize,
) -> Result<()> {
    if groups.len() == 1 {
        for &l in groups[0] {
            tree.add_leaf(node, l)?;
        }
        return Ok(());
    }
    let parts = split_even(groups, arity.min(groups.len()));
    let children: Vec<NodeId> = parts.iter().map(|_| tree.add_child(node)).collect();
    for (child, part) in children.into_iter().zip(parts) {
        attach_groups(tree, child, part, arity)?;
    }
    Ok(())
}

/// Splits `items` into `parts` contiguous chunks whose sizes differ by at most one.
fn split_even<T>(items: &[T], parts: usize) -> Vec<&[T]> {
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i < extra);
        out.push(&items[start..start + len]);
        start += len;
    }
    out
}
