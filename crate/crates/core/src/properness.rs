//! Executable check that online training matches incremental training on the
//! tree it emits.
//!
//! OPLT runs over the stream. At selected prefix lengths t, IPLT is replayed
//! from scratch on the current tree over the first t examples and every
//! regular classifier is compared bit for bit. Between tree changes the replay
//! is extended one example at a time instead of restarted.

use std::fmt;

use crate::data::Example;
use crate::error::{Error, Result};
use crate::iplt::IpltModel;
use crate::oplt::OpltModel;
use crate::trace::UpdateCounter;
use crate::tree::NodeId;
use crate::weights::Slot;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prefixes {
    All,
    /// Every n-th prefix and the full stream.
    Every(usize),
    List(Vec<usize>),
}

impl Prefixes {
    fn contains(&self, t: usize, total: usize) -> bool {
        match self {
            Prefixes::All => true,
            Prefixes::Every(n) => t == total || (*n > 0 && t.is_multiple_of(*n)),
            Prefixes::List(ts) => ts.contains(&t),
        }
    }
}

/// First difference between the online and replayed classifier of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mismatch {
    pub prefix: usize,
    pub node: NodeId,
    /// `None` when weights agree but the update counts do not.
    pub feature: Option<u32>,
    pub online: Slot,
    pub replay: Slot,
    pub online_updates: u64,
    pub replay_updates: u64,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.feature {
            Some(id) => write!(
                f,
                "prefix {}: node {} feature {}: online (w={:e}, G={:e}) vs replay (w={:e}, G={:e})",
                self.prefix,
                self.node,
                id,
                self.online.weight,
                self.online.grad_sq,
                self.replay.weight,
                self.replay.grad_sq
            ),
            None => write!(
                f,
                "prefix {}: node {}: {} online updates vs {} replayed",
                self.prefix, self.node, self.online_updates, self.replay_updates
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropernessReport {
    pub examples: usize,
    pub prefixes_checked: usize,
    pub mismatch: Option<Mismatch>,
    /// Regular plus auxiliary updates issued by OPLT.
    pub online_updates: UpdateCounter,
    /// Updates IPLT issues on the final tree over the whole stream.
    pub replay_updates: u64,
    pub max_policy_visits: usize,
    /// (example index, visits, depth) of the first descent longer than the tree.
    pub visits_violation: Option<(usize, usize, usize)>,
}

impl PropernessReport {
    pub fn update_ratio(&self) -> f64 {
        if self.replay_updates == 0 {
            0.0
        } else {
            self.online_updates.total() as f64 / self.replay_updates as f64
        }
    }

    /// Exact integer form of `update_ratio() <= 2`.
    pub fn efficient(&self) -> bool {
        self.online_updates.total() <= 2 * self.replay_updates
    }

    pub fn passed(&self) -> bool {
        self.mismatch.is_none() && self.efficient() && self.visits_violation.is_none()
    }
}

/// Trains `model` on `stream` and checks it against IPLT at every prefix in
/// `prefixes`. Stops at the first mismatch. The model must be untrained.
pub fn check_properness(
    model: &mut OpltModel,
    stream: &[Example],
    prefixes: &Prefixes,
) -> Result<PropernessReport> {
    if model.examples_seen() != 0 {
        return Err(Error::Config(
            "properness is checked from an untrained model".into(),
        ));
    }
    let mut report = PropernessReport {
        examples: stream.len(),
        ..PropernessReport::default()
    };
    let mut replay: Option<IpltModel> = None;
    let mut tree_changed = false;

    for (i, ex) in stream.iter().enumerate() {
        let step = model.train_example_observed(ex, &mut report.online_updates)?;
        tree_changed |= step.new_labels > 0;
        report.max_policy_visits = report.max_policy_visits.max(step.policy_visits);
        let depth = model.tree().depth();
        if report.visits_violation.is_none() && step.policy_visits > depth {
            report.visits_violation = Some((i, step.policy_visits, depth));
        }

        let t = i + 1;
        if !prefixes.contains(t, stream.len()) {
            continue;
        }
        let r = match replay.take() {
            Some(mut r) if !tree_changed => {
                for e in &stream[r.examples_seen()..t] {
                    r.train_example(e, &mut ())?;
                }
                r
            }
            _ => {
                let mut r = IpltModel::new(model.tree().clone(), *model.learner_config())?;
                for e in &stream[..t] {
                    r.train_example(e, &mut ())?;
                }
                r
            }
        };
        tree_changed = false;
        report.prefixes_checked += 1;
        if let Some(m) = compare(model, &r, t) {
            report.mismatch = Some(m);
            return Ok(report);
        }
        replay = Some(r);
    }

    let tree = model.tree();
    for ex in stream {
        let (p, n) = tree.assign_to_nodes(ex.labels())?;
        report.replay_updates += (p.len() + n.len()) as u64;
    }
    Ok(report)
}

fn compare(model: &OpltModel, replay: &IpltModel, prefix: usize) -> Option<Mismatch> {
    for v in model.tree().node_ids() {
        let online = &model.regular()[v.index()];
        let offline = &replay.classifiers[v.index()];
        if online.equivalent_eq(offline) {
            continue;
        }
        let a = online.equivalent_direct();
        let b = offline.equivalent_direct();
        let diff = a.first_difference(&b);
        if diff.is_some() || a.update_count() != b.update_count() {
            let (feature, online, replay) = match diff {
                Some((id, x, y)) => (Some(id), x, y),
                None => (None, Slot::default(), Slot::default()),
            };
            return Some(Mismatch {
                prefix,
                node: v,
                feature,
                online,
                replay,
                online_updates: a.update_count(),
                replay_updates: b.update_count(),
            });
        }
    }
    None
}
