//! Binary model files.
//!
//! Layout (little-endian): the magic `OPLTMODL`, a `u32` format version, then
//! four sections, each a `u64` byte length followed by its payload:
//! configuration, tree, regular classifiers, auxiliary classifiers. Weight
//! entries are written in ascending feature id order so that equal models
//! produce identical bytes.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learner::{LearnerConfig, LogisticModel, NodeClassifier};
use crate::oplt::{AuxRetention, OpltModel, PolicyConfig, PolicyKind};
use crate::tree::{LabelTree, NodeId, TreeNode};
use crate::weights::{Slot, WeightStore};

pub const MAGIC: &[u8; 8] = b"OPLTMODL";
pub const VERSION: u32 = 1;

const NONE_U32: u32 = u32::MAX;

#[derive(Default)]
struct Enc {
    buf: Vec<u8>,
}

impl Enc {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
    fn section(&mut self, payload: Enc) {
        self.u64(payload.buf.len() as u64);
        self.bytes(&payload.buf);
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Dec<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Model("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Model(format!("bad boolean byte {b}"))),
        }
    }
    fn section(&mut self) -> Result<Dec<'a>> {
        let len = self.u64()?;
        let len = usize::try_from(len).map_err(|_| Error::Model("section too large".into()))?;
        Ok(Dec::new(self.take(len)?))
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Model("trailing bytes in section".into()));
        }
        Ok(())
    }
}

fn encode_classifier(e: &mut Enc, c: &NodeClassifier) {
    e.u8(u8::from(c.is_inverse()));
    let base = c.base();
    e.u64(base.update_count());
    let entries = base.weights().sorted_entries();
    e.u32(entries.len() as u32);
    for (id, slot) in entries {
        e.u32(id);
        e.f64(slot.weight);
        e.f64(slot.grad_sq);
    }
}

fn decode_classifier(d: &mut Dec) -> Result<NodeClassifier> {
    let inverse = d.bool()?;
    let count = d.u64()?;
    let n = d.u32()?;
    let mut store = WeightStore::new();
    let mut prev: Option<u32> = None;
    for _ in 0..n {
        let id = d.u32()?;
        if prev.is_some_and(|p| p >= id) {
            return Err(Error::Model("weight entries out of order".into()));
        }
        prev = Some(id);
        let weight = d.f64()?;
        let grad_sq = d.f64()?;
        store.insert(id, Slot { weight, grad_sq });
    }
    let model = LogisticModel::from_parts(store, count);
    Ok(if inverse {
        NodeClassifier::Inverse(model)
    } else {
        NodeClassifier::Direct(model)
    })
}

/// Serializes a model to bytes.
pub fn to_bytes(model: &OpltModel) -> Vec<u8> {
    let mut out = Enc::default();
    out.bytes(MAGIC);
    out.u32(VERSION);

    let mut cfg = Enc::default();
    let l = &model.learner;
    cfg.f64(l.learning_rate);
    cfg.f64(l.adagrad_epsilon);
    cfg.u8(u8::from(l.use_bias));
    cfg.u8(u8::from(l.normalize));
    let p = &model.policy;
    cfg.u8(match p.kind {
        PolicyKind::Random => 0,
        PolicyKind::BestGreedy => 1,
    });
    cfg.f64(p.alpha);
    cfg.u32(p.arity as u32);
    cfg.u32(p.preleaf_arity as u32);
    cfg.u64(p.seed);
    cfg.u8(match model.aux_mode {
        AuxRetention::All => 0,
        AuxRetention::Prune => 1,
    });
    cfg.bytes(&model.rng.get_seed());
    cfg.u64(model.rng.get_stream());
    cfg.u128(model.rng.get_word_pos());
    cfg.u64(model.examples_seen);
    match model.selection {
        Some((pos, node)) => {
            cfg.u8(1);
            cfg.u64(pos);
            cfg.u32(node.0);
        }
        None => cfg.u8(0),
    }
    out.section(cfg);

    let mut tree = Enc::default();
    let nodes = model.tree.nodes();
    tree.u32(nodes.len() as u32);
    for n in nodes {
        tree.u32(n.parent.map_or(NONE_U32, |p| p.0));
        match n.label {
            Some(l) => {
                tree.u8(1);
                tree.u32(l);
            }
            None => tree.u8(0),
        }
        tree.u32(n.children.len() as u32);
        for c in &n.children {
            tree.u32(c.0);
        }
    }
    out.section(tree);

    let mut regular = Enc::default();
    for c in &model.regular {
        encode_classifier(&mut regular, c);
    }
    out.section(regular);

    let mut aux = Enc::default();
    for a in &model.auxiliary {
        match a {
            Some(c) => {
                aux.u8(1);
                encode_classifier(&mut aux, c);
            }
            None => aux.u8(0),
        }
    }
    out.section(aux);
    out.buf
}

pub fn from_bytes(bytes: &[u8]) -> Result<OpltModel> {
    let mut d = Dec::new(bytes);
    if d.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Model("not a model file (bad magic)".into()));
    }
    let version = d.u32()?;
    if version != VERSION {
        return Err(Error::Model(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }

    let mut cfg = d.section()?;
    let learner = LearnerConfig {
        learning_rate: cfg.f64()?,
        adagrad_epsilon: cfg.f64()?,
        use_bias: cfg.bool()?,
        normalize: cfg.bool()?,
    };
    let kind = match cfg.u8()? {
        0 => PolicyKind::Random,
        1 => PolicyKind::BestGreedy,
        k => return Err(Error::Model(format!("unknown policy kind {k}"))),
    };
    let policy = PolicyConfig {
        kind,
        alpha: cfg.f64()?,
        arity: cfg.u32()? as usize,
        preleaf_arity: cfg.u32()? as usize,
        seed: cfg.u64()?,
    };
    let aux_mode = match cfg.u8()? {
        0 => AuxRetention::All,
        1 => AuxRetention::Prune,
        k => return Err(Error::Model(format!("unknown auxiliary mode {k}"))),
    };
    let seed: [u8; 32] = cfg.array()?;
    let stream = cfg.u64()?;
    let word_pos = cfg.u128()?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    let examples_seen = cfg.u64()?;
    let selection = if cfg.bool()? {
        Some((cfg.u64()?, NodeId(cfg.u32()?)))
    } else {
        None
    };
    cfg.finish()?;

    let mut t = d.section()?;
    let n = t.u32()? as usize;
    let mut nodes = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let parent = match t.u32()? {
            NONE_U32 => None,
            p => Some(NodeId(p)),
        };
        let label = if t.bool()? { Some(t.u32()?) } else { None };
        let nc = t.u32()? as usize;
        let mut children = Vec::with_capacity(nc.min(1 << 20));
        for _ in 0..nc {
            let c = t.u32()?;
            if c as usize >= n {
                return Err(Error::Model(format!("child id {c} out of range")));
            }
            children.push(NodeId(c));
        }
        if parent.is_some_and(|p| p.index() >= n) {
            return Err(Error::Model("parent id out of range".into()));
        }
        nodes.push(TreeNode {
            parent,
            children,
            label,
            leaf_count: 0,
        });
    }
    t.finish()?;
    fill_leaf_counts(&mut nodes)?;
    let tree = LabelTree::from_nodes(nodes)?;

    let mut r = d.section()?;
    let mut regular = Vec::with_capacity(tree.len());
    for _ in 0..tree.len() {
        regular.push(decode_classifier(&mut r)?);
    }
    r.finish()?;

    let mut a = d.section()?;
    let mut auxiliary = Vec::with_capacity(tree.len());
    for _ in 0..tree.len() {
        auxiliary.push(if a.bool()? {
            Some(decode_classifier(&mut a)?)
        } else {
            None
        });
    }
    a.finish()?;
    d.finish()?;

    learner
        .validate()
        .map_err(|e| Error::Model(e.to_string()))?;
    policy.validate().map_err(|e| Error::Model(e.to_string()))?;
    let mut model = OpltModel::from_tree(tree, learner, policy, aux_mode)?;
    model.regular = regular;
    model.auxiliary = auxiliary;
    model.rng = rng;
    model.selection = selection;
    model.examples_seen = examples_seen;
    Ok(model)
}

fn fill_leaf_counts(nodes: &mut [TreeNode]) -> Result<()> {
    // post-order from the root; cycles and unreachable nodes are left for validation
    let mut order = Vec::with_capacity(nodes.len());
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::Model("tree contains a cycle".into()));
        }
        order.push(v);
        stack.extend(nodes[v].children.iter().map(|c| c.index()));
    }
    for &v in order.iter().rev() {
        let sum: u32 = nodes[v]
            .children
            .iter()
            .map(|c| nodes[c.index()].leaf_count)
            .sum();
        nodes[v].leaf_count = sum + u32::from(nodes[v].label.is_some());
    }
    Ok(())
}

pub fn save_model(model: &OpltModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<OpltModel> {
    from_bytes(&fs::read(path)?)
}
