//! Rooted, leaf-labeled label tree and positive/negative node assignment.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Dense node index, assigned in creation order and never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TreeNode {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub label: Option<u32>,
    /// Number of labeled leaves in the subtree (|L_v|).
    pub leaf_count: u32,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelTree {
    nodes: Vec<TreeNode>,
    label_to_leaf: HashMap<u32, NodeId>,
}

impl Default for LabelTree {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelTree {
    /// A tree holding only an unlabeled root.
    pub fn new() -> Self {
        Self {
            nodes: vec![TreeNode::default()],
            label_to_leaf: HashMap::new(),
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_labels(&self) -> usize {
        self.label_to_leaf.len()
    }

    pub fn node(&self, v: NodeId) -> &TreeNode {
        &self.nodes[v.index()]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v.index()].parent
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v.index()].children
    }

    pub fn label(&self, v: NodeId) -> Option<u32> {
        self.nodes[v.index()].label
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.nodes[v.index()].is_leaf()
    }

    pub fn leaf_count(&self, v: NodeId) -> u32 {
        self.nodes[v.index()].leaf_count
    }

    pub fn leaf_of(&self, label: u32) -> Option<NodeId> {
        self.label_to_leaf.get(&label).copied()
    }

    pub fn contains_label(&self, label: u32) -> bool {
        self.label_to_leaf.contains_key(&label)
    }

    /// Labels in ascending order.
    pub fn labels(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.label_to_leaf.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// `[v, pa(v), ..., root]`.
    pub fn path_to_root(&self, v: NodeId) -> Vec<NodeId> {
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path
    }

    /// len_v: number of nodes on the path from `v` to the root.
    pub fn path_len(&self, v: NodeId) -> usize {
        let mut n = 1;
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            n += 1;
            cur = p;
        }
        n
    }

    /// Maximum path length (in nodes) from a leaf to the root.
    pub fn depth(&self) -> usize {
        let mut depth = 0;
        // node ids are not topologically ordered after insertions
        let mut stack = vec![(self.root(), 1usize)];
        while let Some((v, l)) = stack.pop() {
            depth = depth.max(l);
            for &c in self.children(v) {
                stack.push((c, l + 1));
            }
        }
        depth
    }

    /// Every node whose children are all leaves.
    pub fn is_preleaf(&self, v: NodeId) -> bool {
        let ch = self.children(v);
        !ch.is_empty() && ch.iter().all(|&c| self.is_leaf(c))
    }

    fn push_node(&mut self, node: TreeNode) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        id
    }

    fn bump_leaf_counts(&mut self, from: NodeId, delta: u32) {
        let mut cur = Some(from);
        while let Some(v) = cur {
            self.nodes[v.index()].leaf_count += delta;
            cur = self.nodes[v.index()].parent;
        }
    }

    /// Appends an unlabeled child to `parent`.
    pub fn add_child(&mut self, parent: NodeId) -> NodeId {
        let id = self.push_node(TreeNode {
            parent: Some(parent),
            ..TreeNode::default()
        });
        self.nodes[parent.index()].children.push(id);
        id
    }

    /// Appends a labeled leaf to `parent`.
    pub fn add_leaf(&mut self, parent: NodeId, label: u32) -> Result<NodeId> {
        if self.label_to_leaf.contains_key(&label) {
            return Err(Error::DuplicateLabel(label));
        }
        if self.nodes[parent.index()].label.is_some() {
            return Err(Error::Logic(format!(
                "cannot attach a leaf under labeled node {parent}"
            )));
        }
        let id = self.add_child(parent);
        self.nodes[id.index()].label = Some(label);
        self.label_to_leaf.insert(label, id);
        self.bump_leaf_counts(id, 1);
        Ok(id)
    }

    /// Labels a childless, unlabeled node.
    pub fn set_label(&mut self, v: NodeId, label: u32) -> Result<()> {
        if self.label_to_leaf.contains_key(&label) {
            return Err(Error::DuplicateLabel(label));
        }
        let node = &self.nodes[v.index()];
        if !node.children.is_empty() || node.label.is_some() {
            return Err(Error::Logic(format!(
                "node {v} must be an unlabeled leaf to receive a label"
            )));
        }
        self.nodes[v.index()].label = Some(label);
        self.label_to_leaf.insert(label, v);
        self.bump_leaf_counts(v, 1);
        Ok(())
    }

    /// Inserts a new node `v'` as the sole child of `v`. A label on `v`
    /// moves to `v'`; otherwise all children of `v` are re-parented to `v'`.
    /// Leaves `v` with exactly one child until the caller attaches another.
    pub fn insert_below(&mut self, v: NodeId) -> NodeId {
        let moved_children = std::mem::take(&mut self.nodes[v.index()].children);
        let label = self.nodes[v.index()].label.take();
        let leaf_count = self.nodes[v.index()].leaf_count;
        let new = self.push_node(TreeNode {
            parent: Some(v),
            children: moved_children,
            label,
            leaf_count,
        });
        let children = self.nodes[new.index()].children.clone();
        for c in children {
            self.nodes[c.index()].parent = Some(new);
        }
        if let Some(l) = label {
            self.label_to_leaf.insert(l, new);
        }
        self.nodes[v.index()].children.push(new);
        new
    }

    /// Positive and negative nodes for a label set, in discovery order.
    ///
    /// Walks from each label's leaf towards the root, stopping at the first
    /// node already marked positive. Children of visited nodes that are not
    /// positive become negative; the root starts out negative so that an
    /// example without labels is a negative for the root.
    pub fn assign_to_nodes(&self, labels: &[u32]) -> Result<(Vec<NodeId>, Vec<NodeId>)> {
        let mut leaves = Vec::with_capacity(labels.len());
        for &l in labels {
            leaves.push(self.leaf_of(l).ok_or(Error::UnknownLabel(l))?);
        }
        // sparse marks keep the cost proportional to the touched nodes
        let mut marks: HashMap<NodeId, Mark> = HashMap::new();
        let mut positive = Vec::new();
        let mut negative = vec![self.root()];
        marks.insert(self.root(), Mark::Negative);

        for leaf in leaves {
            let mut cur = Some(leaf);
            while let Some(v) = cur {
                if marks.get(&v) == Some(&Mark::Positive) {
                    break;
                }
                if marks.insert(v, Mark::Positive) == Some(Mark::Negative) {
                    negative.retain(|&n| n != v);
                }
                positive.push(v);
                for &c in self.children(v) {
                    if let Entry::Vacant(e) = marks.entry(c) {
                        e.insert(Mark::Negative);
                        negative.push(c);
                    }
                }
                cur = self.parent(v);
            }
        }
        Ok((positive, negative))
    }

    /// Structural invariant check; returns every violation found.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let roots: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].parent.is_none())
            .collect();
        if roots != [0] {
            errs.push(format!("expected node 0 as the only root, found {roots:?}"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            let id = NodeId(i as u32);
            if let Some(p) = n.parent {
                if p.index() >= self.nodes.len() {
                    errs.push(format!("node {i}: parent {p} out of range"));
                } else if !self.nodes[p.index()].children.contains(&id) {
                    errs.push(format!("node {i}: parent {p} does not list it as a child"));
                }
            }
            for &c in &n.children {
                if c.index() >= self.nodes.len() {
                    errs.push(format!("node {i}: child {c} out of range"));
                } else if self.nodes[c.index()].parent != Some(id) {
                    errs.push(format!("node {i}: child {c} has a different parent"));
                }
            }
            if n.label.is_some() && !n.children.is_empty() {
                errs.push(format!("node {i}: labeled but has children"));
            }
            if let Some(l) = n.label {
                if self.label_to_leaf.get(&l) != Some(&id) {
                    errs.push(format!("node {i}: label {l} not mapped back to it"));
                }
            }
        }
        for (&l, &v) in &self.label_to_leaf {
            if v.index() >= self.nodes.len() || self.nodes[v.index()].label != Some(l) {
                errs.push(format!(
                    "label {l}: mapped to node {v} which does not carry it"
                ));
            }
        }
        if errs.is_empty() {
            // reachability, acyclicity and leaf counts
            let mut seen = vec![false; self.nodes.len()];
            let mut order = Vec::new();
            let mut stack = vec![self.root()];
            while let Some(v) = stack.pop() {
                if seen[v.index()] {
                    errs.push(format!("node {v} reached twice"));
                    continue;
                }
                seen[v.index()] = true;
                order.push(v);
                stack.extend(self.children(v).iter().copied());
            }
            if let Some(i) = seen.iter().position(|s| !s) {
                errs.push(format!("node {i} unreachable from the root"));
            }
            if errs.is_empty() {
                let mut counts = vec![0u32; self.nodes.len()];
                for &v in order.iter().rev() {
                    let n = self.node(v);
                    counts[v.index()] = u32::from(n.label.is_some())
                        + n.children.iter().map(|c| counts[c.index()]).sum::<u32>();
                    if counts[v.index()] != n.leaf_count {
                        errs.push(format!(
                            "node {v}: leaf count {} but subtree holds {}",
                            n.leaf_count,
                            counts[v.index()]
                        ));
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// One line per node: `id parent label`, with `-` for none.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
            let label = n.label.map_or("-".to_string(), |l| l.to_string());
            out.push_str(&format!("{i} {parent} {label}\n"));
        }
        out
    }

    /// Rebuilds a tree from raw nodes (used by the model reader).
    pub(crate) fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Model("tree without nodes".into()));
        }
        let mut label_to_leaf = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if let Some(l) = n.label {
                if label_to_leaf.insert(l, NodeId(i as u32)).is_some() {
                    return Err(Error::Model(format!("label {l} appears twice")));
                }
            }
        }
        let tree = Self {
            nodes,
            label_to_leaf,
        };
        tree.validate()
            .map_err(|e| Error::Model(format!("invalid tree: {}", e.join("; "))))?;
        Ok(tree)
    }

    #[cfg(test)]
    pub(crate) fn nodes_mut(&mut self) -> &mut Vec<TreeNode> {
        &mut self.nodes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Positive,
    Negative,
}
