//! Label tree from hierarchical balanced spherical 2-means over label
//! representations.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Example, SparseVector};
use crate::error::{Error, Result};
use crate::tree::{LabelTree, NodeId};

const MAX_ITERATIONS: usize = 25;

/// Per-label mean of the unit-normalized features of its positive examples,
/// re-normalized to unit length.
pub fn label_representations(examples: &[Example]) -> BTreeMap<u32, SparseVector> {
    let mut sums: BTreeMap<u32, BTreeMap<u32, f64>> = BTreeMap::new();
    for ex in examples {
        if ex.labels().is_empty() {
            continue;
        }
        let x = ex.features.l2_normalized();
        for &l in ex.labels() {
            let acc = sums.entry(l).or_default();
            for (id, v) in x.iter() {
                *acc.entry(id).or_default() += f64::from(v);
            }
        }
    }
    sums.into_iter()
        .map(|(l, acc)| {
            let norm = acc.values().map(|v| v * v).sum::<f64>().sqrt();
            let pairs = acc
                .into_iter()
                .map(|(id, v)| (id, if norm > 0.0 { v / norm } else { v } as f32))
                .collect();
            (l, SparseVector::from_pairs(pairs).expect("keys are unique"))
        })
        .collect()
}

/// Recursively splits labels with balanced 2-means until a cluster holds at
/// most `preleaf_arity` labels; such a cluster becomes a pre-leaf.
pub fn build_kmeans_tree(
    label_features: &BTreeMap<u32, SparseVector>,
    preleaf_arity: usize,
    seed: u64,
) -> Result<LabelTree> {
    if preleaf_arity == 0 {
        return Err(Error::Config("pre-leaf arity must be positive".into()));
    }
    let mut tree = LabelTree::new();
    if label_features.is_empty() {
        return Ok(tree);
    }
    let dim = label_features
        .values()
        .filter_map(SparseVector::max_feature)
        .max()
        .map_or(0, |m| m as usize + 1);
    let items: Vec<(u32, &SparseVector)> = label_features.iter().map(|(&l, v)| (l, v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = tree.root();
    split(&mut tree, root, items, preleaf_arity, dim, &mut rng)?;
    Ok(tree)
}

fn split(
    tree: &mut LabelTree,
    node: NodeId,
    items: Vec<(u32, &SparseVector)>,
    preleaf_arity: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if items.len() <= preleaf_arity {
        for (l, _) in items {
            tree.add_leaf(node, l)?;
        }
        return Ok(());
    }
    let (left, right) = balanced_two_means(items, dim, rng);
    let lc = tree.add_child(node);
    let rc = tree.add_child(node);
    split(tree, lc, left, preleaf_arity, dim, rng)?;
    split(tree, rc, right, preleaf_arity, dim, rng)
}

type Cluster<'a> = Vec<(u32, &'a SparseVector)>;

/// Spherical 2-means with sizes forced to ⌈n/2⌉ and ⌊n/2⌋: points are ranked
/// by the margin `sim(c0) - sim(c1)` (ties by label id) and the top half goes
/// to the first cluster.
pub(crate) fn balanced_two_means<'a>(
    items: Cluster<'a>,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> (Cluster<'a>, Cluster<'a>) {
    let n = items.len();
    let first = rng.gen_range(0..n);
    let mut second = rng.gen_range(0..n - 1);
    if second >= first {
        second += 1;
    }
    let mut centroids = [dense(items[first].1, dim), dense(items[second].1, dim)];
    let half = n.div_ceil(2);
    let mut assignment: Vec<bool> = Vec::new();

    for _ in 0..MAX_ITERATIONS {
        let mut ranked: Vec<(f64, u32, usize)> = items
            .iter()
            .enumerate()
            .map(|(i, (l, x))| {
                (
                    x.dot_dense(&centroids[0]) - x.dot_dense(&centroids[1]),
                    *l,
                    i,
                )
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut next = vec![false; n];
        for &(_, _, i) in &ranked[half..] {
            next[i] = true;
        }
        if next == assignment {
            break;
        }
        assignment = next;
        for (c, side) in centroids.iter_mut().zip([false, true]) {
            c.iter_mut().for_each(|v| *v = 0.0);
            for (i, (_, x)) in items.iter().enumerate() {
                if assignment[i] == side {
                    for (id, v) in x.iter() {
                        c[id as usize] += f64::from(v);
                    }
                }
            }
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                c.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    let mut left = Vec::with_capacity(half);
    let mut right = Vec::with_capacity(n - half);
    for (item, side) in items.into_iter().zip(assignment) {
        if side {
            right.push(item);
        } else {
            left.push(item);
        }
    }
    (left, right)
}

fn dense(x: &SparseVector, dim: usize) -> Vec<f64> {
    let mut d = vec![0.0; dim];
    for (id, v) in x.iter() {
        d[id as usize] = f64::from(v);
    }
    d
}
