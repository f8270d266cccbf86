//! Online logistic node classifiers with AdaGrad updates.
//!
//! A node classifier is either a direct logistic model or an inverse wrapper
//! around one. The wrapper predicts `1 - p` of its base and applies every
//! update to the base with the target flipped.
//!
//! The gradient residual is evaluated as `σ(z)` for a negative target and
//! `-σ(-z)` for a positive one. This equals `σ(z) - y` and makes an update of
//! a model with negated weights and flipped target the exact negation of the
//! direct update, so an inverse wrapper and the direct model it stands in for
//! stay bitwise mirror images of each other.

use crate::data::SparseVector;
use crate::error::{Error, Result};
use crate::weights::{Slot, WeightStore};

/// Reserved coordinate for the bias term.
pub const BIAS_ID: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    pub adagrad_epsilon: f64,
    pub use_bias: bool,
    /// L2-normalize features before training and prediction.
    pub normalize: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            adagrad_epsilon: 0.01,
            use_bias: true,
            normalize: true,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.adagrad_epsilon > 0.0 && self.adagrad_epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "AdaGrad epsilon must be positive, got {}",
                self.adagrad_epsilon
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Logistic model over a sparse weight store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogisticModel {
    weights: WeightStore,
    update_count: u64,
}

impl LogisticModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub(crate) fn from_parts(weights: WeightStore, update_count: u64) -> Self {
        Self {
            weights,
            update_count,
        }
    }

    pub fn margin(&self, x: &SparseVector, use_bias: bool) -> f64 {
        let mut z = 0.0;
        for (id, v) in x.iter() {
            z += self.weights.weight(id) * f64::from(v);
        }
        if use_bias {
            z += self.weights.weight(BIAS_ID);
        }
        z
    }

    pub fn predict(&self, x: &SparseVector, use_bias: bool) -> f64 {
        sigmoid(self.margin(x, use_bias))
    }

    pub fn update(&mut self, x: &SparseVector, positive: bool, config: &LearnerConfig) {
        let z = self.margin(x, config.use_bias);
        let residual = if positive { -sigmoid(-z) } else { sigmoid(z) };
        let lr = config.learning_rate;
        let eps = config.adagrad_epsilon;
        let mut step = |id: u32, xi: f64| {
            let g = residual * xi;
            let slot = self.weights.entry(id);
            slot.grad_sq += g * g;
            slot.weight -= lr * g / (slot.grad_sq + eps).sqrt();
        };
        for (id, v) in x.iter() {
            step(id, f64::from(v));
        }
        if config.use_bias {
            step(BIAS_ID, 1.0);
        }
        self.update_count += 1;
    }

    /// The model with every weight negated; accumulators are unchanged.
    pub fn negated(&self) -> Self {
        let mut weights = WeightStore::new();
        for (id, slot) in self.weights.sorted_entries() {
            weights.insert(
                id,
                Slot {
                    weight: -slot.weight,
                    grad_sq: slot.grad_sq,
                },
            );
        }
        Self {
            weights,
            update_count: self.update_count,
        }
    }

    /// Bitwise equality of the stored state (weights, accumulators and count).
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.first_difference(other).is_none()
    }

    /// First coordinate whose stored bits differ, with both slots.
    pub fn first_difference(&self, other: &Self) -> Option<(u32, Slot, Slot)> {
        let a = self.weights.sorted_entries();
        let b = other.weights.sorted_entries();
        let mut ia = a.iter().peekable();
        let mut ib = b.iter().peekable();
        loop {
            match (ia.peek(), ib.peek()) {
                (None, None) => break,
                (Some(&&(k, s)), None) => return Some((k, s, Slot::default())),
                (None, Some(&&(k, s))) => return Some((k, Slot::default(), s)),
                (Some(&&(ka, sa)), Some(&&(kb, sb))) => {
                    if ka < kb {
                        return Some((ka, sa, Slot::default()));
                    }
                    if kb < ka {
                        return Some((kb, Slot::default(), sb));
                    }
                    if sa.weight.to_bits() != sb.weight.to_bits()
                        || sa.grad_sq.to_bits() != sb.grad_sq.to_bits()
                    {
                        return Some((ka, sa, sb));
                    }
                    ia.next();
                    ib.next();
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeClassifier {
    Direct(LogisticModel),
    /// Predicts `1 - p(base)`; updates reach the base with flipped targets.
    Inverse(LogisticModel),
}

impl Default for NodeClassifier {
    fn default() -> Self {
        NodeClassifier::Direct(LogisticModel::new())
    }
}

impl NodeClassifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_inverse(&self) -> bool {
        matches!(self, NodeClassifier::Inverse(_))
    }

    /// The owned direct model (the base, for an inverse wrapper).
    pub fn base(&self) -> &LogisticModel {
        match self {
            NodeClassifier::Direct(m) | NodeClassifier::Inverse(m) => m,
        }
    }

    pub fn update_count(&self) -> u64 {
        self.base().update_count()
    }

    pub fn predict(&self, x: &SparseVector, config: &LearnerConfig) -> f64 {
        match self {
            NodeClassifier::Direct(m) => m.predict(x, config.use_bias),
            NodeClassifier::Inverse(base) => 1.0 - base.predict(x, config.use_bias),
        }
    }

    pub fn update(&mut self, x: &SparseVector, positive: bool, config: &LearnerConfig) {
        match self {
            NodeClassifier::Direct(m) => m.update(x, positive, config),
            NodeClassifier::Inverse(base) => base.update(x, !positive, config),
        }
    }

    /// Deep copy of a direct classifier. Copying an inverse wrapper is rejected.
    pub fn try_copy(&self) -> Result<Self> {
        match self {
            NodeClassifier::Direct(m) => Ok(NodeClassifier::Direct(m.clone())),
            NodeClassifier::Inverse(_) => {
                Err(Error::Logic("cannot copy an inverse classifier".into()))
            }
        }
    }

    /// Inverse wrapper over a deep copy of this (direct) classifier.
    pub fn try_inverse(&self) -> Result<Self> {
        match self {
            NodeClassifier::Direct(m) => Ok(NodeClassifier::Inverse(m.clone())),
            NodeClassifier::Inverse(_) => Err(Error::Logic(
                "inverse wrappers are only built over direct classifiers".into(),
            )),
        }
    }

    /// Bitwise equality of the equivalent direct models, without building them.
    pub fn equivalent_eq(&self, other: &Self) -> bool {
        let sign = |c: &Self| if c.is_inverse() { -1.0 } else { 1.0 };
        let (a, b) = (self.base(), other.base());
        let flip = sign(self) * sign(other);
        a.update_count() == b.update_count()
            && a.weights().len() == b.weights().len()
            && a.weights().iter().all(|(id, s)| {
                b.weights().get(id).is_some_and(|t| {
                    s.weight.to_bits() == (flip * t.weight).to_bits()
                        && s.grad_sq.to_bits() == t.grad_sq.to_bits()
                })
            })
    }

    /// The direct model with the same predictive function. For an inverse
    /// wrapper this is the base with negated weights.
    pub fn equivalent_direct(&self) -> LogisticModel {
        match self {
            NodeClassifier::Direct(m) => m.clone(),
            NodeClassifier::Inverse(base) => base.negated(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(bias: bool) -> LearnerConfig {
        LearnerConfig {
            learning_rate: 1.0,
            adagrad_epsilon: 0.01,
            use_bias: bias,
            normalize: false,
        }
    }

    fn sv(pairs: &[(u32, f32)]) -> SparseVector {
        SparseVector::from_pairs(pairs.to_vec()).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, dim: u32) -> SparseVector {
        let n = rng.gen_range(1..6);
        let mut pairs = Vec::new();
        for _ in 0..n {
            let id = rng.gen_range(0..dim);
            if pairs.iter().all(|&(i, _)| i != id) {
                pairs.push((id, rng.gen_range(-1.0f32..1.0)));
            }
        }
        SparseVector::from_pairs(pairs).unwrap()
    }

    #[test]
    fn fresh_predicts_half() {
        let c = NodeClassifier::new();
        assert_eq!(c.predict(&sv(&[(0, 1.0), (9, -3.0)]), &cfg(true)), 0.5);
        assert_eq!(c.update_count(), 0);
        assert_eq!(c, NodeClassifier::new());
    }

    #[test]
    fn sigmoid_of_one() {
        let mut m = LogisticModel::new();
        m.weights.insert(
            0,
            Slot {
                weight: 1.0,
                grad_sq: 0.0,
            },
        );
        let x = sv(&[(0, 1.0)]);
        let c = NodeClassifier::Direct(m);
        // 1 / (1 + e^-1)
        assert!((c.predict(&x, &cfg(false)) - 0.7310585786).abs() < 1e-10);
        let inv = c.try_inverse().unwrap();
        assert!((inv.predict(&x, &cfg(false)) - 0.2689414214).abs() < 1e-10);
    }

    #[test]
    fn single_adagrad_step() {
        let mut c = NodeClassifier::new();
        c.update(&sv(&[(0, 1.0)]), true, &cfg(false));
        let slot = *c.base().weights().get(0).unwrap();
        // g = -0.5, G = 0.25, w = 0.5 / sqrt(0.26)
        assert_eq!(slot.grad_sq, 0.25);
        assert!((slot.weight - 0.980580676).abs() < 1e-9);
        assert_eq!(c.update_count(), 1);
    }

    #[test]
    fn inverse_flips_update_target() {
        let mut direct = NodeClassifier::new();
        direct.update(&sv(&[(0, 1.0)]), true, &cfg(false));
        let mut inv = NodeClassifier::new().try_inverse().unwrap();
        inv.update(&sv(&[(0, 1.0)]), false, &cfg(false));
        assert!(inv.base().bitwise_eq(direct.base()));
    }

    #[test]
    fn replay_is_bitwise_deterministic() {
        let x = sv(&[(0, 1.0)]);
        let mut a = NodeClassifier::new();
        let mut b = NodeClassifier::new();
        for c in [&mut a, &mut b] {
            c.update(&x, true, &cfg(true));
            c.update(&x, false, &cfg(true));
        }
        assert!(a.base().bitwise_eq(b.base()));
    }

    #[test]
    fn copy_is_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c = NodeClassifier::new();
        for _ in 0..10 {
            let x = random_vec(&mut rng, 20);
            c.update(&x, rng.gen(), &cfg(true));
        }
        let snapshot = c.clone();
        let mut copy = c.try_copy().unwrap();
        for _ in 0..100 {
            let x = random_vec(&mut rng, 20);
            assert_eq!(
                copy.predict(&x, &cfg(true)).to_bits(),
                c.predict(&x, &cfg(true)).to_bits()
            );
        }
        copy.update(&random_vec(&mut rng, 20), true, &cfg(true));
        assert!(c.base().bitwise_eq(snapshot.base()));
        assert_eq!(c.update_count(), snapshot.update_count());
        assert!(!copy.base().bitwise_eq(c.base()));
    }

    #[test]
    fn copy_of_fresh_is_fresh() {
        assert_eq!(
            NodeClassifier::new().try_copy().unwrap(),
            NodeClassifier::new()
        );
    }

    #[test]
    fn inverse_of_inverse_rejected() {
        let inv = NodeClassifier::new().try_inverse().unwrap();
        assert!(inv.try_copy().is_err());
        assert!(inv.try_inverse().is_err());
        assert_eq!(inv.predict(&sv(&[(1, 2.0)]), &cfg(true)), 0.5);
    }

    #[test]
    fn inverse_is_decoupled_from_donor() {
        let mut donor = NodeClassifier::new();
        let x = sv(&[(3, 0.5)]);
        donor.update(&x, true, &cfg(true));
        let inv = donor.try_inverse().unwrap();
        let before = inv.clone();
        donor.update(&x, true, &cfg(true));
        assert_eq!(inv, before);
    }

    #[test]
    fn store_growth_bounded_by_distinct_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = NodeClassifier::new();
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..50 {
            let x = random_vec(&mut rng, 40);
            seen.extend(x.iter().map(|(id, _)| id));
            c.update(&x, rng.gen(), &cfg(true));
        }
        assert!(c.base().weights().len() <= seen.len() + 1);
    }

    #[test]
    fn adagrad_step_decreases_loss_like_finite_differences() {
        // The update moves each coordinate by -lr*g_i/sqrt(G_i+eps). For a small
        // learning rate the loss change must match the directional derivative
        // computed by central finite differences.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let dim = 6u32;
            let x = SparseVector::from_pairs(
                (0..dim).map(|i| (i, rng.gen_range(-1.0f32..1.0))).collect(),
            )
            .unwrap();
            let positive: bool = rng.gen();
            let mut m = LogisticModel::new();
            for id in 0..dim {
                m.weights.insert(
                    id,
                    Slot {
                        weight: rng.gen_range(-0.5..0.5),
                        grad_sq: rng.gen_range(0.0..2.0),
                    },
                );
            }
            let config = LearnerConfig {
                learning_rate: 1e-4,
                adagrad_epsilon: 0.01,
                use_bias: false,
                normalize: false,
            };
            let loss = |m: &LogisticModel| {
                let p = m.predict(&x, false);
                if positive {
                    -p.ln()
                } else {
                    -(1.0 - p).ln()
                }
            };
            let before = m.clone();
            let mut after = m.clone();
            after.update(&x, positive, &config);
            let delta: Vec<f64> = (0..dim)
                .map(|id| after.weights.weight(id) - before.weights.weight(id))
                .collect();
            let actual = loss(&after) - loss(&before);

            let h = 1e-6;
            let mut directional = 0.0;
            for id in 0..dim {
                let mut plus = before.clone();
                plus.weights.entry(id).weight += h;
                let mut minus = before.clone();
                minus.weights.entry(id).weight -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                directional += fd * delta[id as usize];
            }
            assert!(actual < 0.0);
            let rel = (actual - directional).abs() / directional.abs();
            assert!(rel < 1e-4, "relative error {rel}");
        }
    }

    proptest! {
        #[test]
        fn complement_identity(
            pairs in proptest::collection::vec((0u32..30, -2.0f32..2.0), 1..10),
            targets in proptest::collection::vec(any::<bool>(), 0..20),
        ) {
            let mut dedup = pairs.clone();
            dedup.sort_by_key(|p| p.0);
            dedup.dedup_by_key(|p| p.0);
            let x = SparseVector::from_pairs(dedup).unwrap();
            let mut base = NodeClassifier::new();
            for t in targets {
                base.update(&x, t, &cfg(true));
            }
            let inv = base.try_inverse().unwrap();
            let p = base.predict(&x, &cfg(true));
            prop_assert_eq!(inv.predict(&x, &cfg(true)).to_bits(), (1.0 - p).to_bits());
        }

        #[test]
        fn inverse_mirrors_direct_bitwise(
            xs in proptest::collection::vec(proptest::collection::vec((0u32..15, -1.0f32..1.0), 1..6), 1..30),
            targets in proptest::collection::vec(any::<bool>(), 30),
        ) {
            // a direct model trained on a sequence equals, negated, an inverse
            // wrapper over a fresh base trained on the same sequence
            let mut direct = NodeClassifier::new();
            let mut inv = NodeClassifier::new().try_inverse().unwrap();
            for (pairs, t) in xs.into_iter().zip(targets) {
                let mut p = pairs;
                p.sort_by_key(|e| e.0);
                p.dedup_by_key(|e| e.0);
                let x = SparseVector::from_pairs(p).unwrap();
                direct.update(&x, t, &cfg(true));
                inv.update(&x, t, &cfg(true));
            }
            prop_assert!(inv.equivalent_direct().bitwise_eq(direct.base()));
            prop_assert!(inv.equivalent_eq(&direct));
            prop_assert!(direct.equivalent_eq(&inv));
            // one more update on one side breaks both comparisons
            let x = sv(&[(0, 1.0)]);
            let mut other = direct.clone();
            other.update(&x, true, &cfg(true));
            prop_assert!(!other.equivalent_eq(&inv));
            prop_assert!(!other.equivalent_direct().bitwise_eq(&inv.equivalent_direct()));
        }
    }
}
