//! Growable sparse weight store.
//!
//! Open addressing with Robin Hood displacement: on a collision the entry
//! that sits closer to its home slot yields to the one that has probed
//! further. Capacity is a power of two and doubles once the load factor
//! passes 0.9. Keys are never removed.

const MAX_LOAD_NUM: usize = 9;
const MAX_LOAD_DEN: usize = 10;
const MIN_CAPACITY: usize = 8;

/// Per-coordinate state: the weight and the running sum of squared gradients.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Slot {
    pub weight: f64,
    pub grad_sq: f64,
}

#[derive(Debug, Clone, Copy)]
struct Bucket {
    key: u32,
    // probe distance + 1; 0 marks an empty bucket
    dist: u32,
    value: Slot,
}

const EMPTY: Bucket = Bucket {
    key: 0,
    dist: 0,
    value: Slot {
        weight: 0.0,
        grad_sq: 0.0,
    },
};

#[derive(Debug, Clone, Default)]
pub struct WeightStore {
    buckets: Vec<Bucket>,
    len: usize,
}

#[inline]
fn hash(key: u32) -> usize {
    // Fibonacci hashing; the high bits are used via the shift in `home`
    (u64::from(key).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 32) as usize
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.buckets.len()
    }

    #[inline]
    fn mask(&self) -> usize {
        self.buckets.len() - 1
    }

    pub fn get(&self, key: u32) -> Option<&Slot> {
        if self.buckets.is_empty() {
            return None;
        }
        let mask = self.mask();
        let mut pos = hash(key) & mask;
        let mut dist = 1u32;
        loop {
            let b = &self.buckets[pos];
            // an entry closer to home than we are means the key is absent
            if b.dist < dist {
                return None;
            }
            if b.key == key {
                return Some(&b.value);
            }
            pos = (pos + 1) & mask;
            dist += 1;
        }
    }

    /// Absent keys read as (0, 0).
    pub fn weight(&self, key: u32) -> f64 {
        self.get(key).map_or(0.0, |s| s.weight)
    }

    pub fn entry(&mut self, key: u32) -> &mut Slot {
        if self.buckets.is_empty() || (self.len + 1) * MAX_LOAD_DEN > self.capacity() * MAX_LOAD_NUM
        {
            self.grow();
        }
        let pos = self.find_or_insert(key);
        &mut self.buckets[pos].value
    }

    pub fn insert(&mut self, key: u32, value: Slot) {
        *self.entry(key) = value;
    }

    fn find_or_insert(&mut self, key: u32) -> usize {
        let mask = self.mask();
        let mut pos = hash(key) & mask;
        let mut dist = 1u32;
        loop {
            let b = &self.buckets[pos];
            if b.dist == 0 {
                self.buckets[pos] = Bucket {
                    key,
                    dist,
                    value: Slot::default(),
                };
                self.len += 1;
                return pos;
            }
            if b.key == key {
                return pos;
            }
            if b.dist < dist {
                // steal the slot from the richer entry and carry it forward
                let target = pos;
                let mut carried = std::mem::replace(
                    &mut self.buckets[pos],
                    Bucket {
                        key,
                        dist,
                        value: Slot::default(),
                    },
                );
                self.len += 1;
                loop {
                    pos = (pos + 1) & mask;
                    carried.dist += 1;
                    let b = &mut self.buckets[pos];
                    if b.dist == 0 {
                        *b = carried;
                        return target;
                    }
                    if b.dist < carried.dist {
                        std::mem::swap(b, &mut carried);
                    }
                }
            }
            pos = (pos + 1) & mask;
            dist += 1;
        }
    }

    fn grow(&mut self) {
        let new_cap = (self.buckets.len() * 2).max(MIN_CAPACITY);
        let old = std::mem::replace(&mut self.buckets, vec![EMPTY; new_cap]);
        self.len = 0;
        for b in old.into_iter().filter(|b| b.dist != 0) {
            let pos = self.find_or_insert(b.key);
            self.buckets[pos].value = b.value;
        }
    }

    /// Entries in table order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &Slot)> + '_ {
        self.buckets
            .iter()
            .filter(|b| b.dist != 0)
            .map(|b| (b.key, &b.value))
    }

    /// Entries sorted by key, for byte-stable serialization and comparisons.
    pub fn sorted_entries(&self) -> Vec<(u32, Slot)> {
        let mut v: Vec<(u32, Slot)> = self.iter().map(|(k, s)| (k, *s)).collect();
        v.sort_unstable_by_key(|&(k, _)| k);
        v
    }

    pub fn max_probe_distance(&self) -> u32 {
        self.buckets.iter().map(|b| b.dist).max().unwrap_or(0)
    }

    #[cfg(test)]
    fn check_robin_hood_invariant(&self) {
        let mask = self.mask();
        for (pos, b) in self.buckets.iter().enumerate() {
            if b.dist == 0 {
                continue;
            }
            let home = hash(b.key) & mask;
            assert_eq!(
                (home + b.dist as usize - 1) & mask,
                pos,
                "stored distance is wrong"
            );
            let next = &self.buckets[(pos + 1) & mask];
            // an entry may not be followed by one that is more than one step further from home
            assert!(next.dist <= b.dist + 1);
        }
    }
}

/// Equality is by content, independent of table layout.
impl PartialEq for WeightStore {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len
            && self
                .iter()
                .all(|(k, s)| other.get(k).is_some_and(|o| o == s))
    }
}
