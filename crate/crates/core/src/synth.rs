//! Seeded synthetic streams for tests, examples and the properness check.
//!
//! Each label owns a small prototype set of features. An example draws its
//! labels from a skewed distribution and mixes the prototypes of those labels
//! with a few noise features.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Example, SparseVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub num_examples: usize,
    pub num_labels: u32,
    pub num_features: u32,
    pub min_labels: usize,
    pub max_labels: usize,
    /// Features per label prototype.
    pub prototype_size: usize,
    pub noise_features: usize,
    /// Exponent of the label popularity power law (0 = uniform).
    pub skew: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_examples: 200,
            num_labels: 30,
            num_features: 50,
            min_labels: 1,
            max_labels: 4,
            prototype_size: 4,
            noise_features: 2,
            skew: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// One label per example.
    pub fn multiclass(num_examples: usize, num_labels: u32, num_features: u32, seed: u64) -> Self {
        Self {
            num_examples,
            num_labels,
            num_features,
            min_labels: 1,
            max_labels: 1,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_labels == 0 || self.num_features == 0 {
            return Err(Error::Config(
                "synthetic stream needs labels and features".into(),
            ));
        }
        if self.min_labels == 0 || self.min_labels > self.max_labels {
            return Err(Error::Config(format!(
                "bad labels-per-example range {}..={}",
                self.min_labels, self.max_labels
            )));
        }
        if self.max_labels > self.num_labels as usize {
            return Err(Error::Config("more labels per example than labels".into()));
        }
        Ok(())
    }
}

pub fn generate(config: &SyntheticConfig) -> Result<Vec<Example>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let nf = config.num_features as usize;
    let proto = config.prototype_size.min(nf);
    let prototypes: Vec<Vec<u32>> = (0..config.num_labels)
        .map(|_| {
            sample(&mut rng, nf, proto)
                .into_iter()
                .map(|i| i as u32)
                .collect()
        })
        .collect();
    // cumulative popularity over labels 0..m, label l having weight (l+1)^-skew
    let mut cdf = Vec::with_capacity(config.num_labels as usize);
    let mut acc = 0.0;
    for l in 0..config.num_labels {
        acc += f64::from(l + 1).powf(-config.skew);
        cdf.push(acc);
    }

    let mut out = Vec::with_capacity(config.num_examples);
    for _ in 0..config.num_examples {
        let want = rng.gen_range(config.min_labels..=config.max_labels);
        let mut labels: Vec<u32> = Vec::with_capacity(want);
        while labels.len() < want {
            let u = rng.gen::<f64>() * acc;
            let l = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32;
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
        let mut feats: Vec<(u32, f32)> = Vec::new();
        let mut push = |id: u32, v: f32| match feats.iter_mut().find(|(i, _)| *i == id) {
            Some(e) => e.1 += v,
            None => feats.push((id, v)),
        };
        for &l in &labels {
            for &f in &prototypes[l as usize] {
                push(f, rng.gen_range(0.5..1.5));
            }
        }
        for _ in 0..config.noise_features {
            push(
                rng.gen_range(0..config.num_features),
                rng.gen_range(0.1..0.5),
            );
        }
        let x = SparseVector::from_pairs(feats).expect("ids merged above");
        out.push(Example::new(x, labels));
    }
    Ok(out)
}
