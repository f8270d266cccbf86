//! Build a 2-means tree on the first 10% of a stream, then keep growing it
//! online.

use oplt::metrics::precision_at_k;
use oplt::synth::{generate, SyntheticConfig};
use oplt::{warm_start, AuxRetention, LearnerConfig, OpltModel, PolicyConfig};

fn main() -> oplt::Result<()> {
    let data = generate(&SyntheticConfig {
        num_examples: 5000,
        num_labels: 400,
        num_features: 800,
        seed: 8,
        ..SyntheticConfig::default()
    })?;
    let (train, test) = data.split_at(4500);
    let policy = PolicyConfig {
        preleaf_arity: 20,
        ..PolicyConfig::default()
    };

    let (mut warm, prefix) = warm_start(
        train,
        0.10,
        LearnerConfig::default(),
        policy,
        AuxRetention::All,
    )?;
    println!(
        "prefix {prefix}: {} labels, depth {}",
        warm.tree().num_labels(),
        warm.tree().depth()
    );
    for ex in &train[prefix..] {
        warm.train_example(ex)?;
    }

    let mut cold = OpltModel::init(LearnerConfig::default(), policy, AuxRetention::All)?;
    for ex in train {
        cold.train_example(ex)?;
    }

    for (name, m) in [("warm", &warm), ("cold", &cold)] {
        let p1: f64 = test
            .iter()
            .map(|e| precision_at_k(&m.predict_topk(&e.features, 1), e.labels(), 1).unwrap())
            .sum::<f64>()
            / test.len() as f64;
        println!(
            "{name}: {} labels, depth {}, P@1 {p1:.4}",
            m.tree().num_labels(),
            m.tree().depth()
        );
    }
    Ok(())
}
