//! Top-k search against exhaustive scoring of every leaf.

use oplt::predict::{predict_marginals_bruteforce, topk_bruteforce};
use oplt::synth::{generate, SyntheticConfig};
use oplt::{AuxRetention, LearnerConfig, OpltModel, PolicyConfig};

fn main() -> oplt::Result<()> {
    let data = generate(&SyntheticConfig {
        num_examples: 2000,
        num_labels: 100,
        num_features: 300,
        seed: 4,
        ..SyntheticConfig::default()
    })?;
    let mut model = OpltModel::init(
        LearnerConfig::default(),
        PolicyConfig {
            preleaf_arity: 10,
            ..PolicyConfig::default()
        },
        AuxRetention::Prune,
    )?;
    for ex in &data {
        model.train_example(ex)?;
    }

    let probe = &data[7];
    let top = model.predict_topk(&probe.features, 5);
    println!("truth {:?}", probe.labels());
    for (label, p) in &top.items {
        println!("  {label:>4}  {p:.4}");
    }

    let x = probe.features.l2_normalized();
    let all =
        predict_marginals_bruteforce(model.tree(), model.regular(), model.learner_config(), &x);
    assert_eq!(top, topk_bruteforce(&all, 5));
    println!("matches exhaustive scoring of {} labels", all.len());
    Ok(())
}
