//! Incremental training over a tree fixed in advance: balanced and 2-means
//! trees built from the label set of a synthetic stream.
//!
//! ```bash
//! cargo run --example iplt_fixed_tree
//! ```

use oplt::metrics::{evaluate, PropensityModel};
use oplt::synth::{generate, SyntheticConfig};
use oplt::{
    build_balanced_tree, build_kmeans_tree, label_representations, IpltModel, LearnerConfig,
};

fn main() -> oplt::Result<()> {
    let data = generate(&SyntheticConfig {
        num_examples: 3000,
        num_labels: 200,
        num_features: 500,
        prototype_size: 8,
        seed: 1,
        ..SyntheticConfig::default()
    })?;
    let (train, test) = data.split_at(2500);
    let labels: Vec<u32> = train.iter().flat_map(|e| e.labels().to_vec()).collect();

    let trees = [
        ("balanced", build_balanced_tree(&labels, 2, 16, 0)?),
        (
            "2-means",
            build_kmeans_tree(&label_representations(train), 16, 0)?,
        ),
    ];
    let prop = PropensityModel::from_examples(0.55, 1.5, train);
    for (name, tree) in trees {
        println!("{name}: {} nodes, depth {}", tree.len(), tree.depth());
        let mut model = IpltModel::new(tree, LearnerConfig::default())?;
        for _ in 0..3 {
            for ex in train {
                model.train_example(ex, &mut ())?;
            }
        }
        let pairs: Vec<_> = test
            .iter()
            .filter(|e| e.labels().iter().all(|&l| model.tree.contains_label(l)))
            .map(|e| (model.predict(&e.features, 5), e.labels().to_vec()))
            .collect();
        let report = evaluate(&pairs, &[1, 3, 5], Some(&prop))?;
        for ((k, p), (_, psp)) in report.precision.iter().zip(&report.psp) {
            println!("  P@{k} {p:.4}  PSP@{k} {psp:.4}");
        }
    }
    Ok(())
}
