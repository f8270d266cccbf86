//! A tree grown from an empty root as labels appear in the stream.
//!
//! ```bash
//! cargo run --example online_growth
//! ```

use oplt::{
    AuxRetention, Example, LearnerConfig, OpltModel, PolicyConfig, PolicyKind, SparseVector,
};

fn x(pairs: &[(u32, f32)]) -> SparseVector {
    SparseVector::from_pairs(pairs.to_vec()).unwrap()
}

fn main() -> oplt::Result<()> {
    let policy = PolicyConfig {
        kind: PolicyKind::BestGreedy,
        alpha: 0.75,
        arity: 2,
        preleaf_arity: 3,
        seed: 0,
    };
    let mut model = OpltModel::init(LearnerConfig::default(), policy, AuxRetention::All)?;
    let stream = [
        Example::new(x(&[(0, 1.0)]), vec![10]),
        Example::new(x(&[(1, 1.0)]), vec![11]),
        Example::new(x(&[(0, 1.0), (2, 1.0)]), vec![10, 12]),
        Example::new(x(&[(3, 1.0)]), vec![13, 14]),
        Example::new(x(&[(4, 1.0)]), vec![15]),
        Example::new(x(&[(1, 0.5)]), vec![11]),
    ];
    for (t, ex) in stream.iter().enumerate() {
        let step = model.train_example(ex)?;
        println!(
            "t={} labels {:?}: +{} labels, +{} nodes, {} policy visits",
            t + 1,
            ex.labels(),
            step.new_labels,
            step.nodes_created,
            step.policy_visits
        );
    }
    // "id parent label" per node
    print!("{}", model.tree().dump());
    println!("auxiliary classifiers: {}", model.num_auxiliary());

    let mut pruned = OpltModel::init(LearnerConfig::default(), policy, AuxRetention::Prune)?;
    for ex in &stream {
        pruned.train_example(ex)?;
    }
    println!("with pruning: {}", pruned.num_auxiliary());
    Ok(())
}
