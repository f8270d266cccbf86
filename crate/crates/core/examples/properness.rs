//! Checks that the online model equals incremental training on the tree it
//! produced, for every prefix of a stream, then breaks it on purpose.

use oplt::synth::{generate, SyntheticConfig};
use oplt::{
    check_properness, AuxRetention, LearnerConfig, OpltModel, PolicyConfig, PolicyKind, Prefixes,
};

fn main() -> oplt::Result<()> {
    let data = generate(&SyntheticConfig {
        seed: 21,
        ..SyntheticConfig::default()
    })?;
    for kind in [PolicyKind::BestGreedy, PolicyKind::Random] {
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let policy = PolicyConfig {
                kind,
                alpha,
                arity: 2,
                preleaf_arity: 5,
                seed: 3,
            };
            let mut model = OpltModel::init(LearnerConfig::default(), policy, AuxRetention::All)?;
            let r = check_properness(&mut model, &data, &Prefixes::All)?;
            println!(
                "{kind:?} alpha {alpha}: {} at {} prefixes, update ratio {:.3}, depth {}",
                if r.passed() { "PASS" } else { "FAIL" },
                r.prefixes_checked,
                r.update_ratio(),
                model.tree().depth()
            );
        }
    }

    let single = generate(&SyntheticConfig::multiclass(100, 10, 30, 2))?;
    let mut broken = OpltModel::init(
        LearnerConfig::default(),
        PolicyConfig {
            preleaf_arity: 2,
            ..PolicyConfig::default()
        },
        AuxRetention::All,
    )?;
    broken.inject_skipped_aux_update(0);
    let r = check_properness(&mut broken, &single, &Prefixes::All)?;
    match r.mismatch {
        Some(m) => println!("fault detected: {m}"),
        None => println!("fault went unnoticed"),
    }
    Ok(())
}
