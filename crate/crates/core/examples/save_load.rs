//! Save a model mid-stream, load it, and continue training both copies.

use oplt::model_io::{from_bytes, to_bytes};
use oplt::synth::{generate, SyntheticConfig};
use oplt::{
    load_model, save_model, AuxRetention, LearnerConfig, OpltModel, PolicyConfig, PolicyKind,
};

fn main() -> oplt::Result<()> {
    let data = generate(&SyntheticConfig {
        num_examples: 400,
        seed: 5,
        ..SyntheticConfig::default()
    })?;
    let policy = PolicyConfig {
        kind: PolicyKind::Random,
        preleaf_arity: 4,
        ..PolicyConfig::default()
    };
    let mut model = OpltModel::init(LearnerConfig::default(), policy, AuxRetention::All)?;
    for ex in &data[..200] {
        model.train_example(ex)?;
    }

    let dir = std::env::temp_dir().join("oplt-save-load-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.bin");
    save_model(&model, &path)?;
    let mut loaded = load_model(&path)?;
    println!("{} bytes on disk", std::fs::metadata(&path)?.len());

    for ex in &data[200..] {
        model.train_example(ex)?;
        loaded.train_example(ex)?;
    }
    assert_eq!(to_bytes(&model), to_bytes(&loaded));
    println!("continued training agrees: {} nodes", model.tree().len());

    let mut slim = from_bytes(&to_bytes(&model))?;
    slim.strip_auxiliary();
    println!("prediction-only model: {} bytes", to_bytes(&slim).len());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
