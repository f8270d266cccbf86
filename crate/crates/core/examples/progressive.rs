//! Test-then-train accuracy on a multi-class stream, with entropy reduction
//! against the running most-frequent-label predictor.
//!
//! ```bash
//! cargo run --release --example progressive
//! ```

use std::io;

use oplt::metrics::{checkpoint_grid, progressive_validate, write_curve_csv};
use oplt::synth::{generate, SyntheticConfig};
use oplt::{AuxRetention, LearnerConfig, OpltModel, PolicyConfig};

fn main() -> oplt::Result<()> {
    let data = generate(&SyntheticConfig {
        prototype_size: 6,
        skew: 0.5,
        ..SyntheticConfig::multiclass(20_000, 300, 1000, 11)
    })?;
    let mut model = OpltModel::init(
        LearnerConfig::default(),
        PolicyConfig {
            preleaf_arity: 10,
            ..PolicyConfig::default()
        },
        AuxRetention::All,
    )?;
    let curve = progressive_validate(&mut model, &data, &checkpoint_grid(2000, 2000, data.len()))?;
    write_curve_csv(io::stdout().lock(), &curve)
}
