//! Probabilistic label trees for extreme multi-label classification, trained
//! either over a fixed tree (IPLT) or fully online while the tree grows with
//! the label set (OPLT).
//!
//! ```
//! use oplt::{AuxRetention, Example, LearnerConfig, OpltModel, PolicyConfig, SparseVector};
//!
//! let mut model = OpltModel::init(
//!     LearnerConfig::default(),
//!     PolicyConfig::default(),
//!     AuxRetention::All,
//! )
//! .unwrap();
//! let x = SparseVector::from_pairs(vec![(3, 1.0), (7, 0.5)]).unwrap();
//! model.train_example(&Example::new(x.clone(), vec![12, 40])).unwrap();
//! assert_eq!(model.tree().num_labels(), 2);
//! let top = model.predict_topk(&x, 2);
//! assert_eq!(top.len(), 2);
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod iplt;
pub mod kmeans;
pub mod learner;
pub mod metrics;
pub mod model_io;
pub mod oplt;
pub mod predict;
pub mod properness;
pub mod synth;
pub mod trace;
pub mod tree;
pub mod weights;

pub use data::{Dataset, DatasetHeader, Example, SparseVector};
pub use error::{Error, Result};
pub use iplt::{build_balanced_tree, iplt_train, IpltModel};
pub use kmeans::{build_kmeans_tree, label_representations};
pub use learner::{LearnerConfig, LogisticModel, NodeClassifier};
pub use model_io::{load_model, save_model};
pub use oplt::{warm_start, AuxRetention, OpltModel, PolicyConfig, PolicyKind};
pub use predict::{predict_topk, Prediction};
pub use properness::{check_properness, Prefixes, PropernessReport};
pub use tree::{LabelTree, NodeId};
