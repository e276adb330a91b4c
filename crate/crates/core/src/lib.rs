//! Attribute learning for network intrusion detection.
//!
//! The crate turns KDD Cup 99 connection records into a zero-shot learning
//! problem in two stages:
//!
//! 1. **Attribute learning.** An information-gain decision tree is grown over
//!    twelve selected connection attributes. Every instance is then re-described
//!    by how often each attribute is tested along the instance's root-to-leaf
//!    path ([`alnid`]).
//! 2. **Inference.** Class and category signatures are built from the learned
//!    attributes, and unseen attacks are assigned to a category either with the
//!    closed-form ESZSL embedding or with nearest-neighbour matching
//!    ([`zsl`]).
//!
//! [`kdd`] handles ingestion, the seen/unseen split and summary statistics,
//! [`dtree`] the tree learner, [`linalg`] the small dense solver used by ESZSL,
//! and [`pipeline`] wires everything into the run layout used by the `alnid`
//! binary.
//!
//! The runnable programs under `examples/` walk through each capability on
//! synthetic records produced by [`synthetic`], so nothing needs to be
//! downloaded to try them.

pub mod alnid;
pub mod dtree;
pub mod kdd;
pub mod linalg;
pub mod pipeline;
pub mod stats;
pub mod synthetic;
pub mod zsl;

pub use alnid::{relearn_dataset, relearn_instance, LearnedInstance, SeparabilityReport};
pub use dtree::{build_tree, DecisionTree, Rule, TreeParams, TrainingSet};
pub use kdd::{load_dataset, split_zero_shot, Category, ClassTable, DatasetSplit, EncodedInstance};
pub use linalg::DenseMatrix;
pub use pipeline::RunConfig;
pub use stats::Summary;
pub use zsl::{EszslModel, EvalResult, SignatureMatrix};
