//! Discourse-aware machine translation evaluation.
//!
//! Scores a hypothesis translation by the similarity of its RST discourse
//! tree to the reference tree under an all-subtree kernel, learns linear
//! combinations of discourse and external metrics from human pairwise
//! rankings, and measures metric correlation with human judgments.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod representation;
pub mod rst;
pub mod scoring;
pub mod tuning;

pub use error::{Error, Result};
pub use kernel::{normalized_similarity, subtree_kernel, KernelConfig};
pub use representation::{to_representation, AblationKind, KernelTree, RepresentationKind};
pub use rst::{parse_tree, serialize_tree, RstTree, TreeCorpus, ValidationMode};
