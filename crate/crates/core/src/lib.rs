//! A diffusion generator organized as a fuzzy rule base.
//!
//! Training data is clustered into representative medoids; each medoid's
//! noised trajectory becomes the antecedent of a chain of forward/backward
//! rules, and each chain owns a noise-prediction network. Generation runs
//! every chain from the same initial noise, gates them by cross-path
//! normalized similarity memberships, and fuses the final states.
//!
//! Algorithm variants that are chosen at run time (consequent weighting,
//! reverse step, quality metric) sit behind small traits and are looked up
//! by name, so configuration files and the command line select them with
//! plain strings.

pub mod codec;
pub mod condition;
pub mod data;
pub mod denoiser;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod fuzzification;
pub mod numerics;
pub mod persist;
pub mod rulebase;

pub use condition::{Condition, ConditionSpace};
pub use data::{DatasetDescriptor, SampleSet};
pub use engine::{generate, train, Ablation, Checkpoint, EngineConfig};
pub use error::{DfsError, Result};
pub use numerics::RngStream;
