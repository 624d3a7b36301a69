//! Nested exponential weights for adversarial bandits over a hierarchy of
//! similar alternatives.
//!
//! The alternatives (arms) are the leaves of a [`SimilarityTree`]: every
//! level of the tree is a partition of the arms into classes, each finer than
//! the one above. Losses are additive along a leaf's lineage, one
//! idiosyncratic increment per class.
//!
//! The crate provides:
//!
//! - [`tree`]: construction, validation and structural constants
//!   (effective number of alternatives, price of affinity).
//! - [`choice`]: the nested logit choice rule (score propagation, conditional
//!   and total probabilities, top-down sampling).
//! - [`estimators`]: the importance-weighted estimator and its nested variant,
//!   with an exact enumeration oracle for their moments.
//! - [`policies`]: the NEW policy and the EXP3 baseline.
//! - [`envs`]: loss-generating environments.
//! - [`entropy`]: the nested entropy, its conjugate and the inequalities the
//!   regret analysis rests on, in numerically checkable form.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod choice;
pub mod entropy;
pub mod envs;
mod error;
pub mod estimators;
pub mod math;
pub mod policies;
pub mod tree;

pub use choice::{propagate_scores, SamplePath, ScoreState, UncertaintyParams};
pub use error::{Error, Result};
pub use estimators::{iwe, niwe, EstimatedIncrements, IncrementVector};
pub use policies::{Exp3Policy, LearningRate, NewPolicy, Policy, PolicyConfig, PolicyKind};
pub use tree::{ClassId, SimilarityTree, TreeConstants, TreeSpec};
