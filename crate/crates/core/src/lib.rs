//! Refactoring-effort estimation for remodularisation plans.
//!
//! The pipeline mines a repository's history for class-level refactorings,
//! derives a person-hour effort target for each from the commit that
//! carried it, joins those targets with design metrics of the refactored
//! classes, and fits a gradient-boosted tree ensemble. The fitted model then
//! prices the move-class operations implied by a clustering of the current
//! code base.

pub mod analyzer;
pub mod baselines;
pub mod error;
pub mod gbm;
pub mod git;
pub mod dataset;
pub mod detector;
pub mod effort;
pub mod history;
pub mod pipeline;
pub mod planner;
pub mod synthetic;

pub use error::{Error, Result};
