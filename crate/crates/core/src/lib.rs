//! Joint selection of representative features and instances from multi-view
//! unlabeled data.
//!
//! The model learns, per view, a sparse projection picking informative
//! features, together with a consistent and a view-specific self-representation
//! of the instances coupled through an adaptively learned consensus graph.
//! Instance scores come from the learned representations, feature scores from
//! the projection row norms, and a small evaluation harness measures how well
//! the selected subset stands in for the full data.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod selection;
pub mod solver;

pub use error::{CoselectError, Result};
