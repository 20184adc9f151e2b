//! Consistency training with input perturbations for sentence
//! classification and sequence tagging.

pub mod augment;
pub mod consistency;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod model;

pub use error::{Error, Result};
