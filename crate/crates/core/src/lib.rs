//! Dynamic hypergraph multiple-instance learning for bag classification.
//!
//! Patch embeddings of a bag are grouped into learned soft hyperedges, mixed
//! through one round of hypergraph convolution and pooled with gated
//! attention into a bag prediction. See the README for the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

mod binio;
pub mod cli;
pub mod data;
pub mod dhcm;
pub mod error;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
