//! Phylogenetic character data from cognate-coded wordlists, BIN+G
//! inference, and quartet-based tree evaluation.

pub mod align;
pub mod corpus;
pub mod encode;
pub mod error;
pub mod eval;
pub mod patterns;
pub mod phylo;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
