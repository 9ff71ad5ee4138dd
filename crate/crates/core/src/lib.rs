//! Joint POS tagging and dependency parsing.
//!
//! The crate provides a small reverse-mode autodiff engine, the neural
//! layers of a BiLSTM biaffine parser, treebank I/O, the basic, pipeline and
//! joint (share-loose, share-tight, stack) model frameworks, tree decoding,
//! and training/evaluation tooling.

pub mod autodiff;
pub mod corpus;
pub mod decode;
pub mod models;
pub mod nn;
pub mod error;
pub mod rng;
pub mod train;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
