//! Unsupervised cross-domain recognition with compact joint subspaces.
//!
//! The target domain is mined for small "anchor" subspaces of mutually close
//! samples. Each anchor receives a class label by comparing it with the
//! per-class source subspaces through principal angles, with a graph
//! Laplacian term keeping nearby anchors consistent. Every class's source
//! samples are then pooled with the samples of its anchors and one-vs-rest
//! linear SVMs trained on the pooled sets label the target domain.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod clustering;
pub mod data;
pub mod distance;
pub mod error;
pub mod eval;
pub mod labeling;
pub mod linalg;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
