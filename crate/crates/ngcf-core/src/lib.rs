//! Core engine for neural graph collaborative filtering.
//!
//! Everything numerical lives here: interaction-data preparation, the
//! bipartite graph Laplacian, dense/sparse kernels with a hand-derived
//! backward pass, BPR/Adam training, and full-ranking top-K evaluation.
//! The crate is `no_std`-compatible (with `alloc`); all IO, file formats,
//! and the command-line front end live in the companion `ngcf-cli` crate.
//!
//! Determinism is a design constraint throughout: every source of
//! randomness flows from an explicit seeded [`numeric::Rng`], collections
//! with unstable iteration order are avoided, and all kernels execute in a
//! fixed single-threaded order, so identical seeds produce bit-identical
//! results.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod numeric;
pub mod training;

pub use error::{Error, Result};
