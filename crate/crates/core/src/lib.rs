//! Character n-gram stylometry.
//!
//! The pipeline: load a manifest corpus ([`corpus`]), find and redact
//! cross-author text reuse ([`reuse`]), cut fixed-length samples, count
//! character n-grams ([`features`]), train class-weighted one-vs-rest linear
//! SVMs ([`svm`]), evaluate them by leave-one-out ([`eval`]), score a target
//! text window by window ([`rolling`]) and place it in a two-author
//! correspondence analysis ([`ca`]).
//!
//! Interchangeable parts (binary solvers, feature scalings) live in
//! name-keyed [`registry::Registry`] tables and are picked by configuration.

// NaN must fail parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ca;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod registry;
pub mod reuse;
pub mod rolling;
pub mod svm;
pub mod synth;
pub mod util;

pub use error::{Error, Result};
