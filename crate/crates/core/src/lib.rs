//! Multi-task sequence tagging for named-entity recognition and part-of-speech
//! tagging on small devices.
//!
//! The crate is layered bottom-up:
//!
//! * [`data`] reads CoNLL-2003 / CoNLL-U corpora, builds vocabularies and
//!   encodes sentences into fixed-shape id arrays.
//! * [`nn`] is a small numeric core (tensors, LSTM/CNN/dense/CRF layers,
//!   losses, Adam) with hand-written backward passes and a finite-difference
//!   checker.
//! * [`model`] assembles the five tagger variants and their joint loss.
//! * [`train`] runs mini-batch training and computes evaluation metrics.
//! * [`runtime`] owns the checkpoint format, model-size accounting and the
//!   latency benchmark.

pub mod data;
pub mod error;
pub mod model;
pub mod nn;
pub mod runtime;
pub mod train;

pub use error::{Error, Result};
