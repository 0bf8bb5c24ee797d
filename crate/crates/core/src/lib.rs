//! Quantum Bayes classifiers.
//!
//! Binary-feature Bayesian-network classifiers (naive, SPODE, TAN and
//! symmetric-feature networks) learned from image datasets, compiled into
//! amplitude-encoding circuits over `{X, Ry, CⁿRy}` and executed on an exact
//! real-amplitude statevector.
//!
//! The pipeline is split into:
//!
//! * [`preprocess`]: IDX loading, block average pooling and Gaussian
//!   binarization of pooled features.
//! * [`bayesnet`]: network structures, structure learning, CPT estimation and
//!   the classical chain-rule joint probability.
//! * [`qcircuit`]: circuit compilation, statevector simulation, shot sampling
//!   and circuit export.
//! * [`classifier`]: training and prediction for a class pair.
//! * [`evalharness`]: one-vs-one evaluation over all class pairs and report
//!   files.

pub mod bayesnet;
pub mod classifier;
pub mod error;
pub mod evalharness;
pub mod preprocess;
pub mod qcircuit;

pub use error::{QbcError, Result};
