//! Structure and parameter learning for dynamic Bayesian networks from
//! multi-trajectory time series.
//!
//! The crate is organized by stage:
//!
//! - [`dbn`]: structures, datasets, parameter sets.
//! - [`simulate`]: random ground-truth networks and trajectory sampling.
//! - [`scoring`]: counting, maximum likelihood, information criteria, BDe and BGe.
//! - [`acyclicity`]: smooth acyclicity functionals and cycle repair.
//! - [`learn`]: exact, hill-climbing and one-shot learners.
//! - [`eval`]: SHD, AUROC, hold-out log-likelihood and benchmark sweeps.
//! - [`io`]: CSV and JSON formats.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acyclicity;
pub mod dbn;
pub mod error;
pub mod eval;
pub mod io;
pub mod learn;
pub mod par;
pub mod scoring;
pub mod simulate;

pub use error::{DbnError, Result};
