//! Foreground-mask fusion toolkit.
//!
//! Candidate foreground masks come from classic background-subtraction
//! models ([`bgs`]) or from precomputed mask files ([`dataset`]). They are
//! fused either by a trained encoder-decoder network ([`fusion`], built on the
//! small layer library in [`nn`]) or by the non-learned baselines in
//! [`baselines`], and scored with the change-detection metrics in
//! [`metrics`].

pub mod baselines;
pub mod bgs;
pub mod cli;
pub mod dataset;
mod error;
pub mod fusion;
pub mod metrics;
pub mod nn;
mod plane;

pub use error::{Error, Result};
pub use plane::{Frame, Mask, Plane, BACKGROUND, FOREGROUND};
