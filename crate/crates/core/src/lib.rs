//! Domain adaptation with an autoencoder-regularized, adversarially trained
//! shared representation, implemented from scratch on dense `f64` matrices.
//!
//! Layering, bottom-up: [`tensor`] → [`nn`] / [`optim`] → [`model`];
//! [`kde`] is the density view of the reconstruction loss; [`data`] and
//! [`eval`] feed and score experiments, which [`experiment`] orchestrates.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 0.0)` deliberately rejects NaN.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod kde;
pub mod model;
pub mod nn;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
