//! Instrumental-variable data-driven predictive control.
//!
//! Closed-loop data from a plant under a known linear controller are arranged
//! into Hankel matrices ([`hankel`]); instruments built from the controller's
//! coprime factors and the reference ([`iv`]) give a multi-step predictor and a
//! regularizing projection that are used by receding-horizon controllers
//! ([`control`]) solved with a dense QP solver ([`qp`]). [`bench`] runs the
//! Monte-Carlo studies.

// `!(x > 0.0)` is used on purpose so that NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod control;
pub mod error;
pub mod hankel;
pub mod iv;
pub mod linalg;
pub mod qp;
pub mod schema;
pub mod sslib;

pub use error::{Error, Result};
