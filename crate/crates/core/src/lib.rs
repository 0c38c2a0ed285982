//! Source and channel polarization over arbitrary finite fields GF(p^m).
//!
//! The crate is layered bottom-up:
//!
//! - [`gf`]: table-driven finite-field arithmetic, traces and characters.
//! - [`kernel`]: matrices over GF(q), standard forms, the polarization
//!   classifier, partial distances and Reed-Solomon kernels.
//! - [`chanmodel`]: discrete sources and channels with their information
//!   quantities.
//! - [`polarlab`]: exact and Monte-Carlo polarization transforms.
//! - [`codec`]: polar encoding, successive-cancellation decoding and index
//!   selection rules.
//! - [`harness`]: experiments and verification batteries.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chanmodel;
pub mod codec;
pub mod error;
pub mod gf;
pub mod harness;
pub mod kernel;
pub mod polarlab;

pub use error::{Error, Result};
pub use gf::{FieldCtx, FieldElem};
