//! Inexact accelerated gradient methods under an absolute gradient-error model.
//!
//! The crate covers the whole loop around these methods: stepsize schedules,
//! exact and inexact oracles, the iterations themselves, closed-form
//! worst-case bounds with their per-iteration error coefficients `u_k`, the
//! semidefinite dual certificates behind those bounds, and the allocation of
//! per-iteration accuracy under an effort model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod bounds;
pub mod certificate;
pub mod error;
pub mod numeric;
pub mod oracles;
pub mod scheduler;
pub mod schedules;
pub mod sdpa;
pub mod verify;

pub use error::{Error, Result};
