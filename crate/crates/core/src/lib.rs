//! Decoding laboratory for binary LDPC codes.
//!
//! The crate carries three decoders over a shared [`FactorGraph`]:
//!
//! * [`sp`]: the floating-point sum-product reference,
//! * [`mbsd`]: the Markov-based stochastic decoder exchanging `2K`-bit
//!   vector messages,
//! * [`sd`]: a bit-per-edge stochastic decoder with edge memories.
//!
//! [`analysis`] evaluates the closed-form Markov-chain quantities and error
//! bounds that govern the stochastic decoder, and [`oracle`] provides brute
//! force references for small instances. Everything here is `no_std` with
//! `alloc`; file formats, experiments and the command line live in the
//! companion `stochdec-lab` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod bits;
pub mod channel;
mod error;
pub mod graph;
pub mod mbsd;
pub mod oracle;
pub mod sd;
pub mod seed;
pub mod sp;

pub use error::{Error, Result};
pub use graph::{FactorGraph, GraphStats};

/// Floor used to clamp every probability that enters a decoder.
pub const P_MIN: f64 = 1e-9;

#[inline]
pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(P_MIN, 1.0 - P_MIN)
}
