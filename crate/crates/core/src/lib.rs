//! Binary-field elliptic-curve engine with a side-channel laboratory.
//!
//! The crate has two halves. The cryptographic half implements GF(2^233)
//! and GF(2^283) arithmetic ([`gf2m`]), a segmented multiplier that models
//! a 4-way Karatsuba datapath cycle by cycle ([`karatsuba`]), Montgomery
//! scalar multiplication on the NIST B-233/B-283 curves ([`curve`]) and
//! ECDSA over them ([`ecdsa`]). The laboratory half synthesizes per-cycle
//! leakage traces from the multiplier schedule ([`leakage`]), runs a
//! horizontal collision-correlation analysis over single traces ([`hcca`])
//! and persists traces in a small binary or CSV container ([`trace_io`]).

pub mod curve;
pub mod ecdsa;
mod error;
pub mod gf2m;
pub mod hcca;
pub mod karatsuba;
pub mod leakage;
pub mod trace_io;

pub use error::{Error, Result};
