//! Core pricing library for the riskbench portfolio valuation suite.
//!
//! Everything in this crate is `no_std` (alloc only) and deterministic:
//! pricing a given problem with a given market and seed returns bitwise
//! identical numbers on every platform and in any dispatch order. The
//! crate holds the six pricing engine families used by the benchmark
//! portfolio, the counter-based random number generator they draw from,
//! and the canonical big-endian codec for problem and result records.
//!
//! I/O, transport and timing live in the companion `riskbench` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod codec;
pub mod engines;
pub mod error;
pub mod market;
pub mod math;
pub mod problem;
pub mod result;
pub mod rng;

pub use error::{PricingError, SpecError};
pub use market::{local_vol, LocalVolSurface, MarketParams};
pub use problem::{EngineKind, ProblemSpec};
pub use result::PricingResult;
