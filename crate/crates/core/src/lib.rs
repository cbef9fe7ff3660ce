#![no_std]

//! Secret key extraction from per-subcarrier channel state information.
//!
//! The crate is `no_std` and only needs an allocator. It covers the whole
//! two-party pipeline:
//!
//! * [`channel`]: a seeded fading simulator producing reciprocal Alice/Bob
//!   amplitude traces plus an eavesdropper trace.
//! * [`quantizer`]: adaptive dual-threshold quantization with drop-list
//!   coordination.
//! * [`validation`]: consistency checks over truncated SHA-1 digests.
//! * [`recombine`]: difference-degree estimation, stream weighting and
//!   seeded bit recombination when no stream pair agrees outright.
//! * [`cascade`]: the parity/bisection reconciliation baseline.
//! * [`wire`] and [`protocol`]: the framed message format and the endpoint
//!   state machines that drive a full key agreement over an in-memory link.
//! * [`analysis`]: mismatch, correlation, periodicity and bit-rate metrics.
//!
//! File formats, randomness test batteries and the command line live in the
//! companion `skece` crate.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod bits;
pub mod cascade;
pub mod channel;
pub mod protocol;
pub mod quantizer;
pub mod recombine;
pub mod validation;
pub mod wire;

pub use bits::{BitStream, Party, StreamOrigin};
