//! Space-time optimal transport between Brownian exit-pair laws of planar
//! domains.
//!
//! * [`geometry`]: domains and membership.
//! * [`sampler`]: Euler and exact exit-pair samplers.
//! * [`exact`]: series and closed forms used as reference values.
//! * [`transport`]: empirical optimal and supremal transport.
//! * [`verify`]: the numerical checks run by the `verify` command.

pub mod cli;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
