//! Privacy-preserving fusion estimation for multi-sensor plants whose
//! measurements travel over independent Bernoulli erasure channels that an
//! eavesdropper can also tap.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: linear plant and sensors, seeded trajectory generation.
//! - [`channel`]: authorized / wiretap erasure channels and their capacities.
//! - [`codec`]: probabilistic uniform quantizer with a growing reference,
//!   legitimate and eavesdropper decoders.
//! - [`estimator`]: the centralized fusion filter used by both parties.
//! - [`analysis`]: modified algebraic Riccati bound, capacity / PBH
//!   conditions, gain and covariance-domination checks.
//! - [`harness`]: Monte Carlo runner, critical events, secrecy report.
//! - [`scenario`]: configuration files and named presets.
//! - [`report`]: CSV / JSON emitters used by the CLI and the C bindings.

pub mod analysis;
pub mod channel;
pub mod codec;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod report;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
