//! Link-level simulation of a two-user power-domain NOMA satellite downlink
//! with imperfect CSI, plus a from-scratch Gaussian-kernel SVM tuned by a
//! binary genetic algorithm for near/far user classification and pairing.
//!
//! Module map:
//! - [`channel`]: Shadowed-Rician fading, pilot-limited estimation, user placement
//! - [`noma`]: SINRs, NOMA and TDMA rates for a paired downlink
//! - [`svm`]: soft-margin SVM dual solver (SMO) with Gaussian kernel
//! - [`ga`]: genetic search over the SVM regularization and kernel width
//! - [`pairing`]: labeling, features, proposed vs. random pairing
//! - [`experiment`]: seeded Monte Carlo experiment harness behind the CLI

pub mod channel;
pub mod error;
pub mod experiment;
pub mod ga;
pub mod noma;
pub mod pairing;
pub mod rng;
pub mod stats;
pub mod svm;

pub use error::{Error, Result};
pub use rng::RngStream;
