//! Performance limits of fluid-antenna-assisted unsourced integrated sensing
//! and communication.
//!
//! The library computes, for a common-codebook random-access system in which
//! every transmitter is served by a fluid antenna surface:
//!
//! - achievability bounds on the per-user probability of error (PUPE) and on
//!   the mean squared error of angle-of-arrival estimation (MSEAOA), split
//!   into power-consistency, collision, and missed-detection components
//!   ([`bounds`]);
//! - an optimistic performance floor from codeword collisions, the ergodic
//!   MIMO capacity, and the Cramer-Rao lower bound ([`floor`]);
//! - minimum energy-per-user frontiers for both ([`bounds::min_energy_achievable`],
//!   [`floor::min_energy_floor`]);
//! - the sparse-recovery machinery used to verify the closed-form recovery
//!   error bound of the virtual-array sensing stage ([`sensing`]);
//! - minimum-redundancy port patterns and their difference co-arrays ([`mra`]);
//! - the Rician fluid-antenna channel model with optimal and fixed port
//!   selection ([`channel`]).
//!
//! All Monte Carlo paths draw from splittable [`numerics::rng::RandomStream`]
//! values, so every result is reproducible bit for bit from a single seed,
//! independent of thread count.

pub mod bounds;
pub mod channel;
pub mod floor;
pub mod mra;
pub mod numerics;
pub mod sensing;

/// Real scalar used throughout the concrete pipeline.
pub type Real = f64;

/// Complex scalar used by the channel, sensing, and bound pipelines.
pub type Cx = num_complex::Complex64;
