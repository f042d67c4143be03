//! Simulation of a classical system mediating between two quantum systems.
//!
//! Three models of quantum-classical interaction are provided:
//!
//! * [`koopman`]: the classical system is embedded diagonally in a Hilbert
//!   space, so every interaction is block diagonal in the classical labels.
//! * [`meanfield`]: the classical phase-space point moves under the quantum
//!   expectation of a parameterised Hamiltonian.
//! * [`ensemble`]: probability densities and conjugate phases `(P, S)` on a
//!   configuration space, with the ensemble Poisson bracket.
//!
//! [`counterexamples`] builds the two configuration-ensemble scenarios in
//! which the classical mediator does correlate the quantum systems, and
//! [`hilbert`] supplies the finite-dimensional linear algebra and the
//! entanglement measures used throughout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterexamples;
pub mod ensemble;
mod error;
pub mod hilbert;
pub mod koopman;
pub mod meanfield;
pub mod table;

pub use error::{Error, Result};

/// Reduced Planck constant used when a caller does not pick one.
pub const DEFAULT_HBAR: f64 = 1.0;
