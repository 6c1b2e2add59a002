//! Classical simulation engine for variational time evolution under
//! non-Hermitian Hamiltonians.
//!
//! A non-unitary propagator `exp(-iHt)` is written as a weighted sum of
//! unitary evolutions under `H0 - kV` (a linear combination of Hamiltonian
//! simulations), and a hardware-efficient ansatz is trained step by step to
//! follow the normalized trajectory. The crate also contains the
//! Hadamard-test circuit machinery (including the controlled-pair rewrite
//! that removes all three-qubit gates), a dense statevector backend with a
//! matrix-exponential oracle, readout-error mitigation and the model zoo
//! (dissipative Ising, interacting Hatano-Nelson, single-qubit SSH).
//!
//! The crate is `no_std` compatible (with `alloc`) when the default `std`
//! feature is disabled; `std` only adds thread-parallel loss evaluation.
//!
//! Qubit 0 is the leftmost Pauli letter and the most significant bit of a
//! basis-state index throughout.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod circuit;
pub mod error;
pub mod hadamard;
pub mod lchs;
pub mod linalg;
pub mod mitigation;
pub mod models;
pub mod optim;
mod par;
pub mod pauli;
pub mod rng;
pub mod statevec;
pub mod vqs;

mod prelude;

pub use error::{Error, Result};

/// Complex scalar used for every amplitude and coefficient.
pub type C64 = num_complex::Complex64;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
