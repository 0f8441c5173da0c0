//! Coupling-compensated quantum state tomography.
//!
//! The crate simulates tomography pre-rotation pulses on qubits with
//! always-on ZZ (cross-Kerr) coupling. It builds the measurement projectors
//! that the coupled hardware really implements. It then reconstructs density
//! matrices by maximum likelihood against those native projectors, so the
//! stray coupling is compensated entirely in post-processing.
//!
//! Conventions used everywhere in the crate:
//!
//! * Qubits are indexed from 0. Qubit 0 is the most significant bit of a
//!   computational-basis index, so for two qubits the basis is
//!   `|gg>, |ge>, |eg>, |ee>`. Bitstrings print qubit 0 leftmost.
//! * Frequencies, couplings and drive amplitudes are angular (rad/s) inside
//!   the library. The JSON config accepts MHz (meaning `J / 2pi`), ns and
//!   degrees and converts once on load.
//! * Pulse times are absolute. Tomography starts at `t = 0`, which is also
//!   the instant state preparation ends, so preparation pulses run at
//!   negative times.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod harness;
pub mod measure;
pub mod model;
pub mod qmath;
pub mod tomo;

pub use error::{Error, Result};
pub use qmath::{ComplexMatrix, DensityMatrix, StateVector};
