//! Reflection-free complex absorbing potentials from smooth exterior scaling,
//! for one-dimensional time-dependent Schrödinger propagation.

pub mod boundary;
pub mod cap;
pub mod checks;
pub mod contour;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod hamiltonian;
pub mod par;
pub mod potential;
pub mod propagation;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use grid::{Grid, State};
pub use potential::PotentialModel;
