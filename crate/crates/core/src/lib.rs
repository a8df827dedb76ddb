//! Lattice reduction of the two-dimensional Landau Hamiltonian with random
//! point scatterers on the Gaussian integers.
//!
//! The spectrum of the scattered Hamiltonian in each gap between Landau levels
//! is encoded by the lattice matrix family `M^λ`: a real energy λ is an
//! eigenvalue exactly when `M^λ` has a kernel vector. The crate provides
//!
//! * [`specfun`]: digamma, gamma, Kummer functions and the free kernels,
//! * [`disorder`]: reproducible impurity fields and regularity probes,
//! * [`lattice_operator`]: assembly of `M^λ`, band spectra and eigenfunctions,
//! * [`localization`]: fractional-moment Monte Carlo and contraction bounds,
//! * [`degeneracy`]: the canonical product and the degenerate Landau states.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degeneracy;
pub mod disorder;
pub mod error;
pub mod lattice_operator;
pub mod localization;
pub mod numerics;
pub mod specfun;

pub use error::{Error, Result};
