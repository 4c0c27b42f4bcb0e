//! Simulation of destructive Wigner-function readout of a nanomechanical
//! oscillator.
//!
//! A two-level detector atom couples to the oscillator (phonon mode `c`)
//! through a magnetic Jaynes–Cummings interaction and to an optical mode
//! `a` through a Raman transition. With matched couplings the atom sees the
//! composite mode `A = (a + c)/√2`, and for a strong coherent Raman field its
//! excited-state probability samples the oscillator's Wigner characteristic
//! function `C_W(μ) = Tr[ρ D(μ)]`.
//!
//! Modules, bottom-up:
//!
//! - [`fockspace`]: truncated Fock-space states and operators, Kronecker
//!   products, exact unitary evolution, partial traces.
//! - [`device`]: SI device parameters to coupling rates.
//! - [`dynamics`]: Jaynes–Cummings Hamiltonians, closed-form and exact
//!   excited-state probabilities, excitation-block propagation.
//! - [`tomography`]: characteristic functions, probe rasters, synthetic
//!   measurement records, inversion and Wigner transforms.
//! - [`backaction`]: conditional state updates and measurement sequences.
//!
//! Units: every Hamiltonian is an angular frequency (rad/s) with ħ = 1.
//! Tensor ordering is atom ⊗ photon ⊗ phonon, leftmost factor slowest.

pub mod backaction;
pub mod device;
pub mod dynamics;
mod error;
pub mod fockspace;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
