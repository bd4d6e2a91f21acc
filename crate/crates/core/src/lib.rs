//! Entanglement dynamics in quantum-chaotic systems.
//!
//! Two models share one analysis pipeline:
//!
//! * an alkali atom in a one-dimensional magneto-optical lattice, where the
//!   center-of-mass motion couples to the hyperfine spin through a
//!   position-dependent effective magnetic field ([`amol`], with its classical
//!   limit in [`classical`]);
//! * the quantum kicked top realized as `N = 2j` qubits in the symmetric
//!   subspace ([`kicked_top`]).
//!
//! Propagation goes through the eigenbasis of the evolution operator
//! ([`spectral`]); reduced states, linear entropy, power spectra and rise-law
//! fits live in [`entanglement`].
//!
//! Units: `ħ = k = 1` and `M = 1/2`, so the recoil energy `E_R = ħ²k²/2M` is
//! exactly one and time is `τ = E_R t / ħ`. Positions are stored in units of
//! `1/k` and reported as `z/λ`; momenta are in units of `ħk`.

pub mod amol;
pub mod classical;
pub mod entanglement;
mod error;
pub mod kicked_top;
pub mod linalg;
pub mod spectral;
pub mod spin;
pub mod split_operator;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
