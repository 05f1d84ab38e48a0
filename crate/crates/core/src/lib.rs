//! Few-excitation spectra of quantum emitters coupled to a one-dimensional
//! tight-binding photonic bath.
//!
//! The crate covers single-excitation bound states, two-excitation bound
//! states of emitter pairs and periodic arrays, three-excitation bound
//! states, exact diagonalization for small lattices and a particle-number
//! conserving DMRG for the many-body ground state.

pub mod array_pair;
pub mod bath;
pub mod checks;
pub mod ed;
pub mod error;
pub mod fourier;
pub mod mps;
pub mod roots;
pub mod single;
pub mod triplon;
pub mod two_qe;

pub use bath::{BathSpec, Branch, CouplingSpec, InBand, ModeSum, SelfEnergyValue};
pub use error::{Error, Result};
