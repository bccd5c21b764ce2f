//! Simulation of light in a semi-infinite binary waveguide lattice whose
//! propagation constants form a ramp with an alternating offset.

pub mod crystal;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod modes;
pub mod special;
pub mod spectrum;

pub use crystal::{build_hamiltonian, CrystalParams, Parity, TridiagonalOperator};
pub use error::{LatticeError, Result};
