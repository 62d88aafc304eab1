//! Simulation and exact verification toolkit for permutation processes:
//! continuous-time particle systems on ℤ^d (or a torus) in which finite
//! permutations of sites fire at shift-invariant rates.

pub mod cli;
pub mod coupling;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod permutation;
pub mod process;
pub mod rates;

pub use error::{Error, Result};
pub use lattice::{Lattice, LatticeMode, Site};
pub use permutation::{FinitePermutation, RangeSet};
pub use process::{Configuration, DualState, Estimate};
pub use rates::{FamilyReport, RateFamily};
