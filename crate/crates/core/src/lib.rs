//! Numerical laboratory for the plasma analogy of fully correlated Laughlin
//! states.
//!
//! * [`states`]: prefactors, the Gibbs log weight and the rescaled Hamiltonian;
//! * [`sampler`]: Metropolis sampling of the Gibbs measure and density estimates;
//! * [`ground_state`]: minimizing point configurations and exclusion checks;
//! * [`tf`]: the two-dimensional Thomas-Fermi screening problem;
//! * [`incompressibility`]: bathtub energies and trap-energy comparisons.

pub mod error;
pub mod ground_state;
pub mod incompressibility;
pub mod sampler;
pub mod states;
pub mod tf;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use states::{Configuration, PlasmaParams, Point, Prefactor, QuasiHole};

/// Version tag written into every JSON document produced by this crate.
pub const SCHEMA_VERSION: u32 = 1;
