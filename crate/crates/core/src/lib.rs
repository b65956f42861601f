//! Spectral toolkit for the anisotropic fourth-order Schrodinger equation
//! `i psi_t + psi_xx - psi_yyyy + |psi|^(p-2) psi = 0` on a periodic box.

pub mod cli;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod ground_state;
pub mod kernel;
pub mod params;
pub mod snapshot;
pub mod spectral;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::Grid2D;
pub use params::ModelParams;
