//! Numerical laboratory for lapse-Wick-rotated Laplacians on foliated tori:
//! complex metric geometry, heat-kernel jet recursions, lattice operators,
//! analytic semigroup evolution, and the Lorentzian (Schrodinger) limit.

pub mod config;
pub mod error;
pub mod expm;
pub mod fit;
pub mod fourier;
pub mod eikonal;
pub mod geometry;
pub mod kernel;
pub mod lattice;
pub mod lorentz;
pub mod parametrix;
pub mod poly;
pub mod report;
pub mod semigroup;
pub mod suites;
pub mod transport;

pub use error::{Result, WicklabError};
