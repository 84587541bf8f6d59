//! Random-matrix analysis of cross-correlation structure in asset returns.
//!
//! The pipeline runs prices → log returns → normalized returns →
//! correlation matrix → eigenspectrum, then separates significant modes from
//! the Wishart bulk, splits each mode into sign subsectors and measures how
//! strongly those subsectors move against each other.

pub mod anticorr;
pub mod corrmatrix;
pub mod error;
pub mod rmt;
pub mod sectors;
pub mod synth;
pub mod timeseries;

pub use corrmatrix::{correlation_matrix, eigendecompose, CorrelationMatrix, EigenSpectrum};
pub use error::{Error, ErrorKind, Result};
pub use rmt::{mp_bounds, mp_density, significant_eigenvalues, SignificantSet, WishartLaw};
pub use sectors::{Side, SubsectorPartition};
pub use timeseries::{log_returns, normalize_returns, NormalizedReturns, PricePanel, ReturnMatrix};
