//! Correspondence factor analysis of sparse term-document data.
//!
//! The crate covers the full path from raw text to an annotated factor space:
//!
//! * [`corpus`] — record splitting, term extraction, ranked vocabularies.
//! * [`matrix`] — sparse contingency tables, row aggregation, transposition.
//! * [`ca`] — correspondence analysis: masses, chi-squared metric, eigen-reduction
//!   on the smaller dimension, factor coordinates, contributions, and
//!   supplementary projection.
//! * [`powerlaw`] — rank-frequency distributions and log-log power-law fits.
//! * [`experiments`] — aggregation/projection quality comparisons in the
//!   principal factor plane.
//! * [`neighbors`] — full-space factor distances, k-NN, reciprocal pairs,
//!   NN-chain agglomerative clustering, pair-link reports.
//! * [`export`] / [`query`] — factor-annotated XML documents and bounding-box
//!   queries over factor coordinates.
//! * [`formats`] — the on-disk file formats shared by the CLI tools.

pub mod ca;
pub mod corpus;
pub mod experiments;
pub mod export;
pub mod formats;
pub mod matrix;
pub mod neighbors;
pub mod powerlaw;
pub mod query;

mod error;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
