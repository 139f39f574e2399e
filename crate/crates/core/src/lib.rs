//! Simulation laboratory for the one-round sponge.
//!
//! The crate builds bit-exact truth tables for the one-round sponge
//! `Sp^φ(x) = top_r(φ(x ‖ 0^c))`, samples uniform members of the Young
//! subgroups that stabilise its rate blocks, and uses them to implement the
//! symmetrizing simulator that answers `φ̂` and `φ̂⁻¹` with a single query to
//! a random function `f`. On top of that sit game runners for
//! indifferentiability with pre-computation, shared-randomness removal,
//! the composition reduction, and the classical trade-off experiments
//! (trapdoor separation, Hellman inversion, truncated-permutation curves).
//!
//! Module map:
//!
//! - [`bitdomain`]: widths, words, seeds and dense truth tables.
//! - [`sponge`]: the construction, the private/public interface, real and
//!   random-oracle worlds.
//! - [`young`]: block partitions, Young subgroups, double-coset signatures
//!   and exhaustive census for `N ≤ 8`.
//! - [`symsim`]: the transversal permutation, offline symmetrization and the
//!   stateless query simulator.
//! - [`games`]: indifferentiability experiments, simulator lifting,
//!   shared-randomness removal, composition and security games.
//! - [`attacks`]: trapdoor separation and Hellman tables.
//! - [`stats`]: exact laws, total variation, chi-square and the truncation
//!   curve.

pub mod attacks;
pub mod bitdomain;
mod error;
pub mod games;
pub mod sponge;
pub mod stats;
pub mod symsim;
pub mod young;

pub use error::{Error, Result};

/// Library version, recorded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
