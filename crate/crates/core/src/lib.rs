//! Finite-dimensional ergodic optimization for the one-sided binary shift.
//!
//! The library works with step functions on the Cantor space {0,1}^N given by
//! exact rational cylinder values or, equivalently, by their Haar coefficients.
//! Shift-invariant measures project to cylinder-frequency vectors; at level n
//! the projection image is a polytope whose vertices are the periodic orbits
//! that visit each level-(n-1) cylinder at most once, i.e. the simple cycles
//! of the n-th binary de Bruijn graph. On that polytope the ergodic supremum
//! is a finite linear program, and a strict gap between the best and the
//! second-best vertex, compared against a weighted bound on the discarded
//! Haar tail, certifies that the truncation's maximizing orbit is the unique
//! maximizing measure of the full function. The brick module samples random
//! Haar coefficients inside gauge bounds and measures how often that
//! certificate is obtained.
//!
//! All certification arithmetic is exact: rationals are arbitrary-precision,
//! and quantities whose magnitude underflows any fixed-precision format
//! (gauge values like 2^(-2^n)) are carried as scaled rationals with a big
//! power-of-two exponent.

pub mod brick;
pub mod certify;
pub mod cli;
pub mod debruijn;
mod error;
pub mod haar;
pub mod magnitude;
pub mod optimize;
pub mod polytope;
pub mod rat;

pub use error::{Error, Result};
