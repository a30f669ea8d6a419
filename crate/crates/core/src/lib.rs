//! Computational realization of sequence-valued Bourgain-Morrey norms and
//! their predual block norms on a finite dyadic lattice.
//!
//! The crate provides:
//! - dyadic cube geometry over a bounded window ([`lattice`]);
//! - vector-valued piecewise-constant grid functions with exact cell sums
//!   ([`grid`], [`exponents`]);
//! - the primal cube-family norm, slice norms, and a sampled continuous
//!   characterization ([`bm_norms`]);
//! - the conjugate block norm by two independent routes, a decomposition
//!   infimum and a dual pairing supremum ([`block_norms`]);
//! - averaging, translation, convolution, and maximal operators
//!   ([`operators`]);
//! - a seeded verification suite certifying every quantitative inequality
//!   ([`verifier`]).

pub mod block_norms;
pub mod bm_norms;
pub mod error;
pub mod exponents;
pub mod grid;
pub mod lattice;
pub mod operators;
pub mod verifier;

pub use error::{Error, Result};
pub use exponents::{ExponentSet, OuterExp};
pub use grid::GridFunction;
pub use lattice::{CubeIndex, LatticeConfig};
