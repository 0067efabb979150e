//! Finite-scale laboratory for random limsup covering sets.
//!
//! Balls `B(ω_n, r_n)` with uniformly random centres are thrown into the unit
//! cube (or into a symbolic shift space), and the set of points covered
//! infinitely often is probed from both sides: tail cover sums give the upper
//! bound on its Hausdorff dimension, fiber density in a product splitting of
//! the symbolic space gives the lower bound.
//!
//! Modules:
//! - [`radius`]: radius sequences, their critical exponent and tail sums.
//! - [`symbolic`]: the symbolic space `Σ_I` with exact cylinder measures.
//! - [`coding`]: the dyadic coding map from symbol sequences to the cube.
//! - [`simulator`]: Monte Carlo coverage multiplicity on a dyadic grid.
//! - [`dimension`]: box counting, slope fits and the critical-exponent estimate.
//! - [`fiber`]: fiber hit sets and their density at finite resolution.

pub mod coding;
pub mod dimension;
pub mod error;
pub mod fiber;
pub mod radius;
pub mod rng;
pub mod simulator;
pub mod symbolic;

pub use error::{Error, ErrorClass, Result};
