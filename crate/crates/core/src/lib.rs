//! Floating-point summation error laboratory.
//!
//! Emulates low- and mixed-precision summation under round-to-nearest and
//! stochastic rounding, traces every roundoff, replays the traces through
//! exact error identities, and evaluates deterministic and probabilistic
//! forward-error bounds.

pub mod bounds;
pub mod eft;
pub mod fp;
pub mod harness;
pub mod kernels;
pub mod oracles;
pub mod tree;
pub mod verify;

pub use fp::{Precision, Rounder, RoundingMode, RoundoffRecord};
pub use tree::{CompTree, TreeShape, TreeStats};
