//! Numerical study of repeated position measurements on a free particle:
//! product formulas, Weyl calculus on periodic grids, and the
//! semiclassical symbol hierarchy of the regularized product formula.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod jet;
pub mod phase_space;
pub mod quantization;
pub mod semiclassical;
pub mod spectral;
pub mod symbols;
pub mod zeno;

pub use error::{Error, Result};
