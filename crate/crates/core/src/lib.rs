//! Numerical workbench for intrinsic square functions.
//!
//! Functions on `R^n` (`n = 1, 2`) are represented as piecewise-constant
//! cell data ([`grid::GridFunction`]). On top of that the crate provides
//! cone quadrature over the upper half-space, Muckenhoupt weight machinery,
//! the supremum `A_alpha(f)(y, t)` over the Hölder class `C_alpha` computed as
//! a linear program, the square-function family built from it, and weak
//! Hardy space atoms.

pub mod atoms;
pub mod calpha;
pub mod error;
pub mod grid;
pub mod lp;
pub mod sqfn;
pub mod weights;

pub use error::{Error, Result};
