//! Matching scalar signals on a fixed triangulated surface against a target
//! functional shape.
//!
//! The attachment term is the dual RKHS norm between functional varifolds
//! built from Gaussian kernels on position, tangent plane and signal value.
//! Penalties on the signal are L², H¹ or a smoothed BV norm discretized with
//! P0/P1 finite elements. The [`surface`] module provides analytic reference
//! surfaces used to study the behaviour of the discrete energies under mesh
//! refinement.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fem;
pub mod io;
pub mod matching;
pub mod mesh;
pub mod quadrature;
pub mod surface;
pub mod varifold;

pub use error::{Error, Result};
pub use mesh::{TriangleMesh, Vec3};
