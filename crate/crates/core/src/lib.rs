//! Birman-Schwinger boundary operators for the three dimensional Dirac operator
//! with an electrostatic delta-shell interaction.
//!
//! The crate discretizes the Weyl function `M(lambda)` of the shell, tracks its
//! eigenvalue curves through the spectral gap `(-mc^2, mc^2)`, locates bound
//! states through `mu_n(lambda) = -1/eta`, evaluates the Krein resolvent formula
//! and checks the structural identities that come with it.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod config;
pub mod error;
pub mod kernels;
pub mod krein;
pub mod operator;
pub mod radial;
pub mod runner;
pub mod schur;
pub mod special;
pub mod spectral;
pub mod surface;
pub mod volume;

pub use error::{Error, Result};
pub use kernels::PhysParams;
pub use num_complex::Complex64 as C64;

/// Point or displacement in R^3.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Complex 4x4 matrix, the value type of every Dirac kernel.
pub type Mat4 = nalgebra::Matrix4<C64>;
/// Spinor value at a point.
pub type Spinor = nalgebra::Vector4<C64>;
