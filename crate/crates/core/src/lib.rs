//! Elliptic Calogero-Moser systems: Jacobi theta and Weierstrass functions,
//! Lax pairs for the vector, root-type, twisted and spin models, their
//! isospectral and isomonodromic flows, and monodromy of the linear problem
//! `dY/dz = L(z) Y` on the torus.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;

pub mod dynamics;
pub mod elliptic;
mod error;
pub mod linalg;
pub mod models;
pub mod monodromy;
pub mod rootsys;

pub use error::Error;

/// Double precision complex number used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Shorthand for results carrying [`Error`].
pub type Result<T> = core::result::Result<T, Error>;
