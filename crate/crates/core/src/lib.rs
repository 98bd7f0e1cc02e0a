//! Overlapping Schwarz domain decomposition for the Helmholtz equation with
//! impedance transmission conditions.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: uniform triangulations of rectangles that resolve prescribed
//!   interface lines.
//! - [`fem`]: the degree-2 Lagrange space and assembly of the complex
//!   Helmholtz forms.
//! - [`linalg`]: compressed sparse storage, a sparse LU factorization and GMRES.
//! - [`decomp`]: overlapping covers and partitions of unity.
//! - [`schwarz`]: the ORAS fixed-point iteration and preconditioner.
//! - [`impmap`]: discrete impedance-to-impedance maps and their norms.
//! - [`oned`]: the exact one-dimensional error propagation operator.
//! - [`opalgebra`]: monomial expansions and closed-form contraction bounds.
//!
//! The guide in `book/` walks through each piece; its code listings are
//! compiled and run as doctests of this crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomp;
pub mod error;
pub mod fem;
pub mod impmap;
pub mod linalg;
pub mod mesh;
pub mod oned;
pub mod opalgebra;
pub mod random;
pub mod schwarz;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Mesh size `k^{-5/4}` used throughout the experiments.
pub fn mesh_size_for(k: f64) -> f64 {
    k.powf(-1.25)
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/fem.md")]
    mod fem {}
    #[doc = include_str!("../../../book/src/schwarz.md")]
    mod schwarz {}
    #[doc = include_str!("../../../book/src/impmap.md")]
    mod impmap {}
    #[doc = include_str!("../../../book/src/oned.md")]
    mod oned {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
}
