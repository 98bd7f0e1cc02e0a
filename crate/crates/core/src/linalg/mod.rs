//! Sparse complex linear algebra: CSR storage, direct LU and GMRES.

pub mod dense;
mod gmres;
mod lu;
pub mod ordering;
mod sparse;

pub use gmres::{gmres, GmresOutcome};
pub use lu::{factorize, SparseLu, PIVOT_THRESHOLD, SINGULAR_TOL};
pub use sparse::{ComplexSparseMatrix, TripletBuilder};

pub type SparseFactorization = SparseLu;

/// Euclidean norm of a complex vector.
pub fn norm2(v: &[crate::C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
