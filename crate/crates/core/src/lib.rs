//! Nonnegative/binary matrix factorization.
//!
//! `V ≈ WH` with `W >= 0` and `H ∈ {0,1}`, solved by alternating least
//! squares. The binary step splits into one QUBO per column, which can be
//! handed to an exact solver, a rounded relaxation, or simulated annealing.

pub mod als;
pub mod datagen;
pub mod metrics;
pub mod anneal;
pub mod error;
pub mod io;
pub mod model;
pub mod pgd;
pub mod qubo;
pub mod eval;

pub use error::{NbmfError, Result};
pub use model::{BinaryMatrix, BinaryVector, BoxVector, Matrix, NonnegMatrix, RngSpec};
