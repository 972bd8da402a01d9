//! Weyl–Titchmarsh theory for half-line Schrödinger operators
//! `-d²/dx² + V(x)` with Hermitian-matrix-valued potentials.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] – dense complex matrices, Hermitian functional calculus,
//!   boundary operators `α` and their Cayley transforms.
//! * [`potential`] – gridded Hermitian potentials and their JSON format.
//! * [`ivp`] – vector- and operator-valued initial value problems,
//!   Picard iterates, Wronskians and Green's-formula diagnostics.
//! * [`weyl`] – fundamental systems, Wronskian identities and the
//!   m-function.
//! * [`green`] – Green's kernel and resolvent application.
//! * [`herglotz`] – Nevanlinna data, Stieltjes inversion, point masses
//!   and Hilbert-transform boundary values.
//! * [`selftest`] – the closed-form and cross-route acceptance checks.

pub mod error;
pub mod green;
pub mod herglotz;
pub mod ivp;
pub mod linalg;
pub mod potential;
pub mod quadrature;
pub mod selftest;
pub mod weyl;

pub use error::{Error, Result};
pub use linalg::{BoundaryOperator, Complex64, ComplexMatrix, ComplexVector, HermitianMatrix};
pub use potential::PotentialModel;
