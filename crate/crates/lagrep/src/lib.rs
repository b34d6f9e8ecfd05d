//! Numerical toolkit for the Lagrangian-involution calculus on unitary
//! representations of punctured-sphere groups.
//!
//! The crate is organized around the objects it computes with:
//!
//! - [`numerics`]: dense complex/real kernels (unitary spectra, signatures,
//!   Takagi-style factorization, Haar sampling, class distance);
//! - [`lagrangian`]: Lagrangian subspaces of C^n, their involutions and the
//!   splitting of unitary matrices into products of two involutions;
//! - [`spectra`]: eigenvalue-angle combinatorics (index, multiplicity
//!   strata, boundary collapse, bracket inequalities for U(2)/U(3));
//! - [`maslov`]: inertia indices of Lagrangian tuples and the index
//!   identities tying them to representation data;
//! - [`deformation`]: representations of the punctured-sphere group,
//!   twist/bend deformations and differential rank checks;
//! - [`symplectic`]: the invariant 2-form on products of conjugacy classes
//!   and the numerical isotropy test;
//! - [`solver`]: numerical realization of prescribed eigenvalue data by
//!   unitary and Lagrangian representations, plus chamber scanning;
//! - [`io`]: JSON encodings of all domain types.

pub mod error;
pub mod numerics;
pub mod lagrangian;
pub mod spectra;
pub mod maslov;
pub mod deformation;
pub mod symplectic;
pub mod solver;
pub mod io;

pub use error::{Error, Result};
pub use numerics::{Seed, Tolerances};
