//! Structure-preserving integration of linear Hamiltonian systems with
//! time-dependent coefficients, `y' = A(t) y` with `A(t)` in the symplectic
//! Lie algebra.
//!
//! The library works in extended phase space: the state carries time `t` and
//! a conjugate energy variable `u` alongside `(q, p)`, so that one-step maps
//! can be checked and constructed as canonical transformations. It ships a
//! zoo of one-step methods (exponential/Magnus-type, implicit Runge-Kutta in
//! extended phase space, Kahan, symplectic Euler, and deliberately broken
//! exponential variants), numerical verification of their structural
//! properties, and a long-time energy-error experiment harness with a CLI.

pub mod error;
pub mod harness;
pub mod integrators;
pub mod matkernels;
pub mod model;
pub mod verify;

pub use error::{Error, Result};
