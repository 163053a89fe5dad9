//! Energy-conserving "dual composition" spatial discretizations of
//! conservative PDEs.
//!
//! Differentiation operators are factored as `D = S^-T A`, with `S` the Gram
//! matrix between a trial space `F0` and a weight space `F1`, and `A` the
//! (skew, or boundary-defective) matrix of the operator on `F1`. Composing
//! the operator discretization with the variational-derivative
//! discretization `S^-1 grad H` yields ODEs `u' = S^-T A S^-1 grad H(u)`
//! that conserve `H` whenever `A` is antisymmetric.

pub mod assembly;
pub mod basis;
pub mod error;
pub mod experiment;
pub mod fastgalerkin;
pub mod hamiltonian;
pub mod io;
pub mod quadham;
pub mod system;
pub mod timeint;
pub mod verify;

pub use error::{Error, Result};
