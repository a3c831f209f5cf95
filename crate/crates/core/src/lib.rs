//! Hausdorff operators on `L^2(R^n)` through their matrix symbols.
//!
//! An operator `(Hf)(x) = ∫ K(u) f(A(u) x) dμ(u)` whose dilations commute is
//! unitarily equivalent to multiplication by a `2^n x 2^n` matrix function
//! `Φ(s)`. This crate discretizes the measure, evaluates `Φ`, and reads off
//! norms, spectra and structural properties. The Mellin side checks the
//! equivalence numerically against direct application of the operator.

pub mod error;
pub mod expr;
pub mod fixtures;
pub mod hadamard;
pub mod mellin;
pub mod octant;
pub mod par;
pub mod quadrature;
pub mod spec;
pub mod special;
pub mod spectral;
pub mod symbol;
pub mod verify;

pub use error::{Error, Result};
pub use par::Execution;
pub use quadrature::{discretize_measure, NodeSet, QuadConfig};
pub use spec::{parse_config, FunctionSpec, OperatorSpec};
pub use symbol::{SymbolGrid, SymbolMatrix};
