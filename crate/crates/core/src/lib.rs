//! High-order finite-difference solver for the magnetic induction equation
//! (linear transport and nonlinear Hall form) built on diagonal-norm
//! summation-by-parts operators with simultaneous approximation terms, plus
//! projection-based divergence cleaning and a convergence/energy test harness.

pub mod cleaning;
pub mod error;
pub mod grid;
pub mod harness;
pub mod rhs;
pub mod sbp;
pub mod solutions;
pub mod time;

pub use error::Error;
pub use grid::{GridSpec, ScalarField, VectorField};
pub use rhs::{FormSelection, SourceForm, TermForm};

