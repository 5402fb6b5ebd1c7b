//! Numerical laboratory for admissible vector fields on the path space of an
//! elliptic diffusion on a compact embedded manifold.
//!
//! The crate simulates the Stratonovich diffusion `dx = X_i(x) o dw_i + Y(x) dt`,
//! builds the vector fields `Z_t = X_i(x_t) h^i_t` together with their
//! divergences, integrates the flows they generate on path space, and checks
//! integration by parts and quasi-invariance of the diffusion law by Monte Carlo.

pub mod convergence;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod girsanov;
pub mod mcverify;
pub mod sde;

pub use error::{Error, Result};
