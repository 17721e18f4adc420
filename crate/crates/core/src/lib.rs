//! Evaluation, slicing and minimization of the local/nonlocal perimeter
//! functional
//!
//! ```text
//! F_τ(E) = L^{-d} [ J_τ Per(E, [0,L)^d) − ∫∫ |χ_E(x+ζ) − χ_E(x)| K_τ(ζ) dζ dx ]
//! ```
//!
//! on `[0,L)^d`-periodic sets, with `K_τ(ζ) = max(τ^{1/(p-d-1)}, ‖ζ‖)^{-p}`.

pub mod diagnostics;
pub mod error;
pub mod geometry1d;
pub mod kernel;
pub mod lattice;
pub mod num;
pub mod optimizer;
pub mod report;
pub mod slicing;

pub use error::{Error, Result};
pub use kernel::{Extended, KernelSpec};
pub use report::{EnergyReport, Route};
