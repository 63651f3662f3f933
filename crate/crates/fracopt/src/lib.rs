//! Solvers and optimality checks for control-constrained optimal control
//! of time-fractional diffusion equations.
//!
//! The governing model is the subdiffusion equation with a Caputo time
//! derivative of order α ∈ (0, 1),
//!
//! ```text
//! d^α y/dt^α = Δy + u   in (0,T) × Ω,
//! y = 0                 on the boundary,
//! y(0) = y₀,
//! ```
//!
//! steered by a distributed control u subject to pointwise box bounds
//! a ≤ u ≤ b, with a running cost ∫ L(t,x,y,u). The crate provides
//!
//! * discrete fractional calculus (L1 scheme, Riemann–Liouville integrals,
//!   Mittag-Leffler functions) in [`fracops`],
//! * Dirichlet box grids with exact discrete eigenpairs in [`grid`],
//! * a forward L1 solver plus an independent spectral oracle in [`state`],
//! * time-reversal and exact-transpose adjoints in [`adjoint`],
//! * the cost models and their derivatives in [`cost`],
//! * projected-gradient optimization in [`optimize`],
//! * first/second-order optimality verification in [`kkt`],
//! * a config-driven CLI runner in [`config`] / [`runner`].
//!
//! The `book/` directory of the repository walks through the same modules
//! chapter by chapter; its code snippets compile as doctests of this crate.

pub mod adjoint;
pub mod config;
pub mod cost;
pub mod error;
pub mod expr;
pub mod fracops;
pub mod grid;
pub mod kkt;
pub mod optimize;
pub mod runner;
pub mod state;

mod quad;

pub use error::{Error, Result};
