//! Stochastic exponential time-differencing (SETDM0 / SETDM1) integrators
//! for semilinear parabolic SPDEs driven by additive or multiplicative
//! Q-Wiener noise on rectangles.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: uniform rectangular grids and DOF layouts.
//! - [`operators`]: P1 finite-element and finite-volume assembly of the
//!   generator `A_h`, boundary conditions and the collocation projection.
//! - [`krylov`]: Arnoldi evaluation of `phi_0`/`phi_1` actions plus dense oracles.
//! - [`noise`]: spectral Q-Wiener increments on counter-based Brownian paths.
//! - [`darcy`]: pressure solve and face velocities for heterogeneous media.
//! - [`integrators`]: SETDM0, SETDM1 and the semi-implicit Euler-Maruyama baseline.
//! - [`reference`]: exact spectral and fine-step reference solutions.
//! - [`harness`]: strong-convergence studies, order fitting, configuration and reports.

pub mod darcy;
pub mod error;
pub mod grid;
pub mod harness;
pub mod integrators;
pub mod krylov;
pub mod linsolve;
pub mod noise;
pub mod operators;
pub mod reference;
pub mod sparse;

pub use error::{Error, Result};
pub use grid::{BoundaryTag, DofLayout, Grid};
pub use krylov::{KrylovConfig, PhiResult};
pub use sparse::SparseOperator;
