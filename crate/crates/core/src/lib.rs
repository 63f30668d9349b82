//! Inexact Newton regularization for nonlinear ill-posed inverse problems.
//!
//! The outer iteration linearizes the forward map at the current iterate and
//! takes one step of a linear spectral regularization method,
//!
//! ```text
//! x_{n+1} = x_n - g_{α_n}(F'(x_n)* F'(x_n)) F'(x_n)* (F(x_n) - y^δ),
//! ```
//!
//! with an a-priori sequence `α_n` and termination by the discrepancy
//! principle `‖F(x_n) - y^δ‖ ≤ τδ`.
//!
//! Modules:
//!
//! * [`linops`]: dense and tridiagonal kernels, symmetric eigensolver, operator norm estimate.
//! * [`filters`]: the spectral filter families and their operator application.
//! * [`schedules`]: regularization parameter sequences and their partial sums.
//! * [`newton`]: the outer driver, iteration traces and source condition diagnostics.
//! * [`bvp`]: coefficient identification in `-u'' + c u = f` with Dirichlet data.
//! * [`experiment`]: noise generation, the reference experiments and report I/O.

pub mod bvp;
pub mod error;
pub mod experiment;
pub mod filters;
pub mod linops;
pub mod newton;
pub mod schedules;

pub use error::{Error, Result};
pub use filters::FilterSpec;
pub use newton::{InverseProblem, IterationTrace, SolveConfig};
pub use schedules::AlphaSchedule;
