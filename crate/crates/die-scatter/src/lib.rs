//! 2D frequency-domain electromagnetic scattering with the domain integral
//! equation (DIE): matrix-free FFT-speed operator products, an analytic
//! multiplicative regularizer, and a deflation-based right preconditioner
//! for restarted GMRES, plus the spectral diagnostics and resource-planning
//! arithmetic that go with them.
//!
//! Entry points by task:
//! - build media and grids in [`medium`], operators in [`operator`];
//! - solve with [`krylov::gmres_restarted`];
//! - eigenvalue diagnostics and deflation in [`spectral`];
//! - memory/size planning in [`planner`];
//! - the independent cylinder-series oracle in [`analytic`];
//! - file-level pipelines (solve/spectrum/plan/validate/bench) in [`cli`].
//!
//! The `examples/` directory has one runnable example per capability.

mod bessel;
mod fft;
pub mod analytic;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod krylov;
pub mod linalg;
pub mod medium;
pub mod operator;
pub mod planner;
pub mod spectral;

pub use error::{Error, Result};
pub use medium::{grid_step, rasterize, Background, Grid, MediumMap, ScattererSpec};
