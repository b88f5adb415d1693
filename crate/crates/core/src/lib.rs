//! Minimal (Wasserstein) and ideal (Zolotarev) distances between normalized
//! partial sums of dependent stationary sequences and their Gaussian limit.
//!
//! The crate is organised as a measurement laboratory:
//!
//! - [`metrics`]: exact and certified distances between one-dimensional laws,
//!   the envelope norm and Hölder seminorms.
//! - [`processes`]: reproducible generators for Markov-chain martingale
//!   differences, linear processes, functions of linear processes and
//!   expanding interval maps, with their exact auxiliary structure.
//! - [`dependence`]: exact mixing coefficients on finite kernels, covariance
//!   inequalities, projective-condition series and the coboundary
//!   decomposition.
//! - [`experiments`]: convergence-rate measurement and upper-bound
//!   consistency verdicts.

pub mod dependence;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod numerics;
pub mod processes;
pub mod rng;

pub use error::{Error, Result};
