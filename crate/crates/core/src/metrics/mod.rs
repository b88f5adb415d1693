//! Distances between one-dimensional laws and the auxiliary norms of the
//! rate conditions.

mod assignment;
mod empirical;
mod envelope;
mod estimate;
mod grid;
mod kolmogorov;
mod wasserstein;
mod zolotarev;

pub use assignment::solve as solve_assignment;
pub use empirical::{EmpiricalDistribution, GaussianLaw, Law};
pub use envelope::{
    envelope_norm, envelope_split, envelope_weight, weight_primitive, FnQuantile, TailQuantile, TailQuantileFn,
    ENVELOPE_TOL,
};
pub use estimate::{DistanceEstimate, DistanceMethod};
pub use grid::{
    smoothing_constant, smoothing_lemma_check, smoothing_suite, GridFunction, SmoothingCase, SmoothingCheck,
    SmoothingProfile, DEFAULT_HALF_WIDTH,
    DEFAULT_POINTS, KERNEL_TRUNCATION, SMOOTHING_SLACK,
};
pub use kolmogorov::{kolmogorov, kolmogorov_from_prokhorov, prokhorov_bound};
pub use wasserstein::{
    gaussian_gaussian_distance, monotone_cost, wasserstein_samples, wasserstein_samples_with_cap,
    wasserstein_vs_gaussian, DEFAULT_ASSIGNMENT_CAP, PIECE_TOL,
};
pub use zolotarev::{
    derivative_order, dictionary, pseudo_moment_bound, zolotarev, DictionaryElement, Shape,
    MOMENT_TOL,
};
