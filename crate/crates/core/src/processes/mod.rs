//! Reproducible generators for the example processes, with their exact
//! auxiliary structure: kernels, stationary laws, invariant densities and
//! long-run variances.

pub mod batch;
pub mod davydov;
pub mod innovation;
pub mod kernel;
pub mod linear;
pub mod maps;
pub mod prepared;
pub mod spec;

pub use batch::{partial_sums_batch, GridSummary, TrajectoryBatch, DEFAULT_STEP_BUDGET};
pub use davydov::{davydov_kernel, davydov_schedule, mds_functional, schedule_start, DavydovChain};
pub use innovation::InnovationLaw;
pub use kernel::{sample_chain, FiniteKernel, MarkovOperator, KERNEL_TOL};
pub use linear::{apply_h, sample_linear_process, FunctionOfLinear, TruncatedLinear};
pub use maps::{duality_residual, invariant_density, iterate_map, iterate_rational, InvariantDensity, PreparedMap};
pub use prepared::{long_run_variance, LongRunVariance, Prepared, PreparedProcess, VarianceMethod};
pub use spec::*;
