//! Rate experiments: simulate, measure distances against Gaussians, fit
//! log-log slopes and judge them against predicted exponents.

mod fit;
mod output;
mod plan;
mod run;

pub use fit::{
    fit_log_power, fit_power, spearman, upper_bound_consistency, weighted_least_squares, Consistency,
    ConsistencyVerdict, LogPowerFit, PowerFit, Regression, MIN_POINTS, SPEARMAN_LIMIT,
};
pub use output::{from_json, render_svg, to_json, write_csv, CSV_HEADER};
pub use plan::{
    theoretical_exponent, ExperimentPlan, Target, TheoreticalExponent, DEFAULT_CALIBRATION_REPS, DEFAULT_REPLICATES,
};
pub use run::{
    berry_esseen_cascade, calibration_floor, run_experiment, run_on_batch, BerryEsseenCascade, CalibrationFloor,
    CascadeRow, CurveFit, CurvePoint, RateFitResult, RateVerdict, FLOOR_MULTIPLE, MISCALIBRATION, SCHEMA_VERSION,
};
