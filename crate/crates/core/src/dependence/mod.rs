//! Dependence coefficients, covariance inequalities, conditional moments and
//! the projective and mixing conditions built from them.

pub mod coboundary;
pub mod covariance;
pub mod envelope_check;
pub mod linear_bounds;
pub mod moments;
pub mod profile;
pub mod series;

pub use coboundary::{coboundary, CoboundaryDecomposition};
pub use covariance::{
    check_covariance_inequality, covariance_product_bound, quantile_product_integral, BoundForm, CovarianceCheck,
    DeclaredFunctional, JointLaw, MonotonePiece, ProductBounds, COVARIANCE_SLACK,
};
pub use envelope_check::{envelope_contraction_check, EnvelopeCheck};
pub use linear_bounds::{an_bn, an_bn_tails, AnBn, CoefficientTails};
pub use moments::{conditional_second_moment, ConditionalMoments};
pub use profile::{
    alpha1_exact, alpha1_profile, phi_coeff, phi_profile, CoefficientMethod, CoefficientValue, DependenceProfile,
    PhiProfile, DEFAULT_GAP_CAP,
};
pub use series::{
    condalpha1_for_chain, evaluate_conditions, series_an_bound, series_c1_c2, series_condalpha1, series_condphi,
    series_heyde, series_projective, verdict, ConditionId, ConditionReport, SeriesConfig, Verdict, VerdictDiagnostics,
};
