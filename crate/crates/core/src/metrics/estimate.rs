use serde::{Deserialize, Serialize};

/// How a distance value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    /// Quantile coupling, exact finite sum.
    ExactMonotone,
    /// Optimal permutation coupling.
    AssignmentExact,
    /// Numerical quadrature, or a coupling not certified optimal.
    Quadrature,
    /// Best element of a verified test-function dictionary.
    DictionaryLower,
}

/// A distance value with a certified enclosing interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: DistanceMethod,
    /// Monte Carlo standard error when the value is an average over replicates.
    pub mc_stderr: Option<f64>,
    /// Absolute quadrature tolerance that went into the value (0 for exact sums).
    pub tolerance: f64,
}

impl DistanceEstimate {
    pub fn exact(value: f64, method: DistanceMethod) -> Self {
        Self {
            value,
            lower: value,
            upper: value,
            method,
            mc_stderr: None,
            tolerance: 0.0,
        }
    }

    pub fn infinite(method: DistanceMethod) -> Self {
        Self::exact(f64::INFINITY, method)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}
