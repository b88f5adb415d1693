use serde::{Deserialize, Serialize};

use crate::processes::{ProcessSpec, DEFAULT_STEP_BUDGET};
use crate::{Error, Result};

fn default_n_grid() -> Vec<u64> {
    (6..=14).map(|k| 1u64 << k).collect()
}
pub const DEFAULT_REPLICATES: u64 = 10_000;
pub const DEFAULT_CALIBRATION_REPS: usize = 100;

fn default_replicates() -> u64 {
    DEFAULT_REPLICATES
}
fn default_true() -> bool {
    true
}
fn default_bootstrap() -> usize {
    200
}
fn default_calibration_reps() -> usize {
    DEFAULT_CALIBRATION_REPS
}
fn default_budget() -> u64 {
    DEFAULT_STEP_BUDGET
}

/// Gaussian the normalized sums are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `G_{σ²}` with the long-run variance.
    Sigma2,
    /// `G_{σ_n²}` with `σ_n² = E S_n² / n`.
    SigmaN2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub process: ProcessSpec,
    /// Moment order; must equal `process.p_moment`.
    pub p: f64,
    pub r_list: Vec<f64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<u64>,
    /// Replicates `M` per grid point.
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    pub target: Target,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub calibration: bool,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_calibration_reps")]
    pub calibration_reps: usize,
    /// Guard on `M · max(n)`.
    #[serde(default = "default_budget")]
    pub step_budget: u64,
}

impl ExperimentPlan {
    /// Plan with the default grid, `M`, bootstrap and calibration sizes.
    pub fn new(process: ProcessSpec, r_list: Vec<f64>, target: Target, seed: u64) -> Self {
        Self {
            p: process.p_moment,
            process,
            r_list,
            n_grid: default_n_grid(),
            replicates: default_replicates(),
            target,
            seed,
            calibration: true,
            bootstrap: default_bootstrap(),
            calibration_reps: default_calibration_reps(),
            step_budget: default_budget(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.process.validate()?;
        let p = self.p;
        if !(p > 2.0 && p <= 3.0) {
            return Err(Error::invariant("p ∈ (2, 3]", format!("p = {p}")));
        }
        if p != self.process.p_moment {
            return Err(Error::invariant(
                "plan p equals the process moment order",
                format!("p = {p}, process p_moment = {}", self.process.p_moment),
            ));
        }
        if self.r_list.is_empty() {
            return Err(Error::invalid("r_list is empty"));
        }
        for &r in &self.r_list {
            if !(r >= p - 2.0 && r <= p) {
                return Err(Error::invariant("every r ∈ [p−2, p]", format!("r = {r}, p = {p}")));
            }
            if r > 2.0 && self.target == Target::Sigma2 {
                return Err(Error::invariant(
                    "target = sigma_n2 when r > 2",
                    format!("r = {r}: the ideal distance needs matching second moments, so σ must be replaced by σ_n"),
                ));
            }
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|n| !n.is_power_of_two()) {
            return Err(Error::invariant("n_grid holds powers of two", format!("{:?}", self.n_grid)));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invariant("n_grid increasing", format!("{:?}", self.n_grid)));
        }
        if self.replicates < 100 {
            return Err(Error::invalid(format!("replicates = {} < 100", self.replicates)));
        }
        if self.bootstrap < 2 {
            return Err(Error::invalid("bootstrap needs at least 2 resamples"));
        }
        if self.calibration && self.calibration_reps < 2 {
            return Err(Error::invalid("calibration needs at least 2 repetitions"));
        }
        Ok(())
    }
}

/// Predicted rates for the pair `(r, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalExponent {
    /// Exponent of `ζ_r`: `1 − p/2`, or `−r/2` below `r = p − 2`.
    pub zeta_exp: f64,
    /// Exponent of `W_r`: `−(p−2)/(2 max(1, r))`, or `−r/2` below `p − 2`.
    pub w_exp: f64,
    /// `(r, p) = (1, 3)`: the bound carries an extra `log n`.
    pub log_factor: bool,
}

pub fn theoretical_exponent(r: f64, p: f64) -> Result<TheoreticalExponent> {
    if !(p > 2.0 && p <= 3.0) {
        return Err(Error::invalid(format!("p must lie in (2, 3], got {p}")));
    }
    if !(r > 0.0) {
        return Err(Error::invalid(format!("r must be positive, got {r}")));
    }
    if r < p - 2.0 {
        // W_r = ζ_r for r < 1
        return Ok(TheoreticalExponent { zeta_exp: -r / 2.0, w_exp: -r / 2.0, log_factor: false });
    }
    Ok(TheoreticalExponent {
        zeta_exp: 1.0 - p / 2.0,
        w_exp: -(p - 2.0) / (2.0 * r.max(1.0)),
        log_factor: r == 1.0 && p == 3.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{IidSpec, InnovationLaw, ProcessFamily};

    fn iid(p: f64) -> ProcessSpec {
        ProcessSpec { family: ProcessFamily::IidBaseline(IidSpec { law: InnovationLaw::Gaussian }), seed: 0, p_moment: p }
    }

    #[test]
    fn exponents() {
        let e = theoretical_exponent(1.0, 3.0).unwrap();
        assert_eq!(e.w_exp, -0.5);
        assert!(e.log_factor);
        assert_eq!(theoretical_exponent(1.0, 2.5).unwrap().w_exp, -0.25);
        assert!((theoretical_exponent(3.0, 3.0).unwrap().w_exp + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(theoretical_exponent(0.2, 2.5).unwrap().w_exp, -0.1);
    }

    #[test]
    fn large_r_needs_sigma_n() {
        let mut plan = ExperimentPlan::new(iid(3.0), vec![3.0], Target::Sigma2, 1);
        let err = plan.validate().unwrap_err().to_string();
        assert!(err.contains("sigma_n2"), "{err}");
        plan.target = Target::SigmaN2;
        plan.validate().unwrap();
        plan.r_list = vec![0.5];
        assert!(plan.validate().is_err());
    }
}
