//! TOML run configuration. Sections mirror the library modules; every table
//! rejects unknown keys.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use cltlab_core::dependence::{ConditionId, COVARIANCE_SLACK, DEFAULT_GAP_CAP};
use cltlab_core::experiments::{ExperimentPlan, Target};
use cltlab_core::metrics::SMOOTHING_SLACK;
use cltlab_core::processes::{ProcessFamily, ProcessSpec, KERNEL_TOL};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub cli: CliSection,
    #[serde(default)]
    pub processes: Option<ProcessesSection>,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub dependence: DependenceSection,
    #[serde(default)]
    pub experiments: ExperimentsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliSection {
    pub seed: u64,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessesSection {
    pub p_moment: f64,
    pub model: ProcessFamily,
    /// Residual allowed in the transfer-operator duality suite.
    #[serde(default = "d_duality_tol")]
    pub duality_tol: f64,
    /// Row-sum and `πK = π` tolerance of the kernel suite.
    #[serde(default = "d_kernel_tol")]
    pub kernel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "d_smoothing_slack")]
    pub smoothing_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependenceSection {
    /// Condition labels; all those available for the family when absent.
    #[serde(default)]
    pub conditions: Option<Vec<String>>,
    #[serde(default = "d_n_terms")]
    pub n_terms: usize,
    #[serde(default = "d_outer_draws")]
    pub outer_draws: usize,
    #[serde(default = "d_gap_cap")]
    pub gap_cap: usize,
    /// Moment order `s ≥ p` of the φ condition.
    #[serde(default = "d_condphi_s")]
    pub condphi_s: f64,
    #[serde(default = "d_an_log2")]
    pub an_bound_max_log2: u32,
    #[serde(default = "d_covariance_slack")]
    pub covariance_slack: f64,
    #[serde(default = "d_envelope_slack")]
    pub envelope_slack: f64,
    #[serde(default = "d_an_slack")]
    pub an_bound_slack: f64,
    #[serde(default = "d_coboundary_tol")]
    pub coboundary_tol: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentsSection {
    pub r_list: Option<Vec<f64>>,
    pub target: Option<Target>,
    pub n_grid: Option<Vec<u64>>,
    pub replicates: Option<u64>,
    pub calibration: Option<bool>,
    pub bootstrap: Option<usize>,
    pub calibration_reps: Option<usize>,
    pub step_budget: Option<u64>,
    /// Sample sizes `M` for `calibrate`; `[replicates]` when absent.
    pub calibration_m: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Suite names; all when absent.
    #[serde(default)]
    pub suites: Option<Vec<String>>,
    #[serde(default = "d_covariance_cases")]
    pub covariance_cases: usize,
    #[serde(default = "d_hundred")]
    pub envelope_cases: usize,
    #[serde(default = "d_hundred")]
    pub an_bound_cases: usize,
    #[serde(default = "d_hundred")]
    pub coboundary_paths: usize,
    #[serde(default = "d_coboundary_n")]
    pub coboundary_n: usize,
    #[serde(default = "d_degree")]
    pub duality_degree: usize,
    /// State cap of the small Davydov chain used by the exact suites.
    #[serde(default = "d_small_cap")]
    pub davydov_cap: usize,
    /// Extra dense kernels checked by the kernel suite.
    #[serde(default)]
    pub kernels: Vec<KernelDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDecl {
    pub name: String,
    pub states: Vec<i64>,
    /// Row-major transition matrix.
    pub matrix: Vec<f64>,
}

fn d_duality_tol() -> f64 {
    1e-8
}
fn d_kernel_tol() -> f64 {
    KERNEL_TOL
}
fn d_smoothing_slack() -> f64 {
    SMOOTHING_SLACK
}
fn d_n_terms() -> usize {
    1024
}
fn d_outer_draws() -> usize {
    1000
}
fn d_gap_cap() -> usize {
    DEFAULT_GAP_CAP
}
fn d_condphi_s() -> f64 {
    f64::INFINITY
}
fn d_an_log2() -> u32 {
    16
}
fn d_covariance_slack() -> f64 {
    COVARIANCE_SLACK
}
fn d_envelope_slack() -> f64 {
    1e-9
}
fn d_an_slack() -> f64 {
    1e-12
}
fn d_coboundary_tol() -> f64 {
    1e-8
}
fn d_covariance_cases() -> usize {
    500
}
fn d_hundred() -> usize {
    100
}
fn d_coboundary_n() -> usize {
    1024
}
fn d_degree() -> usize {
    5
}
fn d_small_cap() -> usize {
    5
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { smoothing_slack: d_smoothing_slack() }
    }
}

impl Default for DependenceSection {
    fn default() -> Self {
        Self {
            conditions: None,
            n_terms: d_n_terms(),
            outer_draws: d_outer_draws(),
            gap_cap: d_gap_cap(),
            condphi_s: d_condphi_s(),
            an_bound_max_log2: d_an_log2(),
            covariance_slack: d_covariance_slack(),
            envelope_slack: d_envelope_slack(),
            an_bound_slack: d_an_slack(),
            coboundary_tol: d_coboundary_tol(),
        }
    }
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            suites: None,
            covariance_cases: d_covariance_cases(),
            envelope_cases: d_hundred(),
            an_bound_cases: d_hundred(),
            coboundary_paths: d_hundred(),
            coboundary_n: d_coboundary_n(),
            duality_degree: d_degree(),
            davydov_cap: d_small_cap(),
            kernels: Vec::new(),
        }
    }
}

fn positive(key: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{key} must be positive and finite, got {v}")))
    }
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if let Some(p) = &self.processes {
            positive("processes.duality_tol", p.duality_tol)?;
            positive("processes.kernel_tol", p.kernel_tol)?;
        }
        positive("metrics.smoothing_slack", self.metrics.smoothing_slack)?;
        let d = &self.dependence;
        positive("dependence.covariance_slack", d.covariance_slack)?;
        positive("dependence.envelope_slack", d.envelope_slack)?;
        positive("dependence.an_bound_slack", d.an_bound_slack)?;
        positive("dependence.coboundary_tol", d.coboundary_tol)?;
        if d.n_terms == 0 {
            return Err(CliError::Config("dependence.n_terms must be ≥ 1".into()));
        }
        if d.outer_draws < 20 {
            return Err(CliError::Config("dependence.outer_draws must be ≥ 20".into()));
        }
        Ok(())
    }

    pub fn process_spec(&self, seed: u64) -> CliResult<ProcessSpec> {
        let p = self
            .processes
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [processes] section (keys p_moment, model)".into()))?;
        let spec = ProcessSpec { family: p.model.clone(), seed, p_moment: p.p_moment };
        spec.validate().map_err(CliError::at_validation)?;
        Ok(spec)
    }

    /// Plan for `rates`; `r_list` and `target` are required.
    pub fn plan(&self, seed: u64) -> CliResult<ExperimentPlan> {
        let e = &self.experiments;
        let r_list = e.r_list.clone().ok_or_else(|| CliError::Config("missing key experiments.r_list".into()))?;
        let target = e.target.ok_or_else(|| CliError::Config("missing key experiments.target".into()))?;
        let plan = self.plan_with(seed, r_list, target)?;
        plan.validate().map_err(CliError::at_validation)?;
        Ok(plan)
    }

    /// Grid, `M` and budget for `simulate` (the `r_list` is irrelevant there).
    pub fn plan_with(&self, seed: u64, r_list: Vec<f64>, target: Target) -> CliResult<ExperimentPlan> {
        let e = &self.experiments;
        let mut plan = ExperimentPlan::new(self.process_spec(seed)?, r_list, target, seed);
        if let Some(v) = &e.n_grid {
            plan.n_grid = v.clone();
        }
        if let Some(v) = e.replicates {
            plan.replicates = v;
        }
        if let Some(v) = e.calibration {
            plan.calibration = v;
        }
        if let Some(v) = e.bootstrap {
            plan.bootstrap = v;
        }
        if let Some(v) = e.calibration_reps {
            plan.calibration_reps = v;
        }
        if let Some(v) = e.step_budget {
            plan.step_budget = v;
        }
        Ok(plan)
    }

    /// Requested condition ids, or `None` for "all available".
    pub fn conditions(&self) -> CliResult<Option<Vec<ConditionId>>> {
        let Some(list) = &self.dependence.conditions else { return Ok(None) };
        if list.is_empty() {
            return Err(CliError::Config("dependence.conditions is empty; list at least one condition id".into()));
        }
        let valid = || ConditionId::ALL.iter().map(|c| c.label()).collect::<Vec<_>>().join(", ");
        list.iter()
            .map(|s| {
                ConditionId::parse(s).ok_or_else(|| {
                    CliError::Config(format!("unknown condition id {s:?} in dependence.conditions; valid ids: {}", valid()))
                })
            })
            .collect::<CliResult<Vec<_>>>()
            .map(Some)
    }

    /// Tolerances in effect, per module, for the manifest.
    pub fn tolerances(&self) -> BTreeMap<String, BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        let mut proc = BTreeMap::new();
        if let Some(p) = &self.processes {
            proc.insert("duality_tol".into(), p.duality_tol);
            proc.insert("kernel_tol".into(), p.kernel_tol);
        }
        out.insert("processes".into(), proc);
        out.insert("metrics".into(), BTreeMap::from([("smoothing_slack".into(), self.metrics.smoothing_slack)]));
        let d = &self.dependence;
        out.insert(
            "dependence".into(),
            BTreeMap::from([
                ("covariance_slack".into(), d.covariance_slack),
                ("envelope_slack".into(), d.envelope_slack),
                ("an_bound_slack".into(), d.an_bound_slack),
                ("coboundary_tol".into(), d.coboundary_tol),
            ]),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAVYDOV: &str = r#"
[cli]
seed = 7

[processes]
p_moment = 2.5
[processes.model]
family = "davydov_chain"
a_rule = { kind = "schedule", p = 2.5, eps = 0.1 }
functional = { kind = "f1" }
state_cap = 64
"#;

    #[test]
    fn parses_sections() {
        let cfg = Config::parse(DAVYDOV).unwrap();
        assert_eq!(cfg.cli.seed, 7);
        assert_eq!(cfg.dependence.n_terms, 1024);
        let spec = cfg.process_spec(7).unwrap();
        assert_eq!(spec.family_name(), "davydov_chain");
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = Config::parse(&DAVYDOV.replace("state_cap", "statecap")).unwrap_err().to_string();
        assert!(e.contains("statecap"), "{e}");
        let e = Config::parse(&format!("{DAVYDOV}\n[metrics]\nslack = 1.0\n")).unwrap_err().to_string();
        assert!(e.contains("slack"), "{e}");
    }

    #[test]
    fn missing_seed() {
        let e = Config::parse(&DAVYDOV.replace("seed = 7", "")).unwrap_err().to_string();
        assert!(e.contains("seed"), "{e}");
    }

    #[test]
    fn condition_lists() {
        let cfg = Config::parse(&format!("{DAVYDOV}\n[dependence]\nconditions = [\"C1\", \"condalpha1-a\"]\n")).unwrap();
        assert_eq!(cfg.conditions().unwrap().unwrap(), vec![ConditionId::C1, ConditionId::Condalpha1A]);
        let cfg = Config::parse(&format!("{DAVYDOV}\n[dependence]\nconditions = [\"C9\"]\n")).unwrap();
        let e = cfg.conditions().unwrap_err().to_string();
        assert!(e.contains("C9") && e.contains("Cond2cob"), "{e}");
        let cfg = Config::parse(&format!("{DAVYDOV}\n[dependence]\nconditions = []\n")).unwrap();
        assert!(cfg.conditions().is_err());
    }
}
