//! Distance curves of `n^{-1/2} S_n` against Gaussian targets.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_log_power, fit_power, upper_bound_consistency, Consistency, ConsistencyVerdict, LogPowerFit, PowerFit, MIN_POINTS};
use super::plan::{theoretical_exponent, ExperimentPlan, Target, TheoreticalExponent};
use crate::metrics::{
    kolmogorov, kolmogorov_from_prokhorov, prokhorov_bound, wasserstein_vs_gaussian, EmpiricalDistribution, GaussianLaw,
    Law,
};
use crate::numerics::mean_and_stderr;
use crate::processes::{partial_sums_batch, LongRunVariance, PreparedProcess, TrajectoryBatch};
use crate::rng::{stream, StreamRole};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Points at or below this multiple of the calibration floor stay out of fits.
pub const FLOOR_MULTIPLE: f64 = 3.0;
/// Variance inflation of the miscalibrated comparison Gaussian.
pub const MISCALIBRATION: f64 = 1.25;

/// Mean `W_r` between an `M`-sample of `N(0,1)` and `N(0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFloor {
    pub replicates: u64,
    pub r: f64,
    pub reps: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl CalibrationFloor {
    fn zero(replicates: u64, r: f64) -> Self {
        Self { replicates, r, reps: 0, mean: 0.0, stderr: 0.0 }
    }

    /// Floor against `N(0, σ²)`: `W_r` scales like `σ` (like `σ^r` when `r < 1`).
    pub fn scaled(&self, sigma: f64) -> (f64, f64) {
        let c = if self.r >= 1.0 { sigma } else { sigma.powf(self.r) };
        (c * self.mean, c * self.stderr)
    }
}

pub fn calibration_floor(replicates: u64, r: f64, reps: usize, seed: u64) -> Result<CalibrationFloor> {
    if replicates < 100 {
        return Err(Error::invalid(format!("calibration needs M ≥ 100, got {replicates}")));
    }
    if reps < 2 {
        return Err(Error::invalid("calibration needs at least 2 repetitions"));
    }
    let g = GaussianLaw::standard();
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64, replicates, StreamRole::Calibration);
            let x: Vec<f64> = (0..replicates).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
            let e = EmpiricalDistribution::new(x)?;
            Ok(wasserstein_vs_gaussian(&e, &g, r)?.value)
        })
        .collect::<Result<_>>()?;
    let (mean, stderr) = mean_and_stderr(&values);
    Ok(CalibrationFloor { replicates, r, reps, mean, stderr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub r: f64,
    /// Standard deviation of the target Gaussian.
    pub sigma: f64,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Bootstrap standard error over replicates.
    pub mc_stderr: f64,
    pub floor: f64,
    pub floor_stderr: f64,
    /// `value > 3 × floor`.
    pub usable: bool,
    /// `sup_x |F_n(x) − Φ_σ(x)|` of the same sample.
    pub kolmogorov: f64,
    /// `W_r` against `N(0, 1.25 σ²)`.
    pub miscalibrated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateVerdict {
    UpperBoundConsistent,
    NotConsistent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub r: f64,
    pub theory: TheoreticalExponent,
    /// Fit over usable points only.
    pub fit: Option<PowerFit>,
    /// Fit over every point, floor included; informational.
    pub raw_fit: Option<PowerFit>,
    /// With a `log log n` regressor, when the theory has a log factor.
    pub log_fit: Option<LogPowerFit>,
    /// Lower weighted residual with the log regressor; `None` when too few
    /// usable points to compare.
    pub log_factor_supported: Option<bool>,
    pub consistency: Consistency,
    /// `|slope − w_exp| ≤ 2 se`; informational only.
    pub rate_matches: Option<bool>,
    pub verdict: RateVerdict,
    /// Smaller distance against the correct variance than against the
    /// miscalibrated one at every `n`.
    pub miscalibration_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitResult {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub variance: LongRunVariance,
    pub floors: Vec<CalibrationFloor>,
    pub points: Vec<CurvePoint>,
    pub curves: Vec<CurveFit>,
}

impl RateFitResult {
    pub fn curve(&self, r: f64) -> Option<&CurveFit> {
        self.curves.iter().find(|c| c.r == r)
    }

    pub fn points_for(&self, r: f64) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(move |p| p.r == r)
    }
}

fn target_sigma(process: &PreparedProcess, target: Target, n: u64) -> f64 {
    match target {
        Target::Sigma2 => process.long_run_variance().sigma2.max(0.0).sqrt(),
        Target::SigmaN2 => process.sigma_n2(n as usize).max(0.0).sqrt(),
    }
}

fn bootstrap_stderr(sample: &[f64], g: &GaussianLaw, r: f64, resamples: usize, seed: u64, n: u64) -> Result<f64> {
    let m = sample.len();
    let values: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b as u64, n, StreamRole::Bootstrap);
            let x: Vec<f64> = (0..m).map(|_| sample[rng.random_range(0..m)]).collect();
            Ok(wasserstein_vs_gaussian(&EmpiricalDistribution::new(x)?, g, r)?.value)
        })
        .collect::<Result<_>>()?;
    let mean = values.iter().sum::<f64>() / resamples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

fn measure_point(
    sample: &[f64],
    n: u64,
    r: f64,
    sigma: f64,
    floor: &CalibrationFloor,
    plan: &ExperimentPlan,
) -> Result<CurvePoint> {
    let e = EmpiricalDistribution::new(sample.to_vec())?;
    let g = GaussianLaw::new(sigma)?;
    let w = wasserstein_vs_gaussian(&e, &g, r)?;
    let se = bootstrap_stderr(sample, &g, r, plan.bootstrap, plan.seed, n)?;
    let off = GaussianLaw::new(sigma * MISCALIBRATION.sqrt())?;
    let miscalibrated = wasserstein_vs_gaussian(&e, &off, r)?.value;
    let kol = kolmogorov(&Law::Empirical(e), &g);
    let (fl, fl_se) = floor.scaled(sigma);
    Ok(CurvePoint {
        n,
        r,
        sigma,
        value: w.value,
        lower: w.lower,
        upper: w.upper,
        mc_stderr: se,
        floor: fl,
        floor_stderr: fl_se,
        usable: w.value > FLOOR_MULTIPLE * fl,
        kolmogorov: kol,
        miscalibrated,
    })
}

fn fit_curve(r: f64, p: f64, pts: &[&CurvePoint]) -> Result<CurveFit> {
    let theory = theoretical_exponent(r, p)?;
    let positive: Vec<&&CurvePoint> = pts.iter().filter(|q| q.value > 0.0 && q.mc_stderr.is_finite()).collect();
    let usable: Vec<&&CurvePoint> = positive.iter().copied().filter(|q| q.usable).collect();
    let cols = |v: &[&&CurvePoint]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            v.iter().map(|q| q.n as f64).collect(),
            v.iter().map(|q| q.value).collect(),
            v.iter().map(|q| q.mc_stderr.max(1e-300)).collect(),
        )
    };
    let raw_fit = if positive.len() >= 2 {
        let (n, v, s) = cols(&positive);
        fit_power(&n, &v, &s).ok()
    } else {
        None
    };
    let (fit, log_fit) = if usable.len() >= MIN_POINTS {
        let (n, v, s) = cols(&usable);
        let lf = if theory.log_factor && usable.len() > MIN_POINTS { fit_log_power(&n, &v, &s).ok() } else { None };
        (fit_power(&n, &v, &s).ok(), lf)
    } else {
        (None, None)
    };
    let log_factor_supported = match (&fit, &log_fit) {
        (Some(f), Some(l)) => Some(l.weighted_rss < f.weighted_rss),
        _ => None,
    };
    let curve: Vec<(f64, f64)> = usable.iter().map(|q| (q.n as f64, q.value)).collect();
    let consistency = upper_bound_consistency(&curve, theory.w_exp, theory.log_factor);
    let verdict = match consistency.verdict {
        ConsistencyVerdict::Pass => RateVerdict::UpperBoundConsistent,
        ConsistencyVerdict::Fail => RateVerdict::NotConsistent,
        ConsistencyVerdict::Inconclusive => RateVerdict::Inconclusive,
    };
    let rate_matches = fit.as_ref().map(|f| (f.slope - theory.w_exp).abs() <= 2.0 * f.slope_se);
    let miscalibration_ok = pts.iter().all(|q| q.value <= q.miscalibrated);
    Ok(CurveFit { r, theory, fit, raw_fit, log_fit, log_factor_supported, consistency, rate_matches, verdict, miscalibration_ok })
}

/// Simulates the plan, measures every `(n, r)` and fits each curve.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<RateFitResult> {
    plan.validate()?;
    let process = PreparedProcess::new(&plan.process)?;
    let batch = partial_sums_batch(&process, &plan.n_grid, plan.replicates, plan.seed, plan.step_budget)?;
    run_on_batch(plan, &process, &batch)
}

/// As [`run_experiment`] on an existing batch (for instance a cached one).
pub fn run_on_batch(plan: &ExperimentPlan, process: &PreparedProcess, batch: &TrajectoryBatch) -> Result<RateFitResult> {
    plan.validate()?;
    if batch.n_grid != plan.n_grid || batch.replicates != plan.replicates || batch.seed != plan.seed {
        return Err(Error::invalid("trajectory batch does not match the plan's grid, M or seed"));
    }
    let floors: Vec<CalibrationFloor> = plan
        .r_list
        .iter()
        .map(|&r| {
            if plan.calibration {
                calibration_floor(plan.replicates, r, plan.calibration_reps, plan.seed)
            } else {
                Ok(CalibrationFloor::zero(plan.replicates, r))
            }
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> =
        (0..plan.n_grid.len()).flat_map(|i| (0..plan.r_list.len()).map(move |j| (j, i))).collect();
    let points: Vec<CurvePoint> = tasks
        .par_iter()
        .map(|&(j, i)| {
            let n = plan.n_grid[i];
            let sigma = target_sigma(process, plan.target, n);
            measure_point(&batch.values[i], n, plan.r_list[j], sigma, &floors[j], plan)
        })
        .collect::<Result<_>>()?;
    let mut ordered = points;
    ordered.sort_by(|a, b| a.r.total_cmp(&b.r).then(a.n.cmp(&b.n)));
    let curves = plan
        .r_list
        .iter()
        .map(|&r| {
            let pts: Vec<&CurvePoint> = ordered.iter().filter(|q| q.r == r).collect();
            fit_curve(r, plan.p, &pts)
        })
        .collect::<Result<_>>()?;
    Ok(RateFitResult {
        schema_version: SCHEMA_VERSION,
        plan: plan.clone(),
        variance: process.long_run_variance(),
        floors,
        points: ordered,
        curves,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeRow {
    pub n: u64,
    pub w: f64,
    /// `Π ≤ W_r^{1/(r+1)}`.
    pub prokhorov: f64,
    /// `(1 + σ⁻¹(2π)^{−1/2}) Π`.
    pub kolmogorov_bound: f64,
    /// Same bound with `W + 2 se` in place of `W`.
    pub kolmogorov_bound_upper: f64,
    pub measured_kolmogorov: f64,
    /// Measured value below the bound within bootstrap error.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenCascade {
    pub r: f64,
    pub p: f64,
    pub rows: Vec<CascadeRow>,
    /// `−(p−2)/(2(p−1))`, or `−1/4` (times `√log n`) at `p = 3`.
    pub cascade_exponent: f64,
    pub cascade_sqrt_log: bool,
    /// `−(p−2)/(2(p+1))`.
    pub heyde_brown_exponent: f64,
}

/// Kolmogorov bounds through the Prokhorov distance from the `r = p − 2` curve.
pub fn berry_esseen_cascade(result: &RateFitResult) -> Result<BerryEsseenCascade> {
    let p = result.plan.p;
    let r = p - 2.0;
    let pts: Vec<&CurvePoint> = result.points.iter().filter(|q| (q.r - r).abs() < 1e-12).collect();
    if pts.is_empty() {
        return Err(Error::invalid(format!("no curve with r = p − 2 = {r}")));
    }
    let rows = pts
        .iter()
        .map(|q| {
            let pi = prokhorov_bound(q.value, q.r)?;
            let bound = kolmogorov_from_prokhorov(pi, q.sigma)?;
            let upper = kolmogorov_from_prokhorov(prokhorov_bound(q.value + 2.0 * q.mc_stderr, q.r)?, q.sigma)?;
            Ok(CascadeRow {
                n: q.n,
                w: q.value,
                prokhorov: pi,
                kolmogorov_bound: bound,
                kolmogorov_bound_upper: upper,
                measured_kolmogorov: q.kolmogorov,
                holds: q.kolmogorov <= upper,
            })
        })
        .collect::<Result<_>>()?;
    let (cascade_exponent, cascade_sqrt_log) = if p < 3.0 { (-(p - 2.0) / (2.0 * (p - 1.0)), false) } else { (-0.25, true) };
    Ok(BerryEsseenCascade {
        r,
        p,
        rows,
        cascade_exponent,
        cascade_sqrt_log,
        heyde_brown_exponent: -(p - 2.0) / (2.0 * (p + 1.0)),
    })
}
