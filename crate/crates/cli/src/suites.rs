//! Inequality suites behind `verify`. Cases are drawn from the synthetic
//! stream of the run seed, so a suite is reproducible from the config.

use rayon::prelude::*;
use serde::Serialize;

use cltlab_core::dependence::{
    an_bn, check_covariance_inequality, coboundary, envelope_contraction_check, series_an_bound, DeclaredFunctional,
    MonotonePiece, Verdict,
};
use cltlab_core::metrics::smoothing_suite;
use cltlab_core::processes::{
    duality_residual, invariant_density, ARule, CoeffRule, DavydovChain, FiniteKernel, InnovationLaw, LinearSpec,
    MapKind, ProcessFamily, TruncatedLinear,
};
use cltlab_core::rng::{open_unit, stream, Stream, StreamRole};

use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const SUITES: [(&str, &str); 7] = [
    ("kernel", "transition rows sum to 1 and πK = π for the Davydov kernel and declared kernels"),
    ("covariance", "covariance inequality for products of monotone functionals of the Davydov chain"),
    ("envelope", "‖E(X | Y₀)‖_{1,Φ,p} ≤ ‖X‖_{1,Φ,p} on the Davydov chain"),
    ("smoothing", "smoothing lemma |f * φ_t|_{Λ_p} ≤ c_{r,p} t^{r−p} |f|_{Λ_r}, 50 cases"),
    ("an_bound", "A_n ≤ 4 B_n for random coefficient rules; A_n bounded under the Heyde condition"),
    ("coboundary", "S_n − M_n − Z_1 + Z_{n+1} = 0 on geometric linear paths"),
    ("duality", "∫(Kh)f dμ = ∫h(f∘T) dμ for polynomial pairs on the doubling map"),
];

/// Failures recorded in full per suite; the rest are only counted.
const MAX_LISTED: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    /// Largest `lhs / rhs` (or residual / tolerance) over the cases.
    pub worst_ratio: f64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn from_cases(suite: &str, results: Vec<Result<f64, String>>) -> Self {
        let cases = results.len();
        let mut worst = 0.0f64;
        let mut failures = Vec::new();
        let mut failed = 0;
        for r in results {
            match r {
                Ok(ratio) => worst = worst.max(ratio),
                Err(msg) => {
                    failed += 1;
                    if failures.len() < MAX_LISTED {
                        failures.push(msg);
                    }
                }
            }
        }
        Self { suite: suite.into(), cases, passed: cases - failed, failed, worst_ratio: worst, failures }
    }
}

struct Draws(Stream);

impl Draws {
    fn new(seed: u64, suite: u64, case: u64) -> Self {
        Self(stream(seed, case, suite, StreamRole::Synthetic))
    }
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * open_unit(&mut self.0)
    }
    /// Integer in `lo..=hi`.
    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        (lo + (open_unit(&mut self.0) * (hi - lo + 1) as f64).floor() as i64).min(hi)
    }
}

fn small_chain(cfg: &Config, cap: usize) -> CliResult<DavydovChain> {
    let rule = match cfg.processes.as_ref().map(|p| &p.model) {
        Some(ProcessFamily::DavydovChain(d)) => d.a_rule.clone(),
        _ => ARule::Schedule { p: 2.5, eps: 0.1 },
    };
    DavydovChain::new(&rule, cap).map_err(CliError::at_validation)
}

fn kernel_suite(cfg: &Config) -> CliResult<SuiteReport> {
    let tol = cfg.processes.as_ref().map(|p| p.kernel_tol).unwrap_or(cltlab_core::processes::KERNEL_TOL);
    let mut results = Vec::new();
    let check = |name: &str, k: cltlab_core::Result<FiniteKernel>| -> Result<f64, String> {
        let k = k.map_err(|e| format!("kernel {name}: {e}"))?;
        let mut worst_row = 0.0f64;
        for i in 0..k.len() {
            let s: f64 = k.row(i).iter().map(|(_, p)| p).sum();
            worst_row = worst_row.max((s - 1.0).abs());
            if k.row(i).iter().any(|(_, p)| *p < 0.0) {
                return Err(format!("kernel {name}: invariant violated (nonnegative rows): row {i}"));
            }
        }
        if worst_row > tol {
            return Err(format!("kernel {name}: invariant violated (rows sum to 1): deviation {worst_row:e}"));
        }
        let res = k.stationary_residual();
        if res > tol {
            return Err(format!("kernel {name}: invariant violated (πK = π): residual {res:e}"));
        }
        Ok(worst_row.max(res) / tol)
    };
    let cap = cfg.cli.verify.davydov_cap;
    results.push(check("davydov", small_chain(cfg, cap)?.kernel()));
    if let Some(ProcessFamily::DavydovChain(d)) = cfg.processes.as_ref().map(|p| &p.model) {
        let chain = DavydovChain::new(&d.a_rule, d.state_cap).map_err(CliError::at_validation)?;
        results.push(check("davydov-config", chain.kernel()));
    }
    for decl in &cfg.cli.verify.kernels {
        results.push(check(&decl.name, FiniteKernel::from_dense(decl.states.clone(), &decl.matrix)));
    }
    Ok(SuiteReport::from_cases("kernel", results))
}

fn random_functional(d: &mut Draws, cap: i64) -> DeclaredFunctional {
    let pieces = d.int(1, 2) as usize;
    let weights: Vec<f64> = (0..pieces).map(|_| d.uniform(0.1, 1.0)).collect();
    let total: f64 = weights.iter().sum();
    DeclaredFunctional {
        pieces: weights
            .iter()
            .map(|w| {
                let start = d.int(-cap, cap);
                let len = d.int(1, (cap - start + 1).max(1)) as usize;
                let mut values: Vec<f64> = (0..len).map(|_| d.uniform(-1.0, 1.0)).collect();
                values.sort_by(f64::total_cmp);
                if d.uniform(0.0, 1.0) < 0.5 {
                    values.reverse();
                }
                MonotonePiece { weight: w / total * d.uniform(0.5, 1.0), start, values }
            })
            .collect(),
    }
}

fn covariance_suite(cfg: &Config, seed: u64) -> CliResult<SuiteReport> {
    let cap = cfg.cli.verify.davydov_cap;
    let kernel = small_chain(cfg, cap)?.kernel().map_err(CliError::at_validation)?;
    let slack = cfg.dependence.covariance_slack;
    let results = (0..cfg.cli.verify.covariance_cases as u64)
        .into_par_iter()
        .map(|case| {
            let mut d = Draws::new(seed, 1, case);
            let k = d.int(2, 3) as usize;
            let fs: Vec<DeclaredFunctional> = (0..k).map(|_| random_functional(&mut d, cap as i64)).collect();
            let mut times = vec![0usize];
            for _ in 1..k {
                let last = *times.last().unwrap();
                times.push(last + 1 + d.int(0, 4) as usize);
            }
            let c = check_covariance_inequality(&kernel, &fs, &times, None)
                .map_err(|e| format!("case {case}: {e}"))?;
            let min = c.rhs_forms.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
            if c.lhs <= min * (1.0 + slack) + c.roundoff {
                Ok(if min > 0.0 { c.lhs / min } else { 0.0 })
            } else {
                Err(format!(
                    "case {case}: invariant violated (covariance inequality): lhs {:e} > rhs {:e} at times {:?}",
                    c.lhs, min, c.times
                ))
            }
        })
        .collect();
    Ok(SuiteReport::from_cases("covariance", results))
}

fn envelope_suite(cfg: &Config, seed: u64) -> CliResult<SuiteReport> {
    let cap = cfg.cli.verify.davydov_cap.min(4);
    let kernel = small_chain(cfg, cap)?.kernel().map_err(CliError::at_validation)?;
    let s = kernel.len();
    let slack = cfg.dependence.envelope_slack;
    let results = (0..cfg.cli.verify.envelope_cases as u64)
        .into_par_iter()
        .map(|case| {
            let mut d = Draws::new(seed, 2, case);
            let table: Vec<f64> = (0..s * s).map(|_| d.uniform(-3.0, 3.0)).collect();
            let p = d.uniform(2.0, 3.0);
            let r = envelope_contraction_check(&kernel, |a, b| table[a * s + b], p)
                .map_err(|e| format!("case {case}: {e}"))?;
            if r.lhs <= r.rhs * (1.0 + slack) {
                Ok(if r.rhs > 0.0 { r.lhs / r.rhs } else { 0.0 })
            } else {
                Err(format!("case {case}: invariant violated (envelope contraction): {:e} > {:e}", r.lhs, r.rhs))
            }
        })
        .collect();
    Ok(SuiteReport::from_cases("envelope", results))
}

fn smoothing_suite_report(cfg: &Config) -> CliResult<SuiteReport> {
    let slack = cfg.metrics.smoothing_slack;
    let results = smoothing_suite()
        .into_par_iter()
        .map(|case| {
            let c = case.check().map_err(|e| format!("{case:?}: {e}"))?;
            if c.lhs <= c.rhs * (1.0 + slack) {
                Ok(if c.rhs > 0.0 { c.lhs / c.rhs } else { 0.0 })
            } else {
                Err(format!("{case:?}: invariant violated (smoothing lemma): {:e} > {:e}", c.lhs, c.rhs))
            }
        })
        .collect();
    Ok(SuiteReport::from_cases("smoothing", results))
}

fn an_bound_suite(cfg: &Config, seed: u64) -> CliResult<SuiteReport> {
    let slack = cfg.dependence.an_bound_slack;
    let mut results: Vec<Result<f64, String>> = (0..cfg.cli.verify.an_bound_cases as u64)
        .into_par_iter()
        .map(|case| {
            let mut d = Draws::new(seed, 3, case);
            let rule = match case % 3 {
                0 => CoeffRule::Finite {
                    offset: d.int(-6, 6),
                    coeffs: (0..d.int(1, 12)).map(|_| d.uniform(-2.0, 2.0)).collect(),
                },
                1 => CoeffRule::Geometric { rho: d.uniform(-0.95, 0.95), scale: d.uniform(0.1, 2.0) },
                _ => CoeffRule::Polynomial { decay: d.uniform(1.2, 3.0), scale: 1.0, two_sided: d.uniform(0.0, 1.0) < 0.5 },
            };
            let n = d.int(1, 200) as usize;
            let r = an_bn(&rule, n).map_err(|e| format!("case {case}: {e}"))?;
            let bound = 4.0 * r.b_n;
            // the certified upper end, so truncated tails cannot hide a violation
            let a = r.a_upper();
            if a <= bound * (1.0 + slack) + slack {
                Ok(if bound > 0.0 { a / bound } else { 0.0 })
            } else {
                Err(format!("case {case} ({rule:?}, n = {n}): invariant violated (A_n ≤ 4B_n): {a:e} > {bound:e}"))
            }
        })
        .collect();
    // Heyde-type rules: A_{2^j} must settle by 2^{max_log2}
    let max_log2 = cfg.dependence.an_bound_max_log2;
    for rule in [
        CoeffRule::Geometric { rho: 0.5, scale: 1.0 },
        CoeffRule::Geometric { rho: -0.7, scale: 1.0 },
        CoeffRule::Polynomial { decay: 2.5, scale: 1.0, two_sided: true },
    ] {
        results.push(match series_an_bound(&rule, 3.0, max_log2) {
            Ok((rep, _)) if rep.verdict == Verdict::Converged => Ok(0.0),
            Ok((rep, _)) => Err(format!(
                "{rule:?}: invariant violated (A_n bounded under the Heyde condition): verdict {:?} ({})",
                rep.verdict, rep.diagnostics.reason
            )),
            Err(e) => Err(format!("{rule:?}: {e}")),
        });
    }
    Ok(SuiteReport::from_cases("an_bound", results))
}

fn coboundary_suite(cfg: &Config, seed: u64) -> CliResult<SuiteReport> {
    let tol = cfg.dependence.coboundary_tol;
    let n = cfg.cli.verify.coboundary_n;
    let spec = match cfg.processes.as_ref().map(|p| &p.model) {
        Some(ProcessFamily::LinearProcess(l)) if matches!(l.coefficients, CoeffRule::Geometric { .. }) => l.clone(),
        _ => LinearSpec {
            coefficients: CoeffRule::Geometric { rho: 0.6, scale: 1.0 },
            innovation: InnovationLaw::Gaussian,
            tail_tol: 1e-12,
        },
    };
    let p = cfg.processes.as_ref().map(|p| p.p_moment).unwrap_or(3.0);
    let dec = coboundary(&spec, p).map_err(CliError::at_validation)?;
    let lin = TruncatedLinear::new(&spec, p).map_err(CliError::at_validation)?;
    let (first, last) = dec.innovation_range(n);
    let results = (0..cfg.cli.verify.coboundary_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = stream(seed, path, n as u64, StreamRole::Innovations);
            let eps: Vec<f64> = (first..=last).map(|_| spec.innovation.sample(&mut rng)).collect();
            // X_k = Σ_j a_j ε_{k−j}, independently of the path builder
            let x: Vec<f64> = (1..=n as i64)
                .map(|k| (lin.lo()..=lin.hi()).map(|j| lin.coefficient(j) * eps[(k - j - first) as usize]).sum())
                .collect();
            let worst = dec.residuals(&x, &eps, first).into_iter().fold(0.0, f64::max);
            if worst <= tol {
                Ok(worst / tol)
            } else {
                Err(format!("path {path}: invariant violated (coboundary identity): residual {worst:e}"))
            }
        })
        .collect();
    Ok(SuiteReport::from_cases("coboundary", results))
}

fn duality_suite(cfg: &Config) -> CliResult<SuiteReport> {
    let tol = cfg.processes.as_ref().map(|p| p.duality_tol).unwrap_or(1e-8);
    let deg = cfg.cli.verify.duality_degree as i32;
    let kind = MapKind::Beta { beta: 2.0 };
    let density = invariant_density(&kind).map_err(CliError::from)?;
    let pairs: Vec<(i32, i32)> = (0..=deg).flat_map(|i| (0..=deg).map(move |j| (i, j))).collect();
    let results = pairs
        .into_par_iter()
        .map(|(i, j)| {
            let h = move |x: f64| x.powi(i) - 0.5;
            let f = move |x: f64| x.powi(j) + 0.25 * x;
            let r = duality_residual(&kind, &density, &h, &f).map_err(|e| format!("(x^{i}, x^{j}): {e}"))?;
            if r < tol {
                Ok(r / tol)
            } else {
                Err(format!("(x^{i}, x^{j}): invariant violated (transfer-operator duality): residual {r:e}"))
            }
        })
        .collect();
    Ok(SuiteReport::from_cases("duality", results))
}

pub fn selected(cfg: &Config) -> CliResult<Vec<&'static str>> {
    let names: Vec<&'static str> = SUITES.iter().map(|s| s.0).collect();
    match &cfg.cli.verify.suites {
        None => Ok(names),
        Some(list) if list.is_empty() => Err(CliError::Config("cli.verify.suites is empty".into())),
        Some(list) => list
            .iter()
            .map(|s| {
                names.iter().copied().find(|n| n == s).ok_or_else(|| {
                    CliError::Config(format!("unknown suite {s:?} in cli.verify.suites; valid: {}", names.join(", ")))
                })
            })
            .collect(),
    }
}

pub fn run_suite(name: &str, cfg: &Config, seed: u64) -> CliResult<SuiteReport> {
    match name {
        "kernel" => kernel_suite(cfg),
        "covariance" => covariance_suite(cfg, seed),
        "envelope" => envelope_suite(cfg, seed),
        "smoothing" => smoothing_suite_report(cfg),
        "an_bound" => an_bound_suite(cfg, seed),
        "coboundary" => coboundary_suite(cfg, seed),
        "duality" => duality_suite(cfg),
        other => Err(CliError::Config(format!("unknown suite {other:?}"))),
    }
}
