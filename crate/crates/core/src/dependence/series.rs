//! Projective and mixing conditions as series of nonnegative terms, with a
//! three-valued convergence verdict from dyadic block sums.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear_bounds::{an_bn_tails, AnBn, CoefficientTails};
use super::moments::ConditionalMoments;
use super::profile::{alpha1_profile, method_tag, CoefficientMethod, CoefficientValue};
use crate::metrics::{weight_primitive, TailQuantile, TailQuantileFn};
use crate::numerics::{normal, quad, QuadConfig};
use crate::processes::{CoeffRule, InnovationLaw, MarkovOperator, Prepared, PreparedProcess, TruncatedLinear};
use crate::rng::{stream, StreamRole};
use crate::{Error, Result};

/// A block ratio at or below this value counts as geometric decay.
pub const CONVERGED_RATIO: f64 = 0.9;
/// A last block ratio at or above this value counts as non-summable: block
/// sums of `k^{-s}` have ratio `2^{1−s}`, so this flags `s ≲ 1.03`.
pub const DIVERGING_RATIO: f64 = 0.98;
/// Allowed increase between the last two block ratios of a converged series.
pub const RATIO_DRIFT: f64 = 0.05;
/// Relative Monte Carlo error of the last block above which no verdict is given.
pub const MC_RELATIVE_ERROR: f64 = 0.1;
/// Iterations allowed for `Σ_k K^k f` to settle.
pub const POISSON_ITERATIONS: usize = 1 << 20;
/// Work cap (coefficients × terms, or draws × window) of linear-process series.
pub const LINEAR_SERIES_BUDGET: f64 = 4e9;
/// Absolute accuracy of kernel-power coefficients: smaller α₁ values are
/// rounding residue of an exactly mixed chain and count as 0.
pub const COEFFICIENT_RESOLUTION: f64 = 1e-12;
/// Vectors per parallel chunk of the moment recursion.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    C1,
    C2,
    Cond1cob,
    Cond2cob,
    Condcobp3adap,
    Cond2cobp3,
    #[serde(rename = "condalpha1-a")]
    Condalpha1A,
    #[serde(rename = "condalpha1-b")]
    Condalpha1B,
    #[serde(rename = "condphi")]
    Condphi,
    #[serde(rename = "heyde")]
    Heyde,
    #[serde(rename = "An_bound")]
    AnBound,
}

impl ConditionId {
    pub const ALL: [ConditionId; 11] = [
        ConditionId::C1,
        ConditionId::C2,
        ConditionId::Cond1cob,
        ConditionId::Cond2cob,
        ConditionId::Condcobp3adap,
        ConditionId::Cond2cobp3,
        ConditionId::Condalpha1A,
        ConditionId::Condalpha1B,
        ConditionId::Condphi,
        ConditionId::Heyde,
        ConditionId::AnBound,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ConditionId::C1 => "C1",
            ConditionId::C2 => "C2",
            ConditionId::Cond1cob => "Cond1cob",
            ConditionId::Cond2cob => "Cond2cob",
            ConditionId::Condcobp3adap => "Condcobp3adap",
            ConditionId::Cond2cobp3 => "Cond2cobp3",
            ConditionId::Condalpha1A => "condalpha1-a",
            ConditionId::Condalpha1B => "condalpha1-b",
            ConditionId::Condphi => "condphi",
            ConditionId::Heyde => "heyde",
            ConditionId::AnBound => "An_bound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictDiagnostics {
    /// Sums over complete dyadic blocks `[2^j, 2^{j+1})` of the indices.
    pub block_sums: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Least-squares slope of `log term` against `log index` on the last block.
    pub local_slope: Option<f64>,
    pub reason: String,
}

/// Decides a series from its last complete dyadic blocks `B_j`:
///
/// - every term of the last two blocks zero → converged;
/// - any infinite term → diverging;
/// - fewer than three complete blocks → inconclusive;
/// - Monte Carlo error above 10% of the last block → inconclusive;
/// - last two ratios `B_{j+1}/B_j ≤ 0.9`, the last not above the previous by
///   more than 0.05 → converged;
/// - last ratio `≥ 0.98` → diverging;
/// - otherwise inconclusive.
pub fn verdict(indices: &[u64], terms: &[f64], stderr: Option<&[f64]>) -> (Verdict, VerdictDiagnostics) {
    let mut diag = VerdictDiagnostics { block_sums: Vec::new(), ratios: Vec::new(), local_slope: None, reason: String::new() };
    if terms.iter().any(|t| t.is_infinite()) {
        diag.reason = "infinite term".into();
        return (Verdict::Diverging, diag);
    }
    let Some(&last) = indices.last() else {
        diag.reason = "no terms".into();
        return (Verdict::Inconclusive, diag);
    };
    let blocks = (64 - (last + 1).leading_zeros() - 1) as usize; // complete: 2^{j+1} − 1 ≤ last
    let mut sums = vec![0.0; blocks];
    let mut vars = vec![0.0; blocks];
    for (i, (&k, &t)) in indices.iter().zip(terms).enumerate() {
        let j = (63 - k.max(1).leading_zeros()) as usize;
        if j < blocks {
            sums[j] += t;
            if let Some(se) = stderr {
                vars[j] += se[i] * se[i];
            }
        }
    }
    diag.ratios = sums.windows(2).map(|w| w[1] / w[0]).collect();
    diag.block_sums = sums.clone();
    if blocks >= 1 {
        let lo = 1u64 << (blocks - 1);
        let pts: Vec<(f64, f64)> = indices
            .iter()
            .zip(terms)
            .filter(|(k, t)| **k >= lo && **k < 2 * lo && **t > 0.0)
            .map(|(k, t)| ((*k as f64).ln(), t.ln()))
            .collect();
        if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            if sxx > 0.0 {
                diag.local_slope = Some(sxy / sxx);
            }
        }
    }
    if blocks >= 2 && sums[blocks - 1] == 0.0 && sums[blocks - 2] == 0.0 {
        diag.reason = "terms vanish identically".into();
        return (Verdict::Converged, diag);
    }
    if blocks < 3 {
        diag.reason = format!("{blocks} complete dyadic blocks; need 3");
        return (Verdict::Inconclusive, diag);
    }
    let last_sum = sums[blocks - 1];
    if stderr.is_some() && vars[blocks - 1].sqrt() > MC_RELATIVE_ERROR * last_sum {
        diag.reason = format!(
            "Monte Carlo error {:.3e} exceeds {MC_RELATIVE_ERROR} of the last block sum {last_sum:.3e}",
            vars[blocks - 1].sqrt()
        );
        return (Verdict::Inconclusive, diag);
    }
    let r = &diag.ratios;
    let (prev, cur) = (r[r.len() - 2], r[r.len() - 1]);
    let out = if cur <= CONVERGED_RATIO && prev <= CONVERGED_RATIO && cur <= prev + RATIO_DRIFT {
        diag.reason = format!("block ratios {prev:.4}, {cur:.4} ≤ {CONVERGED_RATIO}");
        Verdict::Converged
    } else if cur >= DIVERGING_RATIO {
        diag.reason = format!("last block ratio {cur:.4} ≥ {DIVERGING_RATIO}");
        Verdict::Diverging
    } else {
        diag.reason = format!("block ratios {prev:.4}, {cur:.4} undecided");
        Verdict::Inconclusive
    };
    (out, diag)
}

/// Terms, partial sums and verdict of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub id: ConditionId,
    pub p: f64,
    pub indices: Vec<u64>,
    pub terms: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
    pub diagnostics: VerdictDiagnostics,
    /// How the terms were obtained (`exact`, `closed-form`, `upper-bound`,
    /// `monte-carlo`, `lower-heuristic`).
    pub method: String,
    /// Numerical tolerance of each term.
    pub tolerance: f64,
}

impl ConditionReport {
    pub fn new(
        id: ConditionId,
        p: f64,
        indices: Vec<u64>,
        terms: Vec<f64>,
        stderr: Option<Vec<f64>>,
        method: &str,
        tolerance: f64,
    ) -> Self {
        let mut acc = 0.0;
        let partial_sums = terms
            .iter()
            .map(|t| {
                acc += t.max(0.0);
                acc
            })
            .collect();
        let (v, diagnostics) = verdict(&indices, &terms, stderr.as_deref());
        Self { id, p, indices, terms, stderr, partial_sums, verdict: v, diagnostics, method: method.into(), tolerance }
    }

    fn consecutive(id: ConditionId, p: f64, terms: Vec<f64>, stderr: Option<Vec<f64>>, method: &str, tol: f64) -> Self {
        let indices = (1..=terms.len() as u64).collect();
        Self::new(id, p, indices, terms, stderr, method, tol)
    }

    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }

    /// Terms are nonnegative and partial sums nondecreasing.
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.terms.iter().find(|t| t.is_nan() || **t < 0.0) {
            return Err(Error::invariant("series terms are nonnegative", format!("{} term {t}", self.id.label())));
        }
        if self.partial_sums.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invariant("partial sums nondecreasing", self.id.label().to_string()));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "condition,index,term,stderr,partial_sum,method,tolerance")?;
        for i in 0..self.terms.len() {
            let se = self.stderr.as_ref().map(|s| format!("{:e}", s[i])).unwrap_or_default();
            writeln!(
                out,
                "{},{},{:e},{},{:e},{},{:e}",
                self.id.label(),
                self.indices[i],
                self.terms[i],
                se,
                self.partial_sums[i],
                self.method,
                self.tolerance
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Sizes of the Monte Carlo parts of linear-process series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    /// Independent pasts `(ε_m)_{m ≤ 0}`; the future enters in closed form.
    pub outer_draws: usize,
    pub seed: u64,
    /// Gap cap of `φ₂`.
    pub gap_cap: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { outer_draws: 1000, seed: 0, gap_cap: super::profile::DEFAULT_GAP_CAP }
    }
}

fn lq_norm(values: &[f64], weights: &[f64], q: f64) -> f64 {
    values.iter().zip(weights).map(|(v, w)| w * v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
}

fn centred_observable(pi: &[f64], f: &[f64]) -> Vec<f64> {
    let mean: f64 = pi.iter().zip(f).map(|(p, v)| p * v).sum();
    f.iter().map(|v| v - mean).collect()
}

fn chain_parts(process: &PreparedProcess) -> Option<(&crate::processes::DavydovChain, &[f64])> {
    match &process.process {
        Prepared::DavydovChain { chain, f, .. } => Some((chain, f.as_slice())),
        _ => None,
    }
}

fn unsupported(process: &PreparedProcess) -> Error {
    Error::invalid(format!(
        "conditional moments given F₀ are available for chains, linear processes and iid baselines, not {}",
        process.spec.family_name()
    ))
}

/// The four second-moment conditions of a finite chain in one pass:
/// `[C1, C2, Cond2cob, Cond2cobp3]`.
fn chain_second_moment_terms<K: MarkovOperator + ?Sized>(
    op: &K,
    f: &[f64],
    sigma2: f64,
    p: f64,
    n_terms: usize,
) -> Result<[Vec<f64>; 4]> {
    let pi = op.stationary_law();
    let fc = centred_observable(pi, f);
    let mut rec = ConditionalMoments::new(op, &fc)?;
    let mut out: [Vec<f64>; 4] = Default::default();
    while rec.n() < n_terms {
        let mut chunk = Vec::with_capacity(CHUNK);
        while chunk.len() < CHUNK && rec.n() < n_terms {
            rec.advance()?;
            chunk.push((rec.n(), rec.second().to_vec()));
        }
        let rows: Vec<Result<[f64; 4]>> = chunk
            .par_iter()
            .map(|(n, v)| {
                let nf = *n as f64;
                let d: Vec<f64> = v.iter().map(|x| x / nf - sigma2).collect();
                let env = TailQuantile::from_atoms(&d, pi)?.envelope_norm_exact(p)?;
                let sn2: f64 = v.iter().zip(pi).map(|(x, w)| x * w).sum::<f64>() / nf;
                let e: Vec<f64> = v.iter().map(|x| x / nf - sn2).collect();
                Ok([
                    nf.powf(-(2.0 - p / 2.0)) * env,
                    nf.powf(-2.0 / p) * lq_norm(&d, pi, p / 2.0),
                    nf.powf(-2.0 + p / 2.0) * lq_norm(&e, pi, p / 2.0),
                    nf.powf(-0.5) * lq_norm(&e, pi, 1.5),
                ])
            })
            .collect();
        for r in rows {
            let r = r?;
            for (o, v) in out.iter_mut().zip(r) {
                o.push(v);
            }
        }
    }
    Ok(out)
}

/// `‖K^n f_c‖_p` and `n^{-1}‖Σ_{k≥n} K^k f_c‖_3` for `n = 1..=n_terms`.
fn chain_projective_terms<K: MarkovOperator + ?Sized>(
    op: &K,
    f: &[f64],
    p: f64,
    n_terms: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pi = op.stationary_law();
    let fc = centred_observable(pi, f);
    let scale = fc.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut cond1 = Vec::with_capacity(n_terms);
    let mut g = fc.clone();
    let mut acc = fc.clone();
    let mut settled = scale == 0.0;
    for k in 1..=POISSON_ITERATIONS.max(n_terms) {
        g = op.apply_right(&g);
        if k <= n_terms {
            cond1.push(lq_norm(&g, pi, p));
        }
        if !settled {
            for (a, x) in acc.iter_mut().zip(&g) {
                *a += x;
            }
            if g.iter().all(|x| x.abs() <= 1e-16 * scale) {
                settled = true;
            }
        }
        if settled && k >= n_terms {
            break;
        }
    }
    if !settled {
        return Err(Error::NonConvergence(format!(
            "Σ_k K^k f did not settle within {POISSON_ITERATIONS} iterations"
        )));
    }
    let mut adap = Vec::with_capacity(n_terms);
    let mut h = acc;
    for n in 1..=n_terms {
        h = op.apply_right(&h);
        adap.push(lq_norm(&h, pi, 3.0) / n as f64);
    }
    Ok((cond1, adap))
}

/// Law of `a(Z² − 1) + δ` through its tail `G(x) = P(|·| > x)`.
struct ChiSquareAffine {
    a: f64,
    delta: f64,
}

impl ChiSquareAffine {
    fn tail(&self, x: f64) -> f64 {
        let (a, d) = (self.a, self.delta);
        let above = 1.0 + (x - d) / a;
        let below = 1.0 - (x + d) / a;
        let up = if above <= 0.0 { 1.0 } else { 2.0 * normal::sf(above.sqrt()) };
        let down = if below <= 0.0 { 0.0 } else { 1.0 - 2.0 * normal::sf(below.sqrt()) };
        (up + down).min(1.0)
    }

    fn breaks(&self) -> Vec<f64> {
        vec![self.a - self.delta, self.delta - self.a, self.delta.abs()]
    }

    /// `∫₀^∞ W(G(x)) dx` with `W` the primitive of the envelope weight.
    fn envelope_norm(&self, p: f64) -> (f64, bool) {
        if self.a == 0.0 {
            return (self.delta.abs() * weight_primitive(1.0, p), true);
        }
        let r = quad::integrate_with_breaks(
            |x| weight_primitive(self.tail(x), p),
            0.0,
            f64::INFINITY,
            &self.breaks(),
            QuadConfig::with_abs_tol(1e-12),
        );
        (r.value, r.converged)
    }

    /// `(∫₀^∞ q x^{q−1} G(x) dx)^{1/q}`.
    fn lq_norm(&self, q: f64) -> (f64, bool) {
        if self.a == 0.0 {
            return (self.delta.abs(), true);
        }
        let r = quad::integrate_with_breaks(
            |x| if x == 0.0 { 0.0 } else { q * x.powf(q - 1.0) * self.tail(x) },
            0.0,
            f64::INFINITY,
            &self.breaks(),
            QuadConfig::with_abs_tol(1e-13),
        );
        (r.value.max(0.0).powf(1.0 / q), r.converged)
    }
}

/// `Σ_{i≥1} (T(i) − T(n+i))²` of truncated coefficients: `Var(P_n)/Var ε`
/// where `P_n` collects the innovations of `S_n` with index `≤ 0`.
fn past_weights(tails: &CoefficientTails, hi: i64, n: usize) -> Vec<f64> {
    (1..=hi.max(0)).map(|i| tails.t(i) - tails.t(n as i64 + i)).collect()
}

/// C1, C2, Cond2cob, Cond2cobp3 for a linear process. With iid innovations
/// `E(S_n²|F₀) − E S_n² = P_n² − E P_n²`.
fn linear_second_moment_reports(
    lin: &TruncatedLinear,
    p: f64,
    n_terms: usize,
    cfg: &SeriesConfig,
) -> Result<Vec<ConditionReport>> {
    let tails = CoefficientTails::from_coefficients(lin.lo(), lin.coefficients().to_vec());
    let hi = lin.hi();
    let law = lin.innovation();
    let var = law.variance();
    let sigma2 = lin.sigma2();
    let work = hi.max(1) as f64 * n_terms as f64;
    if work > LINEAR_SERIES_BUDGET {
        return Err(Error::Budget(format!("{work:e} coefficient evaluations for the conditional-variance series")));
    }
    let ids = [ConditionId::C1, ConditionId::C2, ConditionId::Cond2cob, ConditionId::Cond2cobp3];
    let weight = |n: f64| [n.powf(-(2.0 - p / 2.0)), n.powf(-2.0 / p), n.powf(-2.0 + p / 2.0), n.powf(-0.5)];
    if matches!(law, InnovationLaw::Gaussian) {
        let rows: Vec<([f64; 4], bool)> = (1..=n_terms)
            .into_par_iter()
            .map(|n| {
                let nf = n as f64;
                let s2 = var * past_weights(&tails, hi, n).iter().map(|c| c * c).sum::<f64>();
                let shift = lin.sigma_n2(n) - sigma2;
                let full = ChiSquareAffine { a: s2 / nf, delta: shift };
                let pure = ChiSquareAffine { a: s2 / nf, delta: 0.0 };
                let (env, c1) = full.envelope_norm(p);
                let (l2, c2) = full.lq_norm(p / 2.0);
                let (m2, c3) = pure.lq_norm(p / 2.0);
                let (m3, c4) = pure.lq_norm(1.5);
                let w = weight(nf);
                ([w[0] * env, w[1] * l2, w[2] * m2, w[3] * m3], c1 && c2 && c3 && c4)
            })
            .collect();
        if rows.iter().any(|r| !r.1) {
            log::warn!("a Gaussian conditional-variance quadrature did not reach its tolerance");
        }
        return Ok(ids
            .iter()
            .enumerate()
            .map(|(c, &id)| {
                let terms = rows.iter().map(|r| r.0[c]).collect();
                ConditionReport::consecutive(id, p, terms, None, "closed-form", 1e-12)
            })
            .collect());
    }

    // Monte Carlo over pasts; each draw reuses one past for every n.
    let draws = cfg.outer_draws.max(20);
    if draws as f64 * hi.max(1) as f64 > 2e7 {
        return Err(Error::Budget(format!("{draws} pasts of {hi} innovations exceed the memory cap")));
    }
    let pasts: Vec<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(cfg.seed, r as u64, hi as u64, StreamRole::OuterPast);
            // entry i − 1 holds ε_{1−i}
            (0..hi.max(0)).map(|_| law.sample(&mut rng)).collect()
        })
        .collect();
    let groups = 10usize;
    let per = draws / groups;
    let rows: Vec<[(f64, f64); 4]> = (1..=n_terms)
        .into_par_iter()
        .map(|n| {
            let nf = n as f64;
            let c = past_weights(&tails, hi, n);
            let s2 = var * c.iter().map(|x| x * x).sum::<f64>();
            let shift = lin.sigma_n2(n) - sigma2;
            let pn: Vec<f64> = pasts.iter().map(|e| c.iter().zip(e).map(|(a, b)| a * b).sum()).collect();
            let w = weight(nf);
            let stat = |sample: &[f64]| -> [f64; 4] {
                let d: Vec<f64> = sample.iter().map(|x| (x * x - s2) / nf + shift).collect();
                let e: Vec<f64> = sample.iter().map(|x| (x * x - s2) / nf).collect();
                let uw = vec![1.0 / sample.len() as f64; sample.len()];
                let env = TailQuantile::from_atoms(&d, &uw).and_then(|q| q.envelope_norm_exact(p)).unwrap_or(f64::NAN);
                [w[0] * env, w[1] * lq_norm(&d, &uw, p / 2.0), w[2] * lq_norm(&e, &uw, p / 2.0), w[3] * lq_norm(&e, &uw, 1.5)]
            };
            let all = stat(&pn);
            let parts: Vec<[f64; 4]> = (0..groups).map(|g| stat(&pn[g * per..(g + 1) * per])).collect();
            let mut out = [(0.0, 0.0); 4];
            for c in 0..4 {
                let m = parts.iter().map(|x| x[c]).sum::<f64>() / groups as f64;
                let v = parts.iter().map(|x| (x[c] - m).powi(2)).sum::<f64>() / (groups - 1) as f64;
                out[c] = (all[c], (v / groups as f64).sqrt());
            }
            out
        })
        .collect();
    Ok(ids
        .iter()
        .enumerate()
        .map(|(c, &id)| {
            let terms = rows.iter().map(|r| r[c].0).collect();
            let se = rows.iter().map(|r| r[c].1).collect();
            ConditionReport::consecutive(id, p, terms, Some(se), "monte-carlo", 0.0)
        })
        .collect())
}

/// `‖Σ_j b_j ε_j‖_p / (Σ b_j²)^{1/2}`: exact for Gaussian innovations, the
/// Burkholder–Minkowski bound `(p − 1)‖ε‖_p` otherwise.
fn linear_norm_factor(law: InnovationLaw, p: f64) -> (f64, &'static str) {
    match law {
        InnovationLaw::Gaussian => (law.variance().sqrt() * normal::abs_moment(p).powf(1.0 / p), "closed-form"),
        _ => ((p - 1.0) * law.abs_moment(p).powf(1.0 / p), "upper-bound"),
    }
}

fn suffix_squares(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    for i in (0..values.len()).rev() {
        out[i] = out[i + 1] + values[i] * values[i];
    }
    out
}

/// Cond1cob and Condcobp3adap of a linear process from coefficient tails.
fn linear_projective_reports(lin: &TruncatedLinear, p: f64, n_terms: usize) -> [ConditionReport; 2] {
    let (lo, hi) = (lin.lo(), lin.hi());
    let tails = CoefficientTails::from_coefficients(lo, lin.coefficients().to_vec());
    let tol = lin.tail_sq_bound().sqrt();
    // a_j² tails: right[n] = Σ_{j≥n} a_j², left[n] = Σ_{j<−n} a_j²
    let right = |n: i64| -> f64 { (n.max(lo)..=hi).map(|j| lin.coefficient(j).powi(2)).sum() };
    let right_sq: Vec<f64> = {
        let vals: Vec<f64> = (1..=hi.max(0)).map(|j| lin.coefficient(j)).collect();
        suffix_squares(&vals)
    };
    let left_sq: Vec<f64> = {
        let vals: Vec<f64> = (1..=(-lo).max(0)).map(|j| lin.coefficient(-j)).collect();
        suffix_squares(&vals)
    };
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let (fp, method_p) = linear_norm_factor(lin.innovation(), p);
    let cond1: Vec<f64> = (1..=n_terms)
        .map(|n| {
            let r = if (n as i64) <= hi { at(&right_sq, n - 1) } else { 0.0 };
            let l = at(&left_sq, n); // Σ_{j < −n}: entries j ≥ n+1
            fp * (r.sqrt() + l.sqrt())
        })
        .collect();
    debug_assert!(n_terms == 0 || (right(1) - at(&right_sq, 0)).abs() <= 1e-9 * (1.0 + right(1)));
    let (f3, method_3) = linear_norm_factor(lin.innovation(), 3.0);
    let t_vals: Vec<f64> = (1..=hi.max(0)).map(|i| tails.t(i)).collect();
    let u_vals: Vec<f64> = (1..=(-lo).max(0)).map(|i| tails.u(i)).collect();
    let t_sq = suffix_squares(&t_vals);
    let u_sq = suffix_squares(&u_vals);
    let adap: Vec<f64> = (1..=n_terms)
        .map(|n| (f3 / n as f64) * (at(&t_sq, n - 1).sqrt() + at(&u_sq, n).sqrt()))
        .collect();
    [
        ConditionReport::consecutive(ConditionId::Cond1cob, p, cond1, None, method_p, tol),
        ConditionReport::consecutive(ConditionId::Condcobp3adap, 3.0, adap, None, method_3, tol),
    ]
}

/// `C1` and `C2`: `n^{−(2−p/2)}‖E(S_n²/n|F₀) − σ²‖_{1,Φ,p}` and
/// `n^{−2/p}‖E(S_n²/n|F₀) − σ²‖_{p/2}`.
pub fn series_c1_c2(
    process: &PreparedProcess,
    n_terms: usize,
    cfg: &SeriesConfig,
) -> Result<(ConditionReport, ConditionReport)> {
    let mut all = second_moment_reports(process, n_terms, cfg)?;
    let c2 = all.remove(1);
    let c1 = all.remove(0);
    Ok((c1, c2))
}

/// `[C1, C2, Cond2cob, Cond2cobp3]`.
fn second_moment_reports(process: &PreparedProcess, n_terms: usize, cfg: &SeriesConfig) -> Result<Vec<ConditionReport>> {
    let p = process.spec.p_moment;
    let ids = [ConditionId::C1, ConditionId::C2, ConditionId::Cond2cob, ConditionId::Cond2cobp3];
    if let Some((chain, f)) = chain_parts(process) {
        let sigma2 = process.long_run_variance().sigma2;
        let terms = chain_second_moment_terms(chain, f, sigma2, p, n_terms)?;
        return Ok(ids
            .iter()
            .zip(terms)
            .map(|(&id, t)| ConditionReport::consecutive(id, p, t, None, "exact", 1e-12))
            .collect());
    }
    match &process.process {
        Prepared::LinearProcess(lin) => linear_second_moment_reports(lin, p, n_terms, cfg),
        Prepared::IidBaseline(_) => Ok(ids
            .iter()
            .map(|&id| ConditionReport::consecutive(id, p, vec![0.0; n_terms], None, "exact", 0.0))
            .collect()),
        _ => Err(unsupported(process)),
    }
}

/// One of Cond1cob, Cond2cob, Condcobp3adap, Cond2cobp3 (and C1/C2).
pub fn series_projective(
    process: &PreparedProcess,
    which: ConditionId,
    n_terms: usize,
    cfg: &SeriesConfig,
) -> Result<ConditionReport> {
    match which {
        ConditionId::C1 | ConditionId::C2 | ConditionId::Cond2cob | ConditionId::Cond2cobp3 => {
            let pos = [ConditionId::C1, ConditionId::C2, ConditionId::Cond2cob, ConditionId::Cond2cobp3]
                .iter()
                .position(|c| *c == which)
                .expect("listed");
            Ok(second_moment_reports(process, n_terms, cfg)?.swap_remove(pos))
        }
        ConditionId::Cond1cob | ConditionId::Condcobp3adap => {
            let [c1, c3] = projective_reports(process, n_terms)?;
            Ok(if which == ConditionId::Cond1cob { c1 } else { c3 })
        }
        other => Err(Error::invalid(format!("{} is not a projective condition", other.label()))),
    }
}

fn projective_reports(process: &PreparedProcess, n_terms: usize) -> Result<[ConditionReport; 2]> {
    let p = process.spec.p_moment;
    if let Some((chain, f)) = chain_parts(process) {
        let (c1, c3) = chain_projective_terms(chain, f, p, n_terms)?;
        return Ok([
            ConditionReport::consecutive(ConditionId::Cond1cob, p, c1, None, "exact", 1e-12),
            ConditionReport::consecutive(ConditionId::Condcobp3adap, 3.0, c3, None, "exact", 1e-12),
        ]);
    }
    match &process.process {
        Prepared::LinearProcess(lin) => Ok(linear_projective_reports(lin, p, n_terms)),
        Prepared::IidBaseline(_) => Ok([
            ConditionReport::consecutive(ConditionId::Cond1cob, p, vec![0.0; n_terms], None, "exact", 0.0),
            ConditionReport::consecutive(ConditionId::Condcobp3adap, 3.0, vec![0.0; n_terms], None, "exact", 0.0),
        ]),
        _ => Err(unsupported(process)),
    }
}

/// Both α-mixing series for `α₁(k) = alpha[k−1]`:
/// `k^{−(2−p/2)} ∫₀^{α₁(k)} (1 ∨ log(1/u))^{(p−2)/2} Q²(u) du` and
/// `k^{−2/p} (∫₀^{α₁(k)} Q^p(u) du)^{2/p}`.
pub fn series_condalpha1(
    q: &dyn TailQuantileFn,
    alpha: &[f64],
    p: f64,
) -> Result<(ConditionReport, ConditionReport)> {
    if let Some(a) = alpha.iter().find(|a| !(**a >= 0.0 && **a <= 1.0)) {
        return Err(Error::invalid(format!("alpha values must lie in [0, 1], got {a}")));
    }
    let fa = |u: f64| {
        let l = (1.0f64 / u).ln().max(1.0);
        let qu = q.eval(u);
        l.powf(0.5 * (p - 2.0)) * qu * qu
    };
    let fb = |u: f64| q.eval(u).powf(p);
    let mut breaks = q.breakpoints();
    breaks.push((-1.0f64).exp());
    let cfg = QuadConfig::with_abs_tol(1e-13);
    // cumulative integrals over the sorted distinct alpha values
    let mut levels: Vec<f64> = alpha.iter().copied().filter(|a| *a > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut ia = Vec::with_capacity(levels.len());
    let mut ib = Vec::with_capacity(levels.len());
    let (mut acc_a, mut acc_b, mut prev) = (0.0, 0.0, 0.0);
    let (mut ok_a, mut ok_b) = (true, true);
    for &a in &levels {
        let ra = quad::integrate_with_breaks(fa, prev, a, &breaks, cfg);
        let rb = quad::integrate_with_breaks(fb, prev, a, &breaks, cfg);
        ok_a &= ra.converged && ra.value.is_finite();
        ok_b &= rb.converged && rb.value.is_finite();
        acc_a += ra.value;
        acc_b += rb.value;
        ia.push(if ok_a { acc_a } else { f64::INFINITY });
        ib.push(if ok_b { acc_b } else { f64::INFINITY });
        prev = a;
    }
    let lookup = |v: &[f64], a: f64| {
        if a == 0.0 {
            0.0
        } else {
            v[levels.partition_point(|x| *x < a)]
        }
    };
    let mut ta = Vec::with_capacity(alpha.len());
    let mut tb = Vec::with_capacity(alpha.len());
    for (i, &a) in alpha.iter().enumerate() {
        let k = (i + 1) as f64;
        ta.push(k.powf(-(2.0 - p / 2.0)) * lookup(&ia, a));
        let b = lookup(&ib, a);
        tb.push(if b.is_infinite() { f64::INFINITY } else { k.powf(-2.0 / p) * b.max(0.0).powf(2.0 / p) });
    }
    Ok((
        ConditionReport::consecutive(ConditionId::Condalpha1A, p, ta, None, "quadrature", 1e-12),
        ConditionReport::consecutive(ConditionId::Condalpha1B, p, tb, None, "quadrature", 1e-12),
    ))
}

/// Both α-mixing series for a chain: `α₁` from [`alpha1_profile`] (upper
/// values where not exact, zero below [`COEFFICIENT_RESOLUTION`]) and `Q` of
/// `|X₀| = |f(Y₀) − π(f)|`.
pub fn condalpha1_for_chain(
    process: &PreparedProcess,
    n_terms: usize,
) -> Result<(ConditionReport, ConditionReport, Vec<CoefficientValue>)> {
    let (chain, f) = chain_parts(process).ok_or_else(|| unsupported(process))?;
    let p = process.spec.p_moment;
    let pi = chain.stationary_law();
    let x = centred_observable(pi, f);
    let profile = alpha1_profile(chain, Some(&x), n_terms)?;
    let alpha: Vec<f64> = profile
        .iter()
        .map(|c| {
            let a = c.conservative();
            if a <= COEFFICIENT_RESOLUTION { 0.0 } else { a }
        })
        .collect();
    let q = TailQuantile::from_atoms(&x, pi)?;
    let (mut a, mut b) = series_condalpha1(&q, &alpha, p)?;
    let exact = profile.iter().all(|c| c.method == CoefficientMethod::Exact);
    let tag = if exact { "exact-alpha" } else { method_tag(CoefficientMethod::UpperBound) };
    a.method = tag.into();
    b.method = tag.into();
    Ok((a, b, profile))
}

/// `Σ_i i^{(p−4)/2 + (s−2)/(s−1)} φ₂(i)^{(s−2)/s}`; `s = ∞` gives
/// `Σ_i i^{(p−2)/2} φ₂(i)`.
pub fn series_condphi(phi2: &[f64], p: f64, s: f64) -> Result<ConditionReport> {
    if !(s >= p) {
        return Err(Error::invalid(format!("need s ≥ p, got s = {s}, p = {p}")));
    }
    if let Some(x) = phi2.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
        return Err(Error::invalid(format!("phi values must lie in [0, 1], got {x}")));
    }
    let (e, power) = if s.is_infinite() {
        ((p - 2.0) / 2.0, 1.0)
    } else {
        ((p - 4.0) / 2.0 + (s - 2.0) / (s - 1.0), (s - 2.0) / s)
    };
    let terms = phi2
        .iter()
        .enumerate()
        .map(|(i, &x)| if x == 0.0 { 0.0 } else { ((i + 1) as f64).powf(e) * x.powf(power) })
        .collect();
    Ok(ConditionReport::consecutive(ConditionId::Condphi, p, terms, None, "exact", 1e-12))
}

/// Heyde's condition: terms `T(n)² + U(n)²`.
pub fn series_heyde(rule: &CoeffRule, p: f64, n_terms: usize) -> Result<ConditionReport> {
    let tails = CoefficientTails::from_rule(rule)?;
    let terms = (1..=n_terms as i64)
        .map(|n| {
            let (t, u) = (tails.t(n), tails.u(n));
            t * t + u * u
        })
        .collect();
    Ok(ConditionReport::consecutive(ConditionId::Heyde, p, terms, None, "closed-form", 1e-14))
}

/// `A_n` on the dyadic grid `n = 1, 2, 4, …, 2^max_log2`, reported as the
/// series of increments `|A_{2^j} − A_{2^{j−1}}|` (bounded `A_n` iff the
/// increments are summable along the grid).
pub fn series_an_bound(rule: &CoeffRule, p: f64, max_log2: u32) -> Result<(ConditionReport, Vec<AnBn>)> {
    let tails = CoefficientTails::from_rule(rule)?;
    let values: Vec<AnBn> = (0..=max_log2)
        .into_par_iter()
        .map(|j| an_bn_tails(&tails, 1usize << j))
        .collect::<Result<_>>()?;
    let mut prev = 0.0;
    let terms: Vec<f64> = values
        .iter()
        .map(|v| {
            let d = (v.a_n - prev).abs();
            prev = v.a_n;
            d
        })
        .collect();
    let certified = values.iter().all(|v| v.certified);
    let tol = values.iter().map(|v| v.a_tail_bound).fold(0.0, f64::max);
    let indices = values.iter().map(|v| v.n as u64).collect();
    let method = if certified { "closed-form" } else { "uncertified-tail" };
    Ok((ConditionReport::new(ConditionId::AnBound, p, indices, terms, None, method, tol), values))
}

/// Every condition that applies to the family of `process`.
pub fn evaluate_conditions(process: &PreparedProcess, n_terms: usize, cfg: &SeriesConfig) -> Result<Vec<ConditionReport>> {
    let p = process.spec.p_moment;
    let mut out = Vec::new();
    match &process.process {
        Prepared::DavydovChain { .. } => {
            out.extend(second_moment_reports(process, n_terms, cfg)?);
            out.extend(projective_reports(process, n_terms)?);
            let (a, b, _) = condalpha1_for_chain(process, n_terms)?;
            out.push(a);
            out.push(b);
        }
        Prepared::LinearProcess(_) => {
            out.extend(second_moment_reports(process, n_terms, cfg)?);
            out.extend(projective_reports(process, n_terms)?);
            if let crate::processes::ProcessFamily::LinearProcess(spec) = &process.spec.family {
                if spec.coefficients.full_sum().is_some() {
                    out.push(series_heyde(&spec.coefficients, p, n_terms)?);
                    let log2 = (usize::BITS - n_terms.max(1).leading_zeros()).saturating_sub(1);
                    out.push(series_an_bound(&spec.coefficients, p, log2)?.0);
                }
            }
        }
        Prepared::IidBaseline(_) => {
            out.extend(second_moment_reports(process, n_terms, cfg)?);
            out.extend(projective_reports(process, n_terms)?);
        }
        _ => return Err(unsupported(process)),
    }
    Ok(out)
}
