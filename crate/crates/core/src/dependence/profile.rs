//! α₁(n) and φ_{k,Y}(n) on finite kernels.
//!
//! Both coefficients only see the chain through level sets of an observable,
//! so every computation iterates `K` on a handful of indicator vectors.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::processes::MarkovOperator;
use crate::rng::{stream, StreamRole};
use crate::{Error, Result};

/// Work (subsets × vector length) of one exact evaluation; covers every
/// chain with at most 22 states.
pub const EXACT_ENUMERATION_BUDGET: u64 = 1 << 26;
/// Random restarts of the alternating maximisation.
pub const ALPHA_RESTARTS: usize = 64;
/// Default cap `G` on the index gap `i₂ − i₁` in `φ₂`.
pub const DEFAULT_GAP_CAP: usize = 64;
/// Cap on `(#vectors)·|S|·n` kernel applications of one profile.
pub const PROFILE_BUDGET: f64 = 4e10;
/// State count below which `‖K^n − Π‖` is computed from full rows.
const DENSE_TV_STATES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientMethod {
    Exact,
    LowerHeuristic,
    UpperBound,
}

/// One coefficient value with its certified range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientValue {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: CoefficientMethod,
}

impl CoefficientValue {
    pub fn exact(value: f64) -> Self {
        Self { value, lower: value, upper: value, method: CoefficientMethod::Exact }
    }

    /// Value to use when only an upper estimate is admissible.
    pub fn conservative(&self) -> f64 {
        self.upper
    }
}

/// Partition of the states by the value of an observable.
#[derive(Debug, Clone)]
pub(crate) struct Levels {
    /// Distinct values, increasing.
    pub values: Vec<f64>,
    pub of_state: Vec<usize>,
    /// Stationary mass of each level.
    pub mass: Vec<f64>,
}

impl Levels {
    pub fn new(obs: &[f64], pi: &[f64]) -> Result<Self> {
        if obs.len() != pi.len() {
            return Err(Error::invalid(format!("observable has {} entries for {} states", obs.len(), pi.len())));
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite observable value"));
        }
        let mut values = obs.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let of_state: Vec<usize> = obs.iter().map(|v| values.partition_point(|w| w < v)).collect();
        let mut mass = vec![0.0; values.len()];
        for (&l, &p) in of_state.iter().zip(pi) {
            mass[l] += p;
        }
        Ok(Self { values, of_state, mass })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    fn indicator(&self, level: usize) -> Vec<f64> {
        self.of_state.iter().map(|&l| if l == level { 1.0 } else { 0.0 }).collect()
    }

    /// `1{y ≤ values[x]} − F(values[x])`, one vector per threshold below the max.
    fn centred_thresholds(&self) -> Vec<Vec<f64>> {
        let mut cdf = 0.0;
        (0..self.len().saturating_sub(1))
            .map(|x| {
                cdf += self.mass[x];
                self.of_state.iter().map(|&l| if l <= x { 1.0 - cdf } else { -cdf }).collect()
            })
            .collect()
    }
}

fn observable_or_labels<K: MarkovOperator + ?Sized>(op: &K, obs: Option<&[f64]>) -> Vec<f64> {
    match obs {
        Some(v) => v.to_vec(),
        None => op.state_labels().into_iter().map(|s| s as f64).collect(),
    }
}

fn positive_part_mass(pi: &[f64], g: &[f64]) -> f64 {
    pi.iter().zip(g).map(|(p, v)| p * v.max(0.0)).sum()
}

/// `α(σ(Y₀), σ(f(Y_n)))` given `h_ℓ = K^n 1{f = level ℓ}`.
fn alpha_from_levels(h: &[Vec<f64>], pi: &[f64], levels: &Levels, restarts_seed: u64) -> CoefficientValue {
    let l = levels.len();
    let s = pi.len();
    if l <= 1 {
        return CoefficientValue::exact(0.0);
    }
    let value = match exact_strategy(l, s) {
        Some(Enumeration::Levels) => Some(enumerate_level_subsets(h, pi, &levels.mass)),
        Some(Enumeration::States) => Some(enumerate_state_subsets(h, pi, &levels.mass)),
        None => None,
    };
    match value {
        Some(v) => CoefficientValue::exact(v.clamp(0.0, 0.25)),
        None => {
            let lower = alternating_lower_bound(h, pi, &levels.mass, restarts_seed).clamp(0.0, 0.25);
            let tv: f64 = (0..s)
                .map(|i| pi[i] * (0..l).map(|k| (h[k][i] - levels.mass[k]).abs()).sum::<f64>())
                .sum();
            let upper = (0.25 * tv).min(0.25).max(lower);
            CoefficientValue { value: lower, lower, upper, method: CoefficientMethod::LowerHeuristic }
        }
    }
}

enum Enumeration {
    Levels,
    States,
}

/// Cheapest exact enumeration within budget, if any.
fn exact_strategy(l: usize, s: usize) -> Option<Enumeration> {
    let cost_b = if l <= 40 { (1u64 << (l - 1)).saturating_mul(s as u64) } else { u64::MAX };
    let cost_a = if s <= 40 { (1u64 << (s - 1)).saturating_mul(l as u64) } else { u64::MAX };
    if cost_b <= EXACT_ENUMERATION_BUDGET && cost_b <= cost_a {
        Some(Enumeration::Levels)
    } else if cost_a <= EXACT_ENUMERATION_BUDGET {
        Some(Enumeration::States)
    } else {
        None
    }
}

/// Gray-code walk over subsets `B` of all levels but the last (complements
/// give the same value); `A = {K^n 1_B > π(B)}` is optimal for each `B`.
fn enumerate_level_subsets(h: &[Vec<f64>], pi: &[f64], mass: &[f64]) -> f64 {
    let bits = h.len() - 1;
    let mut g = vec![0.0; pi.len()];
    let mut inside = vec![false; bits];
    let mut best: f64 = 0.0;
    for step in 1u64..(1u64 << bits) {
        let k = step.trailing_zeros() as usize;
        let sign = if inside[k] { -1.0 } else { 1.0 };
        inside[k] = !inside[k];
        for (gi, hi) in g.iter_mut().zip(&h[k]) {
            *gi += sign * (hi - mass[k]);
        }
        best = best.max(positive_part_mass(pi, &g));
    }
    best
}

/// Gray-code walk over subsets `A` of the states; `B` is chosen levelwise.
fn enumerate_state_subsets(h: &[Vec<f64>], pi: &[f64], mass: &[f64]) -> f64 {
    let s = pi.len();
    let l = h.len();
    let bits = s - 1;
    let mut c = vec![0.0; l];
    let mut inside = vec![false; bits];
    let mut best: f64 = 0.0;
    for step in 1u64..(1u64 << bits) {
        let i = step.trailing_zeros() as usize;
        let sign = if inside[i] { -1.0 } else { 1.0 };
        inside[i] = !inside[i];
        for k in 0..l {
            c[k] += sign * pi[i] * (h[k][i] - mass[k]);
        }
        best = best.max(c.iter().map(|v| v.max(0.0)).sum());
    }
    best
}

fn alternating_lower_bound(h: &[Vec<f64>], pi: &[f64], mass: &[f64], seed: u64) -> f64 {
    let l = h.len();
    let s = pi.len();
    let value_of_b = |b: &[bool]| -> (f64, Vec<bool>) {
        let mut g = vec![0.0; s];
        for k in (0..l).filter(|&k| b[k]) {
            for (gi, hi) in g.iter_mut().zip(&h[k]) {
                *gi += hi - mass[k];
            }
        }
        (positive_part_mass(pi, &g), g.iter().map(|&v| v > 0.0).collect())
    };
    let best_b_for_a = |a: &[bool]| -> Vec<bool> {
        (0..l)
            .map(|k| (0..s).filter(|&i| a[i]).map(|i| pi[i] * (h[k][i] - mass[k])).sum::<f64>() > 0.0)
            .collect()
    };
    let mut rng = stream(seed, 0, (s * l) as u64, StreamRole::Restarts);
    let mut best: f64 = 0.0;
    let starts: Vec<Vec<bool>> = (0..l)
        .take(if l <= ALPHA_RESTARTS { l } else { 0 })
        .map(|k| (0..l).map(|j| j == k).collect())
        .chain((0..ALPHA_RESTARTS).map(|_| (0..l).map(|_| rng.random::<bool>()).collect()))
        .collect();
    for mut b in starts {
        let mut current = -1.0;
        for _ in 0..100 {
            let (v, a) = value_of_b(&b);
            if v <= current + 1e-15 {
                break;
            }
            current = v;
            b = best_b_for_a(&a);
        }
        best = best.max(current);
    }
    best
}

fn check_budget(vectors: usize, states: usize, steps: usize, what: &str) -> Result<()> {
    let cost = vectors as f64 * states as f64 * steps as f64;
    if cost > PROFILE_BUDGET {
        return Err(Error::Budget(format!(
            "{what}: {vectors} vectors × {states} states × {steps} steps exceeds {PROFILE_BUDGET:e}"
        )));
    }
    Ok(())
}

/// `α₁(1), …, α₁(n_max)` for `X = f(Y)`; `f = None` uses the state labels.
pub fn alpha1_profile<K: MarkovOperator + ?Sized>(
    op: &K,
    f: Option<&[f64]>,
    n_max: usize,
) -> Result<Vec<CoefficientValue>> {
    let pi = op.stationary_law();
    let obs = observable_or_labels(op, f);
    let levels = Levels::new(&obs, pi)?;
    check_budget(levels.len(), pi.len(), n_max, "alpha1 profile")?;
    if levels.len() > 1 && exact_strategy(levels.len(), pi.len()).is_none() {
        // each restart costs a few passes over all level vectors
        check_budget(levels.len() * 8 * (2 * ALPHA_RESTARTS), pi.len(), n_max, "alpha1 restarts")?;
    }
    let mut h: Vec<Vec<f64>> = (0..levels.len()).map(|k| levels.indicator(k)).collect();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        h = h.par_iter().map(|v| op.apply_right(v)).collect();
        out.push(alpha_from_levels(&h, pi, &levels, n as u64));
    }
    Ok(out)
}

/// `α₁(n) = α(F₀, σ(f(Y_n)))` on a finite kernel.
pub fn alpha1_exact<K: MarkovOperator + ?Sized>(op: &K, f: Option<&[f64]>, n: usize) -> Result<CoefficientValue> {
    if n == 0 {
        return Err(Error::invalid("alpha1 needs n ≥ 1"));
    }
    Ok(*alpha1_profile(op, f, n)?.last().expect("n ≥ 1"))
}

/// `φ_{1,Y}` and `φ_{2,Y}` for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiProfile {
    pub phi1: Vec<CoefficientValue>,
    pub phi2: Vec<CoefficientValue>,
    pub gap_cap: usize,
    /// `2 sup_{x,s} |K^{G+1} g_x(s)|`: bound on every gap beyond the cap.
    pub gap_tail_bound: f64,
}

fn sup_norm_on_support(v: &[f64], pi: &[f64]) -> f64 {
    v.iter().zip(pi).filter(|(_, p)| **p > 0.0).map(|(x, _)| x.abs()).fold(0.0, f64::max)
}

/// `max_s Σ_t |K^n(s,t) − π(t)|` for every `n ≤ n_max` from the full rows.
fn dense_operator_distance<K: MarkovOperator + ?Sized>(op: &K, n_max: usize) -> Vec<f64> {
    let s = op.num_states();
    let pi = op.stationary_law();
    let mut rows: Vec<Vec<f64>> = (0..s).map(|i| (0..s).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        rows = rows.par_iter().map(|r| op.apply_to_measure(r)).collect();
        let d = rows
            .iter()
            .zip(pi)
            .filter(|(_, p)| **p > 0.0)
            .map(|(r, _)| r.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        out.push(d);
    }
    out
}

/// `φ_{k,Y}(n)` for `k ∈ {1, 2}` and every `n ≤ n_max`, with `Y = y(state)`
/// (state labels by default).
///
/// On a finite chain `K^i w − π(w)` has nonincreasing sup-norm in `i`, so the
/// sup over `i ≥ n` sits at `i = n`; the gap sup runs over `1..=gap_cap` and
/// larger gaps are bounded by `2 φ₁(G+1)` (sharpened by `‖K^n − Π‖` on small
/// chains). Entries where that bound exceeds the computed value are tagged
/// lower-heuristic.
pub fn phi_profile<K: MarkovOperator + ?Sized>(
    op: &K,
    y: Option<&[f64]>,
    n_max: usize,
    gap_cap: usize,
) -> Result<PhiProfile> {
    if gap_cap == 0 {
        return Err(Error::invalid("gap cap must be ≥ 1"));
    }
    let pi = op.stationary_law();
    let obs = observable_or_labels(op, y);
    let levels = Levels::new(&obs, pi)?;
    let thresholds = levels.centred_thresholds();
    let t = thresholds.len();
    let s = pi.len();
    let horizon = n_max.max(gap_cap + 1);
    check_budget(t, s, horizon, "phi1 profile")?;
    check_budget(gap_cap * t * t, s, n_max, "phi2 profile")?;

    // K^m g_x for m = 0..=horizon; only m ≤ gap_cap are kept
    let mut kg = thresholds.clone();
    let mut kept = vec![thresholds.clone()];
    let mut delta = Vec::with_capacity(horizon);
    for m in 1..=horizon {
        kg = kg.par_iter().map(|v| op.apply_right(v)).collect();
        delta.push(kg.iter().map(|v| sup_norm_on_support(v, pi)).fold(0.0, f64::max));
        if m <= gap_cap {
            kept.push(kg.clone());
        }
    }
    let gap_tail = 2.0 * delta[gap_cap];

    // w = g_{x1} · K^m g_{x2}, centred, for all gaps and threshold pairs
    let mut w: Vec<Vec<f64>> = Vec::with_capacity(gap_cap * t * t);
    for m in 1..=gap_cap {
        for x1 in 0..t {
            for x2 in 0..t {
                let v: Vec<f64> = thresholds[x1].iter().zip(&kept[m][x2]).map(|(a, b)| a * b).collect();
                let mean: f64 = v.iter().zip(pi).map(|(a, p)| a * p).sum();
                w.push(v.into_iter().map(|a| a - mean).collect());
            }
        }
    }
    drop(kept);
    let op_dist = if s <= DENSE_TV_STATES { Some(dense_operator_distance(op, n_max)) } else { None };

    let mut phi1 = Vec::with_capacity(n_max);
    let mut phi2 = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        w = w.par_iter().map(|v| op.apply_right(v)).collect();
        let pair = w.iter().map(|v| sup_norm_on_support(v, pi)).fold(0.0, f64::max);
        let p1 = delta[n - 1].min(1.0);
        let value = p1.max(pair).min(1.0);
        let tail = match &op_dist {
            Some(d) => gap_tail.min(d[n - 1] * delta[gap_cap]),
            None => gap_tail,
        };
        phi1.push(CoefficientValue::exact(p1));
        phi2.push(if tail <= value {
            CoefficientValue::exact(value)
        } else {
            CoefficientValue {
                value,
                lower: value,
                upper: tail.min(1.0),
                method: CoefficientMethod::LowerHeuristic,
            }
        });
    }
    Ok(PhiProfile { phi1, phi2, gap_cap, gap_tail_bound: gap_tail })
}

/// `φ_{k,Y}(n)` for a single `n`.
pub fn phi_coeff<K: MarkovOperator + ?Sized>(
    op: &K,
    y: Option<&[f64]>,
    k: usize,
    n: usize,
    gap_cap: usize,
) -> Result<CoefficientValue> {
    if n == 0 {
        return Err(Error::invalid("phi needs n ≥ 1"));
    }
    let profile = phi_profile(op, y, n, gap_cap)?;
    match k {
        1 => Ok(profile.phi1[n - 1]),
        2 => Ok(profile.phi2[n - 1]),
        _ => Err(Error::invalid(format!("phi order k must be 1 or 2, got {k}"))),
    }
}

/// α₁, φ₁ and φ₂ over `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceProfile {
    pub n: Vec<usize>,
    pub alpha1: Vec<CoefficientValue>,
    pub phi1: Vec<CoefficientValue>,
    pub phi2: Vec<CoefficientValue>,
    pub gap_cap: usize,
    /// Slack of the monotonicity checks on exact entries.
    pub tolerance: f64,
}

impl DependenceProfile {
    /// `f` defines `X = f(Y)` for α₁, `y` the real-valued `Y` for φ.
    pub fn compute<K: MarkovOperator + ?Sized>(
        op: &K,
        f: Option<&[f64]>,
        y: Option<&[f64]>,
        n_max: usize,
        gap_cap: usize,
    ) -> Result<Self> {
        let alpha1 = alpha1_profile(op, f, n_max)?;
        let phi = phi_profile(op, y, n_max, gap_cap)?;
        Ok(Self {
            n: (1..=n_max).collect(),
            alpha1,
            phi1: phi.phi1,
            phi2: phi.phi2,
            gap_cap,
            tolerance: 1e-12,
        })
    }

    /// Range, ordering and monotonicity invariants.
    pub fn validate(&self) -> Result<()> {
        let tol = self.tolerance;
        for seq in [&self.alpha1, &self.phi1, &self.phi2] {
            for c in seq.iter() {
                if !(c.value >= -tol && c.value <= 1.0 + tol && c.lower <= c.upper + tol) {
                    return Err(Error::invariant("coefficients lie in [0, 1]", format!("{c:?}")));
                }
            }
            for w in seq.windows(2) {
                let exact = w[0].method == CoefficientMethod::Exact && w[1].method == CoefficientMethod::Exact;
                if exact && w[1].value > w[0].value + tol {
                    return Err(Error::invariant(
                        "exact coefficients nonincreasing",
                        format!("{} then {}", w[0].value, w[1].value),
                    ));
                }
            }
        }
        for (a, b) in self.phi1.iter().zip(&self.phi2) {
            if a.value > b.value + tol {
                return Err(Error::invariant("phi1 ≤ phi2", format!("{} > {}", a.value, b.value)));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,alpha1,alpha1_lower,alpha1_upper,alpha1_method,phi1,phi1_method,phi2,phi2_upper,phi2_method")?;
        for i in 0..self.n.len() {
            let (a, p1, p2) = (&self.alpha1[i], &self.phi1[i], &self.phi2[i]);
            writeln!(
                out,
                "{},{:e},{:e},{:e},{},{:e},{},{:e},{:e},{}",
                self.n[i],
                a.value,
                a.lower,
                a.upper,
                method_tag(a.method),
                p1.value,
                method_tag(p1.method),
                p2.value,
                p2.upper,
                method_tag(p2.method)
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

pub(crate) fn method_tag(m: CoefficientMethod) -> &'static str {
    match m {
        CoefficientMethod::Exact => "exact",
        CoefficientMethod::LowerHeuristic => "lower-heuristic",
        CoefficientMethod::UpperBound => "upper-bound",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::FiniteKernel;

    fn flip(q: f64) -> FiniteKernel {
        FiniteKernel::from_dense(vec![0, 1], &[1.0 - q, q, q, 1.0 - q]).unwrap()
    }

    #[test]
    fn two_state_alpha() {
        // α₁(n) = (1 − 2q)^n / 4, attained at A = B = {0}
        for q in [0.1, 0.3, 0.5, 0.8] {
            let k = flip(q);
            for (i, a) in alpha1_profile(&k, None, 4).unwrap().iter().enumerate() {
                let n = i as i32 + 1;
                let oracle = (1.0 - 2.0 * q).powi(n).abs() / 4.0;
                assert!((a.value - oracle).abs() < 1e-15, "q={q} n={n}: {} vs {oracle}", a.value);
                assert_eq!(a.method, CoefficientMethod::Exact);
            }
        }
    }

    #[test]
    fn independent_rows_vanish() {
        let k = FiniteKernel::from_dense(vec![0, 1, 2], &[0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5]).unwrap();
        assert!(alpha1_exact(&k, None, 3).unwrap().value.abs() < 1e-15);
        let p = phi_profile(&k, None, 3, 8).unwrap();
        assert!(p.phi1.iter().chain(&p.phi2).all(|c| c.value.abs() < 1e-15));
    }

    #[test]
    fn both_enumerations_agree() {
        let k = FiniteKernel::from_dense(
            vec![0, 1, 2, 3],
            &[0.1, 0.4, 0.3, 0.2, 0.5, 0.1, 0.1, 0.3, 0.2, 0.2, 0.5, 0.1, 0.3, 0.3, 0.3, 0.1],
        )
        .unwrap();
        let pi = k.stationary().to_vec();
        let levels = Levels::new(&[0.0, 1.0, 2.0, 3.0], &pi).unwrap();
        let h: Vec<Vec<f64>> = (0..4).map(|l| k.apply(&levels.indicator(l))).collect();
        let a = enumerate_level_subsets(&h, &pi, &levels.mass);
        let b = enumerate_state_subsets(&h, &pi, &levels.mass);
        assert!((a - b).abs() < 1e-15);
        let lower = alternating_lower_bound(&h, &pi, &levels.mass, 1);
        assert!(lower <= a + 1e-15);
    }

    #[test]
    fn phi2_dominates_phi1() {
        let k = FiniteKernel::from_dense(vec![0, 1, 2], &[0.6, 0.3, 0.1, 0.2, 0.5, 0.3, 0.3, 0.1, 0.6]).unwrap();
        let p = phi_profile(&k, None, 10, 16).unwrap();
        for (a, b) in p.phi1.iter().zip(&p.phi2) {
            assert!(a.value <= b.value + 1e-15);
        }
    }

    #[test]
    fn profile_csv_header() {
        let k = flip(0.3);
        let prof = DependenceProfile::compute(&k, None, None, 3, 4).unwrap();
        prof.validate().unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,alpha1,"));
        assert_eq!(text.lines().count(), 4);
    }
}
