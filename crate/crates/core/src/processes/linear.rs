//! Linear processes `X_k = Σ_j a_j ε_{k−j}` with iid innovations, truncated
//! to a finite coefficient window, and functions `h(X_k) − E h(X_0)` of them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::innovation::InnovationLaw;
use super::spec::{CoeffRule, FunctionOfLinearSpec, HRule, LinearSpec};
use crate::numerics::{mean_and_stderr, normal, special::hurwitz_zeta, QuadConfig};
use crate::rng::{stream, StreamRole};
use crate::{Error, Result};

/// Largest admissible truncation index.
pub const MAX_TRUNCATION: i64 = 10_000_000;

/// Coefficients `a_lo, …, a_hi` of a truncated linear process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedLinear {
    lo: i64,
    coeffs: Vec<f64>,
    /// Bound on `Σ` of discarded `a_j²`.
    tail_sq_bound: f64,
    /// `Σ_j a_j` of the untruncated rule, when it converges.
    full_sum: Option<f64>,
    innovation: InnovationLaw,
}

impl CoeffRule {
    /// `Σ_j a_j` over all of `ℤ`, if convergent.
    pub fn full_sum(&self) -> Option<f64> {
        match *self {
            CoeffRule::Finite { ref coeffs, .. } => Some(coeffs.iter().sum()),
            CoeffRule::Geometric { rho, scale } => Some(scale / (1.0 - rho)),
            CoeffRule::Polynomial { decay, scale, two_sided } => {
                if decay <= 1.0 {
                    return None;
                }
                let one = hurwitz_zeta(decay, 1.0);
                Some(scale * if two_sided { 2.0 * one - 1.0 } else { one })
            }
        }
    }

    /// `a_j` for any `j`.
    pub fn coefficient(&self, j: i64) -> f64 {
        match *self {
            CoeffRule::Finite { offset, ref coeffs } => {
                let i = j - offset;
                if i >= 0 && (i as usize) < coeffs.len() {
                    coeffs[i as usize]
                } else {
                    0.0
                }
            }
            CoeffRule::Geometric { rho, scale } => {
                if j >= 0 {
                    scale * rho.powi(j as i32)
                } else {
                    0.0
                }
            }
            CoeffRule::Polynomial { decay, scale, two_sided } => {
                if j >= 0 || two_sided {
                    scale * (1.0 + j.unsigned_abs() as f64).powf(-decay)
                } else {
                    0.0
                }
            }
        }
    }

    /// Smallest window `[lo, hi]` whose discarded `ℓ²` mass is at most `tol`,
    /// with the certified bound on that mass.
    pub fn truncation(&self, tol: f64) -> Result<(i64, i64, f64)> {
        match *self {
            CoeffRule::Finite { offset, ref coeffs } => Ok((offset, offset + coeffs.len() as i64 - 1, 0.0)),
            CoeffRule::Geometric { rho, scale } => {
                // Σ_{j>T} = scale² ρ^{2(T+1)} / (1 − ρ²)
                let bound = |t: i64| scale * scale * rho.abs().powf(2.0 * (t + 1) as f64) / (1.0 - rho * rho);
                let mut t = 0i64;
                while bound(t) > tol {
                    t += 1;
                    if t > MAX_TRUNCATION {
                        return Err(Error::Budget("geometric truncation index too large".into()));
                    }
                }
                Ok((0, t, bound(t)))
            }
            CoeffRule::Polynomial { decay, scale, two_sided } => {
                // Σ_{j>T} (1+j)^{−2d} ≤ (T+1)^{1−2d}/(2d−1), per side
                let sides = if two_sided { 2.0 } else { 1.0 };
                let bound =
                    |t: f64| sides * scale * scale * (t + 1.0).powf(1.0 - 2.0 * decay) / (2.0 * decay - 1.0);
                let guess = ((sides * scale * scale / ((2.0 * decay - 1.0) * tol)).powf(1.0 / (2.0 * decay - 1.0))
                    - 1.0)
                    .max(0.0)
                    .ceil();
                if guess > MAX_TRUNCATION as f64 {
                    return Err(Error::Budget(format!(
                        "polynomial decay {decay} needs truncation {guess:e} for tolerance {tol:e}"
                    )));
                }
                let mut t = guess as i64;
                while t > 0 && bound((t - 1) as f64) <= tol {
                    t -= 1;
                }
                let lo = if two_sided { -t } else { 0 };
                Ok((lo, t, bound(t as f64)))
            }
        }
    }
}

impl TruncatedLinear {
    pub fn new(spec: &LinearSpec, p: f64) -> Result<Self> {
        spec.validate()?;
        let (lo, hi, tail_sq_bound) = spec.coefficients.truncation(spec.tail_tol)?;
        if tail_sq_bound > spec.tail_tol {
            return Err(Error::Tolerance(format!(
                "coefficient tail {tail_sq_bound:e} exceeds {:e}",
                spec.tail_tol
            )));
        }
        let coeffs = (lo..=hi).map(|j| spec.coefficients.coefficient(j)).collect();
        let innovation = spec.innovation.resolved(p);
        innovation.validate()?;
        Ok(Self {
            lo,
            coeffs,
            tail_sq_bound,
            full_sum: spec.coefficients.full_sum(),
            innovation,
        })
    }

    /// Direct construction from explicit coefficients `a_lo, …`.
    pub fn from_coefficients(lo: i64, coeffs: Vec<f64>, innovation: InnovationLaw) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("no coefficients"));
        }
        innovation.validate()?;
        let full_sum = Some(coeffs.iter().sum());
        Ok(Self {
            lo,
            coeffs,
            tail_sq_bound: 0.0,
            full_sum,
            innovation,
        })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficient(&self, j: i64) -> f64 {
        let i = j - self.lo;
        if i >= 0 && (i as usize) < self.coeffs.len() {
            self.coeffs[i as usize]
        } else {
            0.0
        }
    }

    pub fn innovation(&self) -> InnovationLaw {
        self.innovation
    }

    pub fn tail_sq_bound(&self) -> f64 {
        self.tail_sq_bound
    }

    /// `A` of the truncated coefficients (what is actually simulated).
    pub fn sum(&self) -> f64 {
        crate::numerics::compensated_sum(self.coeffs.iter().copied())
    }

    /// `A` of the untruncated rule, when convergent.
    pub fn full_sum(&self) -> Option<f64> {
        self.full_sum
    }

    /// `Σ a_j²`, the variance of `X_0` for unit-variance innovations.
    pub fn sum_sq(&self) -> f64 {
        crate::numerics::compensated_sum(self.coeffs.iter().map(|a| a * a))
    }

    /// Prefix sums `P[i] = Σ_{l<i} coeffs[l]`.
    fn prefix(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.coeffs.len() + 1);
        let mut acc = 0.0;
        p.push(0.0);
        for &a in &self.coeffs {
            acc += a;
            p.push(acc);
        }
        p
    }

    /// Weights `c_m = Σ_{k=1}^n a_{k−m}` of `S_n = Σ_m c_m ε_m`, for
    /// `m = 1 − hi, …, n − lo` in order.
    pub fn sum_weights(&self, n: usize) -> Vec<f64> {
        let p = self.prefix();
        let len = self.coeffs.len() as i64;
        let (lo, hi) = (self.lo, self.hi());
        (1 - hi..=n as i64 - lo)
            .map(|m| {
                // j = k − m over k ∈ [1, n] ∩ [lo + m, hi + m]
                let j0 = (1 - m).max(lo) - lo;
                let j1 = (n as i64 - m).min(hi) - lo;
                if j1 < j0 {
                    0.0
                } else {
                    p[(j1 + 1).min(len) as usize] - p[j0 as usize]
                }
            })
            .collect()
    }

    /// `σ_n² = n^{-1} E S_n²` of the truncated process.
    pub fn sigma_n2(&self, n: usize) -> f64 {
        let w = self.sum_weights(n);
        crate::numerics::compensated_sum(w.iter().map(|c| c * c)) * self.innovation.variance() / n as f64
    }

    /// `σ² = A² Var ε` of the truncated process.
    pub fn sigma2(&self) -> f64 {
        let a = self.sum();
        a * a * self.innovation.variance()
    }

    /// Innovations `ε_{1−hi}, …, ε_{n−lo}` in index order.
    pub fn innovations<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let count = n + self.coeffs.len() - 1;
        (0..count).map(|_| self.innovation.sample(rng)).collect()
    }

    /// Index of the first innovation returned by [`Self::innovations`].
    pub fn first_innovation_index(&self) -> i64 {
        1 - self.hi()
    }

    /// `X_1, …, X_n` from innovations laid out as by [`Self::innovations`].
    pub fn path_from(&self, eps: &[f64], n: usize) -> Vec<f64> {
        let hi = self.hi();
        let base = self.first_innovation_index();
        (1..=n as i64)
            .map(|k| {
                // X_k = Σ_j a_j ε_{k−j}; ε_{k−j} sits at offset k − j − base
                let mut s = 0.0;
                for (i, &a) in self.coeffs.iter().enumerate() {
                    let j = self.lo + i as i64;
                    debug_assert!(j <= hi);
                    s += a * eps[(k - j - base) as usize];
                }
                s
            })
            .collect()
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let eps = self.innovations(n, rng);
        self.path_from(&eps, n)
    }

    /// `S_n` directly from the weights, in `O(n + window)`.
    pub fn sample_sum<R: Rng + ?Sized>(&self, n: usize, weights: &[f64], rng: &mut R) -> f64 {
        debug_assert_eq!(weights.len(), n + self.coeffs.len() - 1);
        let mut s = 0.0;
        for &c in weights {
            s += c * self.innovation.sample(rng);
        }
        s
    }
}

/// `X_1, …, X_n` of a linear process from one innovation stream.
pub fn sample_linear_process(spec: &LinearSpec, p: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let lin = TruncatedLinear::new(spec, p)?;
    let mut rng = stream(seed, 0, n as u64, StreamRole::Innovations);
    Ok(lin.sample_path(n, &mut rng))
}

/// Centring constant `E h(V)` of a function of a linear process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub value: f64,
    /// Zero for quadrature.
    pub stderr: f64,
    pub draws: u64,
}

/// Checks `w_h(t, M) ≤ C t^γ M^α` on a grid of `(t, M)`; returns the worst
/// ratio of measured modulus to the declared bound.
pub fn check_modulus(h: &HRule, c: f64, gamma: f64, alpha: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &m in &[0.5, 1.0, 2.0, 4.0, 8.0] {
        let xs: Vec<f64> = (0..=2000).map(|i| -m + 2.0 * m * i as f64 / 2000.0).collect();
        for &t in &[1e-3, 1e-2, 0.1, 0.5, 1.0] {
            let mut w: f64 = 0.0;
            for &x in &xs {
                for &d in &[t, 0.5 * t] {
                    let y = (x + d).min(m);
                    w = w.max((h.eval(x) - h.eval(y)).abs());
                }
            }
            let bound = c * t.powf(gamma) * m.powf(alpha);
            let ratio = if bound > 0.0 { w / bound } else if w > 0.0 { f64::INFINITY } else { 0.0 };
            if ratio > 1.0 + 1e-9 {
                return Err(Error::invariant(
                    "modulus bound w_h(t, M) ≤ C t^γ M^α",
                    format!("w_h({t}, {m}) = {w} exceeds {bound}"),
                ));
            }
            worst = worst.max(ratio);
        }
    }
    Ok(worst)
}

/// A prepared function of a linear process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionOfLinear {
    pub base: TruncatedLinear,
    pub h: HRule,
    pub centering: Centering,
}

impl FunctionOfLinear {
    pub fn new(spec: &FunctionOfLinearSpec, p: f64, seed: u64) -> Result<Self> {
        let base = TruncatedLinear::new(&spec.base, p)?;
        check_modulus(&spec.h, spec.modulus_constant, spec.gamma, spec.alpha)?;
        let centering = centering_constant(&base, &spec.h, spec.centering_draws, seed)?;
        Ok(Self {
            base,
            h: spec.h.clone(),
            centering,
        })
    }

    pub fn apply_h(&self, base_values: &[f64]) -> Vec<f64> {
        apply_h(base_values, &self.h, self.centering.value)
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        self.apply_h(&self.base.sample_path(n, rng))
    }
}

/// `h(v) − centre` for each base value.
pub fn apply_h(base_values: &[f64], h: &HRule, centre: f64) -> Vec<f64> {
    base_values.iter().map(|&v| h.eval(v) - centre).collect()
}

/// `E h(Σ a_j ε_j)`: exact Gaussian quadrature for Gaussian innovations,
/// otherwise Monte Carlo with `draws` samples from the centring stream.
pub fn centering_constant(base: &TruncatedLinear, h: &HRule, draws: u64, seed: u64) -> Result<Centering> {
    if let HRule::Constant { value } = h {
        return Ok(Centering { value: *value, stderr: 0.0, draws: 0 });
    }
    if base.innovation() == InnovationLaw::Gaussian {
        let s = base.sum_sq().sqrt();
        let f = |z: f64| h.eval(s * z) * normal::pdf(z);
        let cfg = QuadConfig::with_abs_tol(1e-13);
        let r = crate::numerics::integrate_with_breaks(
            f,
            f64::NEG_INFINITY,
            f64::INFINITY,
            &[0.0],
            cfg,
        );
        if !r.converged {
            return Err(Error::NonConvergence("centring quadrature".into()));
        }
        return Ok(Centering { value: r.value, stderr: 0.0, draws: 0 });
    }
    Ok(monte_carlo_mean(base, h, draws, seed, 0))
}

/// Monte Carlo estimate of `E h(V)`; `salt` separates independent runs.
pub fn monte_carlo_mean(base: &TruncatedLinear, h: &HRule, draws: u64, seed: u64, salt: u64) -> Centering {
    const CHUNK: u64 = 1 << 16;
    let chunks = draws.div_ceil(CHUNK);
    let sums: Vec<(f64, f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c, salt, StreamRole::Centering);
            let count = CHUNK.min(draws - c * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..count {
                let v: f64 = base.coeffs.iter().map(|a| a * base.innovation.sample(&mut rng)).sum();
                let y = h.eval(v);
                s += y;
                s2 += y * y;
            }
            (s, s2, count)
        })
        .collect();
    let n: u64 = sums.iter().map(|t| t.2).sum();
    let s = crate::numerics::compensated_sum(sums.iter().map(|t| t.0));
    let s2 = crate::numerics::compensated_sum(sums.iter().map(|t| t.1));
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0) * n as f64 / (n - 1) as f64;
    Centering {
        value: mean,
        stderr: (var / n as f64).sqrt(),
        draws: n,
    }
}

/// Batch-means estimate of the long-run variance from one long path.
pub fn batch_means_variance(path: &[f64], batch: usize) -> (f64, f64) {
    let means: Vec<f64> = path
        .chunks_exact(batch)
        .map(|c| c.iter().sum::<f64>() / (batch as f64).sqrt())
        .collect();
    let (m, _) = mean_and_stderr(&means);
    let k = means.len() as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1.0);
    (var, var * (2.0 / (k - 1.0)).sqrt())
}
