//! Log-log regression of distance curves and the upper-bound verdict.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Spearman correlation above which a ratio sequence counts as trending up.
pub const SPEARMAN_LIMIT: f64 = 0.5;
/// Points needed for a fit or a consistency verdict.
pub const MIN_POINTS: usize = 4;

/// Weighted least squares of `y` on the columns of `x` with weights `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub coefficients: Vec<f64>,
    /// From `(XᵀWX)⁻¹`, the weights being inverse variances.
    pub std_errors: Vec<f64>,
    /// `Σ w_i (y_i − ŷ_i)²`.
    pub weighted_rss: f64,
    pub points: usize,
}

pub fn weighted_least_squares(columns: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Regression> {
    let (n, k) = (y.len(), columns.len());
    if n < k || columns.iter().any(|c| c.len() != n) || w.len() != n {
        return Err(Error::invalid(format!("{n} observations for {k} coefficients")));
    }
    let x = DMatrix::from_fn(n, k, |i, j| columns[j][i]);
    let wv = DVector::from_column_slice(w);
    let yv = DVector::from_column_slice(y);
    let xtw = x.transpose() * DMatrix::from_diagonal(&wv);
    let gram = &xtw * &x;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::NonConvergence("singular weighted normal equations".into()))?;
    let beta = &inv * (&xtw * &yv);
    let resid = &yv - &x * &beta;
    let weighted_rss = resid.iter().zip(w).map(|(e, w)| w * e * e).sum();
    Ok(Regression {
        coefficients: beta.iter().copied().collect(),
        std_errors: (0..k).map(|j| inv[(j, j)].max(0.0).sqrt()).collect(),
        weighted_rss,
        points: n,
    })
}

/// `log v = a + b log n`, weighted by `(v / se)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
    pub weighted_rss: f64,
    pub points: usize,
}

/// `log v = a + b log n + c log log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPowerFit {
    pub slope: f64,
    pub slope_se: f64,
    pub log_power: f64,
    pub log_power_se: f64,
    pub intercept: f64,
    pub weighted_rss: f64,
    pub points: usize,
}

fn log_weights(values: &[f64], stderr: &[f64]) -> Vec<f64> {
    values
        .iter()
        .zip(stderr)
        .map(|(v, s)| {
            let rel = s / v;
            1.0 / (rel * rel).max(1e-12)
        })
        .collect()
}

pub fn fit_power(n: &[f64], values: &[f64], stderr: &[f64]) -> Result<PowerFit> {
    let x: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let r = weighted_least_squares(&[vec![1.0; n.len()], x], &y, &log_weights(values, stderr))?;
    Ok(PowerFit {
        slope: r.coefficients[1],
        slope_se: r.std_errors[1],
        intercept: r.coefficients[0],
        intercept_se: r.std_errors[0],
        weighted_rss: r.weighted_rss,
        points: r.points,
    })
}

pub fn fit_log_power(n: &[f64], values: &[f64], stderr: &[f64]) -> Result<LogPowerFit> {
    let x: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let z: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let r = weighted_least_squares(&[vec![1.0; n.len()], x, z], &y, &log_weights(values, stderr))?;
    Ok(LogPowerFit {
        slope: r.coefficients[1],
        slope_se: r.std_errors[1],
        log_power: r.coefficients[2],
        log_power_se: r.std_errors[2],
        intercept: r.coefficients[0],
        weighted_rss: r.weighted_rss,
        points: r.points,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Rank correlation with average ranks for ties; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    /// `max_n v_n / (n^γ (log n)^{[log]})`; `None` on an empty curve.
    pub c_star: Option<f64>,
    pub ratios: Vec<f64>,
    /// `None` below the minimum number of points.
    pub spearman: Option<f64>,
    /// No upward trend of the ratios: Spearman with `n` below 0.5.
    pub stable: bool,
    pub verdict: ConsistencyVerdict,
}

/// Whether `curve = [(n, v)]` stays below `C n^γ (log n)^{[log_factor]}`
/// with a constant that does not drift upward.
pub fn upper_bound_consistency(curve: &[(f64, f64)], exponent: f64, log_factor: bool) -> Consistency {
    let ratios: Vec<f64> = curve
        .iter()
        .map(|&(n, v)| v / (n.powf(exponent) * if log_factor { n.ln() } else { 1.0 }))
        .collect();
    let c_star = ratios.iter().copied().reduce(f64::max);
    if curve.len() < MIN_POINTS {
        return Consistency { c_star, ratios, spearman: None, stable: false, verdict: ConsistencyVerdict::Inconclusive };
    }
    let ns: Vec<f64> = curve.iter().map(|c| c.0).collect();
    let rho = spearman(&ns, &ratios);
    let stable = rho < SPEARMAN_LIMIT;
    Consistency {
        c_star,
        ratios,
        spearman: Some(rho),
        stable,
        verdict: if stable { ConsistencyVerdict::Pass } else { ConsistencyVerdict::Fail },
    }
}
