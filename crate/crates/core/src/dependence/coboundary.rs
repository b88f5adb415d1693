//! Martingale–coboundary decomposition of a truncated linear process:
//! `X_k = A ε_k + Z_k − Z_{k+1}`, hence `S_n = M_n + Z_1 − Z_{n+1}`.

use serde::{Deserialize, Serialize};

use crate::processes::{LinearSpec, TruncatedLinear};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoboundaryDecomposition {
    /// `A = Σ a_j` of the truncated coefficients; `D_k = A ε_k`.
    pub a_sum: f64,
    /// `Z_k = Σ_{m=1}^{hi} T(m) ε_{k−m} − Σ_{m=lo+1}^{0} L(m) ε_{k−m}`;
    /// `future[m−1] = T(m)`, `past[−m] = L(m) = Σ_{l<m} a_l`.
    pub future: Vec<f64>,
    pub past: Vec<f64>,
    pub lo: i64,
    pub hi: i64,
    /// Bound on the discarded `ℓ²` mass of the coefficients.
    pub truncation_tolerance: f64,
}

/// Builds the decomposition of the truncated process of `spec`.
pub fn coboundary(spec: &LinearSpec, p: f64) -> Result<CoboundaryDecomposition> {
    let lin = TruncatedLinear::new(spec, p)?;
    if lin.tail_sq_bound() > spec.tail_tol {
        return Err(Error::Tolerance(format!(
            "coefficient tail {:e} exceeds {:e}",
            lin.tail_sq_bound(),
            spec.tail_tol
        )));
    }
    Ok(CoboundaryDecomposition::of(&lin))
}

impl CoboundaryDecomposition {
    pub fn of(lin: &TruncatedLinear) -> Self {
        let (lo, hi) = (lin.lo(), lin.hi());
        let future: Vec<f64> = (1..=hi.max(0)).map(|m| (m..=hi).map(|l| lin.coefficient(l)).sum()).collect();
        let past: Vec<f64> = (0..=(-(lo + 1)).max(-1))
            .map(|neg| {
                let m = -neg;
                (lo..m).map(|l| lin.coefficient(l)).sum()
            })
            .collect();
        Self { a_sum: lin.sum(), future, past, lo, hi, truncation_tolerance: lin.tail_sq_bound() }
    }

    /// `Z_k` from innovations `eps[i] = ε_{base+i}`.
    pub fn z(&self, eps: &[f64], base: i64, k: i64) -> f64 {
        let at = |idx: i64| eps[(idx - base) as usize];
        let fut: f64 = self.future.iter().enumerate().map(|(i, t)| t * at(k - (i as i64 + 1))).sum();
        let pst: f64 = if self.lo < 0 {
            self.past.iter().enumerate().map(|(neg, l)| l * at(k + neg as i64)).sum()
        } else {
            0.0
        };
        fut - pst
    }

    /// `D_k = A ε_k`.
    pub fn d(&self, eps: &[f64], base: i64, k: i64) -> f64 {
        self.a_sum * eps[(k - base) as usize]
    }

    /// Innovation indices needed for `Z_1, …, Z_{n+1}` and `X_1, …, X_n`.
    pub fn innovation_range(&self, n: usize) -> (i64, i64) {
        (1 - self.hi.max(1), n as i64 + 1 - self.lo.min(0))
    }

    /// `|S_k − M_k − Z_1 + Z_{k+1}|` for `k = 1..=n`, where `x` holds
    /// `X_1, …, X_n` built from the same innovations.
    pub fn residuals(&self, x: &[f64], eps: &[f64], base: i64) -> Vec<f64> {
        let z1 = self.z(eps, base, 1);
        let mut s = 0.0;
        let mut m = 0.0;
        (1..=x.len() as i64)
            .map(|k| {
                s += x[(k - 1) as usize];
                m += self.d(eps, base, k);
                (s - m - z1 + self.z(eps, base, k + 1)).abs()
            })
            .collect()
    }
}
