//! `A_n` and `B_n` of a coefficient sequence, through its one-sided tails
//! `T(i) = Σ_{l≥i} a_l` and `U(i) = Σ_{l≤−i} a_l`.

use serde::{Deserialize, Serialize};

use crate::numerics::{compensated_sum, special::hurwitz_zeta};
use crate::processes::CoeffRule;
use crate::{Error, Result};

/// Relative size of an uncertified remainder that is still accepted.
pub const TAIL_CERTIFICATE: f64 = 1e-8;
/// Smallest summation horizon for power-law blocks.
const MIN_HORIZON: usize = 1_000_000;

/// One-sided tail sums of a coefficient rule.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientTails {
    /// `a_lo, …` listed; `suffix[i] = Σ_{l ≥ lo+i} a_l`.
    Finite { lo: i64, coeffs: Vec<f64>, suffix: Vec<f64>, abs_suffix: Vec<f64>, prefix: Vec<f64>, abs_prefix: Vec<f64> },
    Geometric { rho: f64, scale: f64 },
    Polynomial { decay: f64, scale: f64, two_sided: bool },
}

impl CoefficientTails {
    pub fn from_rule(rule: &CoeffRule) -> Result<Self> {
        rule.validate()?;
        Ok(match *rule {
            CoeffRule::Finite { offset, ref coeffs } => Self::from_coefficients(offset, coeffs.clone()),
            CoeffRule::Geometric { rho, scale } => Self::Geometric { rho, scale },
            CoeffRule::Polynomial { decay, scale, two_sided } => {
                if decay <= 1.0 {
                    return Err(Error::invalid(format!("Σ a_j diverges for decay {decay} ≤ 1")));
                }
                Self::Polynomial { decay, scale, two_sided }
            }
        })
    }

    pub fn from_coefficients(lo: i64, coeffs: Vec<f64>) -> Self {
        let m = coeffs.len();
        let mut suffix = vec![0.0; m + 1];
        let mut abs_suffix = vec![0.0; m + 1];
        for i in (0..m).rev() {
            suffix[i] = suffix[i + 1] + coeffs[i];
            abs_suffix[i] = abs_suffix[i + 1] + coeffs[i].abs();
        }
        let mut prefix = vec![0.0; m + 1];
        let mut abs_prefix = vec![0.0; m + 1];
        for i in 0..m {
            prefix[i + 1] = prefix[i] + coeffs[i];
            abs_prefix[i + 1] = abs_prefix[i] + coeffs[i].abs();
        }
        Self::Finite { lo, coeffs, suffix, abs_suffix, prefix, abs_prefix }
    }

    /// Largest index with a nonzero coefficient (`None` when unbounded).
    pub fn support_hi(&self) -> Option<i64> {
        match self {
            Self::Finite { lo, coeffs, .. } => Some(lo + coeffs.len() as i64 - 1),
            _ => None,
        }
    }

    /// Smallest index with a nonzero coefficient (`None` when unbounded).
    pub fn support_lo(&self) -> Option<i64> {
        match self {
            Self::Finite { lo, .. } => Some(*lo),
            Self::Geometric { .. } => Some(0),
            Self::Polynomial { two_sided, .. } => if *two_sided { None } else { Some(0) },
        }
    }

    fn finite_upper(lo: i64, s: &[f64], i: i64) -> f64 {
        let off = i - lo;
        if off <= 0 {
            s[0]
        } else if off as usize >= s.len() {
            0.0
        } else {
            s[off as usize]
        }
    }

    fn finite_lower(lo: i64, p: &[f64], i: i64) -> f64 {
        // Σ_{l ≤ −i} = prefix up to offset −i − lo (inclusive)
        let off = -i - lo + 1;
        if off <= 0 {
            0.0
        } else if off as usize >= p.len() {
            p[p.len() - 1]
        } else {
            p[off as usize]
        }
    }

    /// `T(i) = Σ_{l ≥ i} a_l`.
    pub fn t(&self, i: i64) -> f64 {
        match *self {
            Self::Finite { lo, ref suffix, .. } => Self::finite_upper(lo, suffix, i),
            Self::Geometric { rho, scale } => scale * rho.powf(i.max(0) as f64) / (1.0 - rho),
            Self::Polynomial { decay, scale, .. } => {
                if i >= 0 {
                    scale * hurwitz_zeta(decay, 1.0 + i as f64)
                } else {
                    self.full() - self.u(1 - i)
                }
            }
        }
    }

    /// `Σ_l a_l`.
    pub fn full(&self) -> f64 {
        match *self {
            Self::Finite { ref suffix, .. } => suffix[0],
            Self::Geometric { rho, scale } => scale / (1.0 - rho),
            Self::Polynomial { decay, scale, two_sided } => {
                let one = hurwitz_zeta(decay, 1.0);
                scale * if two_sided { 2.0 * one - 1.0 } else { one }
            }
        }
    }

    /// `U(i) = Σ_{l ≤ −i} a_l`.
    pub fn u(&self, i: i64) -> f64 {
        match *self {
            Self::Finite { lo, ref prefix, .. } => Self::finite_lower(lo, prefix, i),
            Self::Geometric { .. } | Self::Polynomial { two_sided: false, .. } if i > 0 => 0.0,
            Self::Polynomial { decay, scale, two_sided: true } if i >= 0 => scale * hurwitz_zeta(decay, 1.0 + i as f64),
            _ => self.full() - self.t(1 - i),
        }
    }

    /// `Σ_{l ≥ i} |a_l|`.
    pub fn t_abs(&self, i: i64) -> f64 {
        match *self {
            Self::Finite { lo, ref abs_suffix, .. } => Self::finite_upper(lo, abs_suffix, i),
            Self::Geometric { rho, scale } => scale.abs() * rho.abs().powf(i.max(0) as f64) / (1.0 - rho.abs()),
            Self::Polynomial { decay, scale, .. } => scale.abs() * hurwitz_zeta(decay, 1.0 + i.max(0) as f64),
        }
    }

    /// `Σ_{l ≤ −i} |a_l|`.
    pub fn u_abs(&self, i: i64) -> f64 {
        match *self {
            Self::Finite { lo, ref abs_prefix, .. } => Self::finite_lower(lo, abs_prefix, i),
            Self::Geometric { .. } => 0.0,
            Self::Polynomial { decay, scale, two_sided } => {
                if two_sided {
                    scale.abs() * hurwitz_zeta(decay, 1.0 + i.max(0) as f64)
                } else {
                    0.0
                }
            }
        }
    }
}

/// `A_n` and `B_n` with certified remainders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnBn {
    pub n: usize,
    /// Partial evaluation of `A_n`; the true value lies in
    /// `[a_n, a_n + a_tail_bound]`.
    pub a_n: f64,
    pub a_tail_bound: f64,
    pub b_n: f64,
    /// `a_tail_bound ≤ 1e−8 · max(1, a_n)`.
    pub certified: bool,
}

impl AnBn {
    pub fn a_upper(&self) -> f64 {
        self.a_n + self.a_tail_bound
    }
}

/// `A_n = Σ_j (Σ_{k=1}^n b_{k−j})²` by the three-block formula
///
/// `Σ_{j=1}^n (U(j) + T(n+1−j))² + Σ_{i≥1} (T(i) − T(n+i))² + Σ_{i≥1} (U(i) − U(i+n))²`,
///
/// and `B_n = Σ_{k=1}^n ((Σ_{j≥k}|a_j|)² + (Σ_{j≤−k}|a_j|)²)`.
pub fn an_bn(rule: &CoeffRule, n: usize) -> Result<AnBn> {
    let tails = CoefficientTails::from_rule(rule)?;
    an_bn_tails(&tails, n)
}

pub fn an_bn_tails(tails: &CoefficientTails, n: usize) -> Result<AnBn> {
    if n == 0 {
        return Err(Error::invalid("A_n needs n ≥ 1"));
    }
    let nn = n as i64;
    let block1 = compensated_sum((1..=nn).map(|j| {
        let v = tails.u(j) + tails.t(nn + 1 - j);
        v * v
    }));
    let b_n = compensated_sum((1..=nn).map(|k| {
        let (t, u) = (tails.t_abs(k), tails.u_abs(k));
        t * t + u * u
    }));
    let (rest, bound) = match *tails {
        CoefficientTails::Finite { lo, ref coeffs, .. } => {
            let hi = lo + coeffs.len() as i64 - 1;
            let b2 = compensated_sum((1..=hi.max(0)).map(|i| (tails.t(i) - tails.t(nn + i)).powi(2)));
            let b3 = compensated_sum((1..=(-lo).max(0)).map(|i| (tails.u(i) - tails.u(i + nn)).powi(2)));
            (b2 + b3, 0.0)
        }
        CoefficientTails::Geometric { rho, scale } => {
            let r2 = rho * rho;
            let w = scale * (1.0 - rho.powi(n as i32)) / (1.0 - rho);
            (w * w * r2 / (1.0 - r2), 0.0)
        }
        CoefficientTails::Polynomial { decay, scale, two_sided } => {
            let horizon = (64 * n).max(MIN_HORIZON) as i64;
            let b2 = compensated_sum((1..=horizon).map(|i| (tails.t(i) - tails.t(nn + i)).powi(2)));
            let sides = if two_sided { 2.0 } else { 1.0 };
            // |T(i) − T(n+i)| ≤ n |scale| (1+i)^{−d}, summed beyond the horizon
            let bound = sides * (nn as f64).powi(2) * scale * scale * (1.0 + horizon as f64).powf(1.0 - 2.0 * decay)
                / (2.0 * decay - 1.0);
            (b2 * sides, bound)
        }
    };
    let a_n = block1 + rest;
    Ok(AnBn { n, a_n, a_tail_bound: bound, b_n, certified: bound <= TAIL_CERTIFICATE * a_n.max(1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(lo: i64, a: &[f64], n: usize) -> f64 {
        let total: f64 = a.iter().sum();
        let b = |j: i64| {
            let i = j - lo;
            let v = if i >= 0 && (i as usize) < a.len() { a[i as usize] } else { 0.0 };
            if j == 0 { v - total } else { v }
        };
        let hi = lo + a.len() as i64 - 1;
        let range = (1 - hi.max(0) - 2)..=(n as i64 - lo.min(0) + 2);
        range.map(|j| (1..=n as i64).map(|k| b(k - j)).sum::<f64>().powi(2)).sum()
    }

    #[test]
    fn pure_martingale_is_zero() {
        let r = an_bn(&CoeffRule::Finite { offset: 0, coeffs: vec![1.7] }, 10).unwrap();
        assert_eq!(r.a_n, 0.0);
        assert_eq!(r.b_n, 0.0);
    }

    #[test]
    fn finite_matches_direct_sum() {
        let a = [0.3, -1.2, 0.5, 0.8, -0.1];
        for lo in [-3, -1, 0, 2] {
            for n in [1, 2, 5, 9] {
                let r = an_bn(&CoeffRule::Finite { offset: lo, coeffs: a.to_vec() }, n).unwrap();
                let d = direct(lo, &a, n);
                assert!((r.a_n - d).abs() < 1e-12, "lo={lo} n={n}: {} vs {d}", r.a_n);
                assert!(r.a_n <= 4.0 * r.b_n + 1e-12);
            }
        }
    }

    #[test]
    fn geometric_matches_long_finite() {
        let (rho, scale) = (0.6f64, 1.3);
        let coeffs: Vec<f64> = (0..200).map(|j| scale * rho.powi(j)).collect();
        for n in [1, 3, 10] {
            let g = an_bn(&CoeffRule::Geometric { rho, scale }, n).unwrap();
            let f = an_bn(&CoeffRule::Finite { offset: 0, coeffs: coeffs.clone() }, n).unwrap();
            assert!((g.a_n - f.a_n).abs() < 1e-10);
            assert!((g.b_n - f.b_n).abs() < 1e-10);
        }
    }
}
