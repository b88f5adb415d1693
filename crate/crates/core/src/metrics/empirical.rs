use serde::{Deserialize, Serialize};

use crate::numerics::normal;
use crate::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A sorted, weighted, finitely supported law.
///
/// Cumulative weights are cached so that quantile and d.f. queries are
/// binary searches. For uniform weights the cumulative weight of the `i`-th
/// atom is computed as `(i + 1) / M` exactly, so breakpoints of two uniform
/// samples of sizes `M` and `N` coincide wherever the fractions coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    points: Vec<f64>,
    weights: Vec<f64>,
    #[serde(skip)]
    cum: Vec<f64>,
    #[serde(skip)]
    tail: Vec<f64>,
    uniform: bool,
}

impl EmpiricalDistribution {
    /// Uniform weights `1/M` on the given points (any order).
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(x) = points.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample point {x}")));
        }
        points.sort_by(f64::total_cmp);
        let m = points.len();
        let w = 1.0 / m as f64;
        let weights = vec![w; m];
        let cum = (1..=m).map(|i| i as f64 / m as f64).collect();
        let tail = (1..=m).map(|i| (m - i) as f64 / m as f64).collect();
        Ok(Self {
            points,
            weights,
            cum,
            tail,
            uniform: true,
        })
    }

    /// Weighted atoms; weights must be positive and sum to one within 1e-12.
    pub fn with_weights(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if points.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite sample point"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invariant("positive weights", format!("weight {w}")));
        }
        let total: f64 = crate::numerics::compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invariant(
                "weights sum to one",
                format!("sum = {total:.17}"),
            ));
        }
        let mut pairs: Vec<(f64, f64)> = points.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (points, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        Ok(Self::from_sorted_parts(points, weights))
    }

    /// Weighted atoms with weights renormalised to sum to one.
    pub fn from_unnormalized(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = crate::numerics::compensated_sum(weights.iter().copied());
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::invalid(format!("total weight {total}")));
        }
        Self::with_weights(points, weights.into_iter().map(|w| w / total).collect())
    }

    fn from_sorted_parts(points: Vec<f64>, weights: Vec<f64>) -> Self {
        let m = weights.len();
        let mut cum = Vec::with_capacity(m);
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cum.push(acc);
        }
        // suffix sums keep precision near u = 1
        let mut tail = vec![0.0; m];
        let mut acc = 0.0;
        for i in (0..m).rev() {
            tail[i] = acc;
            acc += weights[i];
        }
        // pin the last breakpoint to 1 so quantile(1) is the maximum
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Self {
            points,
            weights,
            cum,
            tail,
            uniform: false,
        }
    }

    /// Exact quantile points `σ Φ⁻¹((i - 1/2) / M)`, `i = 1..M`.
    pub fn gaussian_quantile_grid(m: usize, sigma: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptySample);
        }
        let pts = (0..m)
            .map(|i| sigma * normal::quantile((i as f64 + 0.5) / m as f64))
            .collect();
        Self::new(pts)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cumulative weight up to and including each atom.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Weight strictly above each atom (`1 - cumulative`, computed as a suffix sum).
    pub fn tail_weights(&self) -> &[f64] {
        &self.tail
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Generalized inverse: the smallest atom whose cumulative weight is ≥ u.
    pub fn quantile(&self, u: f64) -> f64 {
        let idx = self.cum.partition_point(|&c| c < u);
        self.points[idx.min(self.points.len() - 1)]
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|&p| p <= x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|&p| p < x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    pub fn mean(&self) -> f64 {
        crate::numerics::compensated_sum(self.atoms().map(|(x, w)| x * w))
    }

    /// `E X^k` for integer k.
    pub fn raw_moment(&self, k: i32) -> f64 {
        crate::numerics::compensated_sum(self.atoms().map(|(x, w)| x.powi(k) * w))
    }

    /// `E|X|^r`.
    pub fn abs_moment(&self, r: f64) -> f64 {
        crate::numerics::compensated_sum(self.atoms().map(|(x, w)| x.abs().powf(r) * w))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        crate::numerics::compensated_sum(self.atoms().map(|(x, w)| (x - m) * (x - m) * w))
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// Law of `aX`.
    pub fn scaled(&self, a: f64) -> Self {
        let mut pts: Vec<f64> = self.points.iter().map(|x| a * x).collect();
        let mut wts = self.weights.clone();
        if a < 0.0 {
            pts.reverse();
            wts.reverse();
        }
        if self.uniform {
            let mut out = self.clone();
            out.points = pts;
            out
        } else {
            Self::from_sorted_parts(pts, wts)
        }
    }

    /// Law of `X + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.points.iter_mut().for_each(|x| *x += c);
        out
    }

    /// Expected value of `f(X)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        crate::numerics::compensated_sum(self.atoms().map(|(x, w)| f(x) * w))
    }

    /// Rebuilds caches after deserialization.
    pub fn validated(self) -> Result<Self> {
        if self.uniform {
            Self::new(self.points)
        } else {
            Self::with_weights(self.points, self.weights)
        }
    }
}

/// Centered normal law `N(0, σ²)`; `σ = 0` is the point mass at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLaw {
    pub sigma: f64,
}

impl GaussianLaw {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma must be finite and ≥ 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn standard() -> Self {
        Self { sigma: 1.0 }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.sigma * normal::quantile(u)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            normal::cdf(x / self.sigma)
        }
    }

    pub fn cdf_left(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            normal::cdf(x / self.sigma)
        }
    }

    /// Density; `None` for the degenerate law.
    pub fn density(&self, x: f64) -> Option<f64> {
        (self.sigma > 0.0).then(|| normal::pdf(x / self.sigma) / self.sigma)
    }

    /// `E|σY|^r`.
    pub fn abs_moment(&self, r: f64) -> f64 {
        self.sigma.powf(r) * normal::abs_moment(r)
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// A law accepted by the distance routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Empirical(EmpiricalDistribution),
    Gaussian(GaussianLaw),
}

impl Law {
    pub fn mean(&self) -> f64 {
        match self {
            Law::Empirical(e) => e.mean(),
            Law::Gaussian(_) => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Law::Empirical(e) => e.raw_moment(2),
            Law::Gaussian(g) => g.variance(),
        }
    }

    /// Raw integer moment.
    pub fn raw_moment(&self, k: i32) -> f64 {
        match self {
            Law::Empirical(e) => e.raw_moment(k),
            Law::Gaussian(g) => {
                if k % 2 == 1 {
                    0.0
                } else {
                    g.abs_moment(k as f64)
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Law::Empirical(e) => e.cdf(x),
            Law::Gaussian(g) => g.cdf(x),
        }
    }

    /// Rough support extent used to place dictionary centres.
    pub fn scale(&self) -> f64 {
        match self {
            Law::Empirical(e) => e.points()[0].abs().max(e.points()[e.len() - 1].abs()),
            Law::Gaussian(g) => 6.0 * g.sigma,
        }
    }

    /// Law of `aX`.
    pub fn scaled(&self, a: f64) -> Self {
        match self {
            Law::Empirical(e) => Law::Empirical(e.scaled(a)),
            Law::Gaussian(g) => Law::Gaussian(GaussianLaw {
                sigma: g.sigma * a.abs(),
            }),
        }
    }
}

impl From<EmpiricalDistribution> for Law {
    fn from(e: EmpiricalDistribution) -> Self {
        Law::Empirical(e)
    }
}

impl From<GaussianLaw> for Law {
    fn from(g: GaussianLaw) -> Self {
        Law::Gaussian(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_is_generalized_inverse() {
        let e = EmpiricalDistribution::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.quantile(0.0), 1.0);
        assert_eq!(e.quantile(0.25), 1.0);
        assert_eq!(e.quantile(0.2500001), 2.0);
        assert_eq!(e.quantile(0.75), 2.0);
        assert_eq!(e.quantile(1.0), 3.0);
        assert_eq!(e.cdf(2.0), 0.75);
        assert_eq!(e.cdf_left(2.0), 0.25);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(EmpiricalDistribution::with_weights(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(EmpiricalDistribution::with_weights(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(EmpiricalDistribution::new(vec![]).is_err());
        let e = EmpiricalDistribution::with_weights(vec![1.0, 0.0], vec![0.25, 0.75]).unwrap();
        assert_eq!(e.points(), &[0.0, 1.0]);
        assert_eq!(e.quantile(0.7), 0.0);
        assert_eq!(e.quantile(0.76), 1.0);
    }

    #[test]
    fn negative_scaling_reverses() {
        let e = EmpiricalDistribution::with_weights(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
        let s = e.scaled(-2.0);
        assert_eq!(s.points(), &[-2.0, 0.0]);
        assert_eq!(s.weights(), &[0.75, 0.25]);
    }
}
