use statrs::function::gamma::{gamma, gamma_ur};

use crate::numerics::{normal, quad, QuadConfig};
use crate::{Error, Result};

/// Absolute tolerance of the envelope-norm quadrature.
pub const ENVELOPE_TOL: f64 = 1e-10;

/// A nonincreasing function on `(0, 1)`: the quantile function of `|X|`.
pub trait TailQuantileFn {
    fn eval(&self, u: f64) -> f64;

    /// Points of discontinuity in `(0, 1)`.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Whether the function is a finite step function (no tail blow-up).
    fn is_bounded(&self) -> bool {
        false
    }
}

/// Tail quantile of a finitely supported `|X|`: `Q(u) = inf{x : P(|X| > x) ≤ u}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailQuantile {
    /// Distinct values of `|X|`, decreasing.
    values: Vec<f64>,
    /// `P(|X| ≥ values[k])`.
    cum: Vec<f64>,
}

impl TailQuantile {
    pub fn from_atoms(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::invalid("values and weights differ in length"));
        }
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .map(|v| v.abs())
            .zip(weights.iter().copied())
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if pairs.iter().any(|(v, _)| !v.is_finite()) {
            return Err(Error::invalid("non-finite value"));
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut vals: Vec<f64> = Vec::new();
        let mut cum: Vec<f64> = Vec::new();
        let mut acc = 0.0;
        for (v, w) in pairs {
            acc += w;
            if vals.last() == Some(&v) {
                *cum.last_mut().unwrap() = acc;
            } else {
                vals.push(v);
                cum.push(acc);
            }
        }
        Ok(Self { values: vals, cum })
    }

    pub fn from_sample(sample: &[f64]) -> Result<Self> {
        let w = 1.0 / sample.len().max(1) as f64;
        Self::from_atoms(sample, &vec![w; sample.len()])
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c.abs()).collect(),
            cum: self.cum.clone(),
        }
    }

    /// Distinct values of `|X|` (decreasing) and `P(|X| ≥ value)`.
    pub fn atoms(&self) -> (&[f64], &[f64]) {
        (&self.values, &self.cum)
    }

    /// Envelope norm through the closed-form primitive of the weight; agrees
    /// with [`envelope_norm`] and costs one incomplete-gamma call per atom.
    pub fn envelope_norm_exact(&self, p: f64) -> Result<f64> {
        if !(p >= 2.0 && p <= 3.0) {
            return Err(Error::invalid(format!("p must lie in [2, 3], got {p}")));
        }
        let mut total = 0.0;
        let mut prev_w = 0.0;
        for (&v, &c) in self.values.iter().zip(&self.cum) {
            let c = c.min(1.0);
            let w = weight_primitive(c, p);
            total += v * (w - prev_w);
            prev_w = w;
        }
        Ok(total)
    }
}

/// `∫₀^c envelope_weight(u, p) du`. Below `u*` the substitution
/// `u = 2(1 − Φ(z))` gives `(2^{q/2}/√π) Γ((q+1)/2, z_c²/2)` with `q = p − 2`.
pub fn weight_primitive(c: f64, p: f64) -> f64 {
    let split = envelope_split();
    let q = p - 2.0;
    let head = |c: f64| {
        if c <= 0.0 {
            return 0.0;
        }
        if q == 0.0 {
            return c;
        }
        let z = normal::upper_quantile(0.5 * c);
        let a = 0.5 * (q + 1.0);
        2f64.powf(0.5 * q) / std::f64::consts::PI.sqrt() * gamma(a) * gamma_ur(a, 0.5 * z * z)
    };
    if c <= split {
        head(c)
    } else {
        head(split) + (c - split)
    }
}

impl TailQuantileFn for TailQuantile {
    fn eval(&self, u: f64) -> f64 {
        let k = self.cum.partition_point(|&c| c <= u);
        self.values.get(k).copied().unwrap_or(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.cum.iter().copied().filter(|&c| c > 0.0 && c < 1.0).collect()
    }

    fn is_bounded(&self) -> bool {
        true
    }
}

/// Wraps a closure as a tail quantile.
pub struct FnQuantile<F: Fn(f64) -> f64>(pub F);

impl<F: Fn(f64) -> f64> TailQuantileFn for FnQuantile<F> {
    fn eval(&self, u: f64) -> f64 {
        (self.0)(u)
    }
}

/// Weight `(1 ∨ Φ⁻¹(1 − u/2))^{p−2}`.
pub fn envelope_weight(u: f64, p: f64) -> f64 {
    let z = normal::upper_quantile(0.5 * u);
    if z <= 1.0 {
        1.0
    } else {
        z.powf(p - 2.0)
    }
}

/// Split point `u* = 2(1 − Φ(1))` where the weight leaves 1.
pub fn envelope_split() -> f64 {
    2.0 * normal::sf(1.0)
}

/// `∫₀¹ (1 ∨ Φ⁻¹(1−u/2))^{p−2} Q(u) du`; `+∞` when the integral diverges.
pub fn envelope_norm(q: &dyn TailQuantileFn, p: f64) -> Result<f64> {
    if !(p >= 2.0 && p <= 3.0) {
        return Err(Error::invalid(format!("p must lie in [2, 3], got {p}")));
    }
    let f = |u: f64| envelope_weight(u, p) * q.eval(u);
    if !q.is_bounded() && tail_blows_up(&f) {
        return Ok(f64::INFINITY);
    }
    let split = envelope_split();
    let mut breaks = q.breakpoints();
    breaks.push(split);
    let cfg = QuadConfig::with_abs_tol(ENVELOPE_TOL);
    let res = quad::integrate_with_breaks(f, 0.0, 1.0, &breaks, cfg);
    if !res.value.is_finite() || (!res.converged && !q.is_bounded()) {
        return Ok(f64::INFINITY);
    }
    Ok(res.value)
}

/// Compares the mass of consecutive decades near `u = 0`: for an integrable
/// `u^{−a}` singularity the ratio is `10^{−3(1−a)} < 1`; a ratio near one
/// signals a divergent integral.
fn tail_blows_up<F: Fn(f64) -> f64>(f: &F) -> bool {
    let cfg = QuadConfig::with_abs_tol(1e-14);
    let mut pieces = Vec::new();
    for k in 1..=6 {
        let hi = 10f64.powi(-3 * k);
        let lo = 10f64.powi(-3 * (k + 1));
        let v = quad::integrate(f, lo, hi, cfg).value;
        if !v.is_finite() {
            return true;
        }
        pieces.push(v);
    }
    let n = pieces.len();
    let (a, b, c) = (pieces[n - 3], pieces[n - 2], pieces[n - 1]);
    c > 1e-12 && c >= 0.9 * b && b >= 0.9 * a
}
