use serde::{Deserialize, Serialize};

use crate::numerics::{normal, quad, QuadConfig};
use crate::{Error, Result};

pub const DEFAULT_HALF_WIDTH: f64 = 8.0;
pub const DEFAULT_POINTS: usize = (1 << 13) + 1;
/// Kernel truncation in units of `t`; the discarded Gaussian mass is
/// `2(1 − Φ(8)) ≈ 1.2e−15`.
pub const KERNEL_TRUNCATION: f64 = 8.0;

/// Samples of a function on a uniform grid `x0 + i·h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(x0: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {h}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite"));
        }
        Ok(Self { x0, h, values })
    }

    /// Samples `f` at `n` equispaced points on `[lo, hi]`.
    pub fn sample<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::invalid("need at least two points on a nondegenerate interval"));
        }
        let h = (hi - lo) / (n - 1) as f64;
        Self::new(lo, h, (0..n).map(|i| f(lo + i as f64 * h)).collect())
    }

    /// `[−8, 8]` with `2¹³ + 1` points.
    pub fn sample_default<F: Fn(f64) -> f64>(f: F) -> Result<Self> {
        Self::sample(f, -DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH, DEFAULT_POINTS)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    /// Central-difference `l`-th derivative on the interior; returns the
    /// index offset of the first output sample and the values.
    pub fn derivative(&self, l: usize) -> Result<(usize, Vec<f64>)> {
        if self.len() < l + 3 {
            return Err(Error::invalid(format!(
                "grid of {} points too coarse for derivative order {l}",
                self.len()
            )));
        }
        let h = self.h;
        let mut v = self.values.clone();
        let mut offset = 0;
        let mut remaining = l;
        while remaining >= 2 {
            v = v
                .windows(3)
                .map(|w| (w[2] - 2.0 * w[1] + w[0]) / (h * h))
                .collect();
            offset += 1;
            remaining -= 2;
        }
        if remaining == 1 {
            v = v.windows(3).map(|w| (w[2] - w[0]) / (2.0 * h)).collect();
            offset += 1;
        }
        Ok((offset, v))
    }

    /// Grid-limited `Λ_r` seminorm: sup over grid pairs of
    /// `|f^{(l)}(x) − f^{(l)}(y)| / |x − y|^{r−l}`, `l = ⌈r⌉ − 1`.
    pub fn lambda_seminorm(&self, r: f64) -> Result<f64> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("r must be positive, got {r}")));
        }
        let l = super::zolotarev::derivative_order(r);
        let beta = r - l as f64;
        let (_, d) = self.derivative(l)?;
        let n = d.len();
        if beta == 1.0 {
            // Lipschitz constant of a grid function is attained on neighbours
            let best = d
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(0.0f64, f64::max);
            return Ok(best / self.h);
        }
        let inv: Vec<f64> = (0..n)
            .map(|k| if k == 0 { 0.0 } else { (k as f64 * self.h).powf(-beta) })
            .collect();
        let mut best = 0.0f64;
        for i in 0..n {
            let di = d[i];
            for k in 1..(n - i) {
                let q = (d[i + k] - di).abs() * inv[k];
                if q > best {
                    best = q;
                }
            }
        }
        Ok(best)
    }

    /// Convolution with the `N(0, t²)` density, truncated at `8t`, by the
    /// normalised trapezoid rule. The output grid loses the kernel half-width
    /// on both ends.
    pub fn gaussian_smooth(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::invalid(format!("t must be positive, got {t}")));
        }
        let k = (KERNEL_TRUNCATION * t / self.h).ceil() as usize;
        if self.len() <= 2 * k {
            return Err(Error::invalid(format!(
                "grid of {} points narrower than kernel support of {} points",
                self.len(),
                2 * k + 1
            )));
        }
        let mut w: Vec<f64> = (0..=2 * k)
            .map(|j| normal::pdf((j as f64 - k as f64) * self.h / t))
            .collect();
        let total: f64 = crate::numerics::compensated_sum(w.iter().copied());
        w.iter_mut().for_each(|x| *x /= total);
        let out: Vec<f64> = (k..self.len() - k)
            .map(|i| {
                crate::numerics::compensated_sum(
                    w.iter().enumerate().map(|(j, &wj)| wj * self.values[i + j - k]),
                )
            })
            .collect();
        Self::new(self.x(k), self.h, out)
    }
}

/// `c_{r,p} = ∫|z|^{r−j}|φ^{(p−j)}(z)|dz` for integer `p > r`, `j < r ≤ j+1`.
fn integer_constant(r: f64, p: usize) -> f64 {
    if (p as f64 - r).abs() < 1e-12 {
        return 1.0;
    }
    let j = super::zolotarev::derivative_order(r);
    let m = p - j;
    let e = r - j as f64;
    let f = |z: f64| z.powf(e) * (normal::hermite_he(m, z) * normal::pdf(z)).abs();
    // |He_m| has kinks at the Hermite roots; bisect around them adaptively
    let breaks = hermite_roots(m);
    2.0 * quad::integrate_with_breaks(f, 0.0, f64::INFINITY, &breaks, QuadConfig::with_abs_tol(1e-13))
        .value
}

fn hermite_roots(m: usize) -> Vec<f64> {
    // positive roots of He_m located by sign changes on a fine grid
    let mut roots = Vec::new();
    let n = 4000;
    let hi = 2.0 * (m as f64).sqrt() + 2.0;
    let mut prev = normal::hermite_he(m, 0.0);
    for i in 1..=n {
        let x = hi * i as f64 / n as f64;
        let cur = normal::hermite_he(m, x);
        if prev == 0.0 {
            roots.push(hi * (i - 1) as f64 / n as f64);
        } else if prev * cur < 0.0 {
            let (mut a, mut b) = (hi * (i - 1) as f64 / n as f64, x);
            for _ in 0..80 {
                let c = 0.5 * (a + b);
                if normal::hermite_he(m, a) * normal::hermite_he(m, c) <= 0.0 {
                    b = c;
                } else {
                    a = c;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
    }
    roots
}

/// Constant of the smoothing inequality
/// `|f * φ_t|_{Λ_p} ≤ c_{r,p} t^{r−p} |f|_{Λ_r}`.
pub fn smoothing_constant(r: f64, p: f64) -> Result<f64> {
    if !(r > 0.0 && p >= r) {
        return Err(Error::invalid(format!("need 0 < r ≤ p, got r={r}, p={p}")));
    }
    if p == r {
        return Ok(1.0);
    }
    let j = super::zolotarev::derivative_order(r);
    let is_int = |x: f64| x.fract() == 0.0;
    if p <= (j + 1) as f64 {
        if is_int(p) {
            return Ok(integer_constant(r, p as usize));
        }
        let c = integer_constant(r, j + 1);
        return Ok(c.powf((p - r) / ((j + 1) as f64 - r)));
    }
    if is_int(p) {
        return Ok(integer_constant(r, p as usize));
    }
    let i = p.floor() as usize;
    let ci = integer_constant(r, i);
    let ci1 = integer_constant(r, i + 1);
    Ok((2.0 * ci).powf(1.0 - p + i as f64) * ci1.powf(p - i as f64))
}

/// Outcome of one numerical check of the smoothing inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub ok: bool,
}

pub const SMOOTHING_SLACK: f64 = 1e-3;

pub fn smoothing_lemma_check(f: &GridFunction, r: f64, p: f64, t: f64) -> Result<SmoothingCheck> {
    let constant = smoothing_constant(r, p)?;
    let smooth = f.gaussian_smooth(t)?;
    let lhs = smooth.lambda_seminorm(p)?;
    let rhs = constant * t.powf(r - p) * f.lambda_seminorm(r)?;
    Ok(SmoothingCheck {
        lhs,
        rhs,
        constant,
        ok: lhs <= rhs * (1.0 + SMOOTHING_SLACK),
    })
}

/// Test function of a [`SmoothingCase`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingProfile {
    /// `|x|^r`.
    AbsPower,
    /// `sin(1.3x) + ½cos(0.4x)`.
    Trigonometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingCase {
    pub r: f64,
    pub p: f64,
    pub t: f64,
    pub profile: SmoothingProfile,
}

impl SmoothingCase {
    pub fn function(&self) -> Result<GridFunction> {
        let r = self.r;
        match self.profile {
            SmoothingProfile::AbsPower => GridFunction::sample(|x| x.abs().powf(r), -16.0, 16.0, (1 << 14) + 1),
            SmoothingProfile::Trigonometric => {
                GridFunction::sample(|x| (1.3 * x).sin() + 0.5 * (0.4 * x).cos(), -16.0, 16.0, (1 << 14) + 1)
            }
        }
    }

    pub fn check(&self) -> Result<SmoothingCheck> {
        smoothing_lemma_check(&self.function()?, self.r, self.p, self.t)
    }
}

/// The standard 50 cases: `r ∈ {½, 1, 3/2, 2, 5/2}`; the twenty `p = r`
/// cases (constant 1) at `t ∈ {½, 1}`, and thirty with `p ∈ {r + ½, r + 1}`.
pub fn smoothing_suite() -> Vec<SmoothingCase> {
    use SmoothingProfile::*;
    let mut out = Vec::with_capacity(50);
    for r in [0.5, 1.0, 1.5, 2.0, 2.5] {
        for profile in [AbsPower, Trigonometric] {
            for t in [0.5, 1.0] {
                out.push(SmoothingCase { r, p: r, t, profile });
            }
        }
        for p in [r + 0.5, r + 1.0] {
            for (profile, t) in [(AbsPower, 1.0), (Trigonometric, 0.5), (Trigonometric, 1.0)] {
                out.push(SmoothingCase { r, p, t, profile });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seminorm_examples() {
        let g = GridFunction::sample(|x| x, -2.0, 2.0, 401).unwrap();
        assert!((g.lambda_seminorm(1.0).unwrap() - 1.0).abs() < 1e-12);
        let g = GridFunction::sample(|x| 0.5 * x * x, -2.0, 2.0, 401).unwrap();
        assert!((g.lambda_seminorm(2.0).unwrap() - 1.0).abs() < 1e-9);
        let g = GridFunction::sample(f64::abs, -2.0, 2.0, 401).unwrap();
        assert!((g.lambda_seminorm(1.0).unwrap() - 1.0).abs() < 1e-12);
        // √|x| is ½-Hölder with constant 1, attained on pairs (0, y)
        let g = GridFunction::sample(|x: f64| x.abs().sqrt(), -1.0, 1.0, 201).unwrap();
        assert!((g.lambda_seminorm(0.5).unwrap() - 1.0).abs() < 1e-9);
        assert!(GridFunction::sample(|x| x, 0.0, 1.0, 3).unwrap().lambda_seminorm(1.5).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let g = GridFunction::sample(|x| x * x, -8.0, 8.0, 1601).unwrap();
        let s = g.gaussian_smooth(0.5).unwrap();
        for i in 0..s.len() {
            let x = s.x(i);
            assert!((s.values[i] - (x * x + 0.25)).abs() < 1e-10);
        }
        let g = GridFunction::sample(|x| x, -8.0, 8.0, 1601).unwrap();
        let s = g.gaussian_smooth(1.0).unwrap();
        assert!(s.values.iter().enumerate().all(|(i, v)| (v - s.x(i)).abs() < 1e-12));
        assert!(g.gaussian_smooth(10.0).is_err());
    }

    #[test]
    fn integer_constants() {
        // c_{1,2} = ∫|z||z² − 1|φ(z)dz = 8φ(1) − 2φ(0)
        let c = smoothing_constant(1.0, 2.0).unwrap();
        assert!((c - (8.0 * normal::pdf(1.0) - 2.0 * normal::pdf(0.0))).abs() < 1e-12);
        // c_{1/2,1} = ∫|z|^{1/2}|zφ(z)|dz = E|Z|^{3/2}
        let c = smoothing_constant(0.5, 1.0).unwrap();
        assert!((c - normal::abs_moment(1.5)).abs() < 1e-12);
        // c_{2,3} = ∫|z||z² − 1|φ(z)dz = 8φ(1) − 2φ(0)
        let c = smoothing_constant(2.0, 3.0).unwrap();
        assert!((c - (8.0 * normal::pdf(1.0) - 2.0 * normal::pdf(0.0))).abs() < 1e-12);
        assert_eq!(smoothing_constant(1.5, 1.5).unwrap(), 1.0);
    }

    #[test]
    fn abs_value_smoothing_holds() {
        let f = GridFunction::sample(f64::abs, -16.0, 16.0, (1 << 14) + 1).unwrap();
        let c = smoothing_lemma_check(&f, 1.0, 3.0, 1.0).unwrap();
        assert!(c.ok, "{c:?}");
        // |(f*φ)'''| = 2|φ'| peaks at 2φ(1)
        assert!((c.lhs - 2.0 * normal::pdf(1.0)).abs() < 1e-5, "{c:?}");
    }
}
