//! Expanding interval maps: orbits, invariant densities and the
//! Perron–Frobenius duality.
//!
//! Floating-point orbits of expanding maps are pseudo-orbits: every step
//! multiplies the rounding error by the slope. Integer β-maps are therefore
//! sampled exactly from their base-β digit stream (the invariant measure is
//! Lebesgue and the digits are iid); non-integer β-maps iterate in
//! double-double arithmetic; Gauss-family maps iterate in `f64`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::spec::{MapKind, Observable};
use crate::numerics::{integrate_with_breaks, special::hurwitz_zeta, QuadConfig};
use crate::rng::open_unit;
use crate::{Error, Result};

/// Cells of the Ulam discretisation.
pub const ULAM_CELLS: usize = 1 << 12;
/// Fixed-point residual target of the power iterations.
pub const DENSITY_TOL: f64 = 1e-10;
const MAX_POWER_STEPS: usize = 100_000;
const CHEB_NODES: usize = 48;
const GAUSS_BRANCHES: usize = 4000;

/// An affine branch `y ↦ slope·y + offset` on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
    pub offset: f64,
}

impl Branch {
    fn image(&self) -> (f64, f64) {
        let a = self.slope * self.lo + self.offset;
        let b = self.slope * self.hi + self.offset;
        (a.min(b), a.max(b))
    }
}

/// Affine branches of β-maps and piecewise-affine maps.
pub fn branches(kind: &MapKind) -> Option<Vec<Branch>> {
    match kind {
        MapKind::Beta { beta } => {
            let full = beta.floor() as usize;
            let count = if beta.fract() == 0.0 { full } else { full + 1 };
            Some(
                (0..count)
                    .map(|k| Branch {
                        lo: k as f64 / beta,
                        hi: ((k + 1) as f64 / beta).min(1.0),
                        slope: *beta,
                        offset: -(k as f64),
                    })
                    .collect(),
            )
        }
        MapKind::PiecewiseAffine { breakpoints, slopes, offsets } => Some(
            (0..slopes.len())
                .map(|k| Branch {
                    lo: breakpoints[k],
                    hi: breakpoints[k + 1],
                    slope: slopes[k],
                    offset: offsets[k],
                })
                .collect(),
        ),
        MapKind::GaussFamily { .. } => None,
    }
}

/// One step of the map in `f64`.
pub fn apply_map(kind: &MapKind, x: f64) -> f64 {
    match kind {
        MapKind::Beta { beta } => {
            let y = beta * x;
            (y - y.floor()).clamp(0.0, 1.0 - f64::EPSILON / 2.0)
        }
        MapKind::PiecewiseAffine { breakpoints, slopes, offsets } => {
            let k = breakpoints[1..slopes.len()].partition_point(|&b| b <= x);
            (slopes[k] * x + offsets[k]).clamp(0.0, 1.0)
        }
        MapKind::GaussFamily { a } => {
            if x <= 0.0 {
                return 0.0;
            }
            let y = a * (1.0 / x - 1.0);
            (y - y.floor()).clamp(0.0, 1.0 - f64::EPSILON / 2.0)
        }
    }
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl DoubleDouble {
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// `frac(β·x)`.
    pub fn beta_step(self, beta: f64) -> Self {
        let p = beta * self.hi;
        let e = beta.mul_add(self.hi, -p) + beta * self.lo;
        let (s, t) = two_sum(p, e);
        let mut fl = s.floor();
        if s == fl && t < 0.0 {
            fl -= 1.0;
        }
        let (hi, lo) = two_sum(s - fl, t);
        if hi >= 1.0 {
            let (h2, l2) = two_sum(hi - 1.0, lo);
            return Self { hi: h2, lo: l2 };
        }
        if hi < 0.0 {
            return Self { hi: 0.0, lo: 0.0 };
        }
        Self { hi, lo }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `x₀, T x₀, …, T^{n−1} x₀` (double-double for β-maps).
pub fn iterate_map(kind: &MapKind, x0: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    match kind {
        MapKind::Beta { beta } => {
            let mut x = DoubleDouble::from_f64(x0);
            for _ in 0..n {
                out.push(x.value().min(1.0 - f64::EPSILON / 2.0));
                x = x.beta_step(*beta);
            }
        }
        _ => {
            let mut x = x0;
            for _ in 0..n {
                out.push(x);
                x = apply_map(kind, x);
            }
        }
    }
    out
}

/// Exact orbit of the rational `num/den` under `x ↦ bx mod 1`.
pub fn iterate_rational(b: u64, num: u64, den: u64, n: usize) -> Result<Vec<(u64, u64)>> {
    if den == 0 || num >= den || b < 2 {
        return Err(Error::invalid("need 0 ≤ num < den and integer base ≥ 2"));
    }
    let mut x = num as u128;
    let d = den as u128;
    Ok((0..n)
        .map(|_| {
            let out = (x as u64, den);
            x = (x * b as u128) % d;
            out
        })
        .collect())
}

/// Invariant density of a supported map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvariantDensity {
    /// Lebesgue measure (integer β-maps).
    Uniform,
    /// Piecewise constant on equal cells (Ulam fixed point).
    Cells { values: Vec<f64>, residual: f64 },
    /// Chebyshev interpolant on `[0, 1]` (transfer-operator fixed point).
    Chebyshev { nodes: Vec<f64>, values: Vec<f64>, residual: f64 },
}

fn cheb_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 0.5 * (1.0 + (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos()))
        .collect()
}

fn barycentric(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..n {
        let d = x - nodes[j];
        if d == 0.0 {
            return values[j];
        }
        let w = (if j % 2 == 0 { 1.0 } else { -1.0 })
            * (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).sin();
        num += w * values[j] / d;
        den += w / d;
    }
    num / den
}

impl InvariantDensity {
    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            InvariantDensity::Uniform => 1.0,
            InvariantDensity::Cells { values, .. } => {
                let m = values.len();
                values[((x * m as f64) as usize).min(m - 1)]
            }
            InvariantDensity::Chebyshev { nodes, values, .. } => barycentric(nodes, values, x),
        }
    }

    /// Breakpoints where the density may jump.
    pub fn breaks(&self) -> Vec<f64> {
        match self {
            InvariantDensity::Cells { values, .. } => {
                let m = values.len();
                (1..m).map(|i| i as f64 / m as f64).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn residual(&self) -> f64 {
        match self {
            InvariantDensity::Uniform => 0.0,
            InvariantDensity::Cells { residual, .. } | InvariantDensity::Chebyshev { residual, .. } => *residual,
        }
    }

    /// `∫ g dμ`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F, extra_breaks: &[f64]) -> f64 {
        match self {
            InvariantDensity::Cells { values, .. } => {
                // 5-point Gauss–Legendre per cell
                const X: [f64; 5] = [
                    0.0,
                    -0.538_469_310_105_683_1,
                    0.538_469_310_105_683_1,
                    -0.906_179_845_938_664,
                    0.906_179_845_938_664,
                ];
                const W: [f64; 5] = [
                    0.568_888_888_888_888_9,
                    0.478_628_670_499_366_5,
                    0.478_628_670_499_366_5,
                    0.236_926_885_056_189_1,
                    0.236_926_885_056_189_1,
                ];
                let m = values.len();
                let h = 1.0 / m as f64;
                let mut total = 0.0;
                for (i, &v) in values.iter().enumerate() {
                    let mid = (i as f64 + 0.5) * h;
                    let s: f64 = X.iter().zip(W).map(|(x, w)| w * g(mid + 0.5 * h * x)).sum();
                    total += v * 0.5 * h * s;
                }
                total
            }
            _ => {
                integrate_with_breaks(|x| g(x) * self.eval(x), 0.0, 1.0, extra_breaks, QuadConfig::with_abs_tol(1e-13))
                    .value
            }
        }
    }

    /// Tabulated c.d.f. on `2^12` equal steps.
    fn cdf_table(&self) -> Vec<f64> {
        let m = ULAM_CELLS;
        let mut table = Vec::with_capacity(m + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for i in 0..m {
            let (a, b) = (i as f64 / m as f64, (i + 1) as f64 / m as f64);
            acc += match self {
                InvariantDensity::Uniform => b - a,
                InvariantDensity::Cells { values, .. } => values[i * values.len() / m] * (b - a),
                InvariantDensity::Chebyshev { .. } => {
                    integrate_with_breaks(|x| self.eval(x), a, b, &[], QuadConfig::with_abs_tol(1e-15)).value
                }
            };
            table.push(acc);
        }
        let total = acc;
        table.iter_mut().for_each(|v| *v /= total);
        table
    }
}

/// Ulam fixed point for maps with affine branches.
fn ulam_density(branches: &[Branch], cells: usize) -> Result<InvariantDensity> {
    let m = cells as f64;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cells];
    for (i, row) in rows.iter_mut().enumerate() {
        let (c0, c1) = (i as f64 / m, (i + 1) as f64 / m);
        for b in branches {
            let (s0, s1) = (c0.max(b.lo), c1.min(b.hi));
            if s1 <= s0 {
                continue;
            }
            let frac = (s1 - s0) * m;
            let (y0, y1) = {
                let u = b.slope * s0 + b.offset;
                let v = b.slope * s1 + b.offset;
                (u.min(v).max(0.0), u.max(v).min(1.0))
            };
            let len = y1 - y0;
            if len <= 0.0 {
                continue;
            }
            let j0 = (y0 * m).floor() as usize;
            let j1 = ((y1 * m).ceil() as usize).min(cells);
            for j in j0..j1 {
                let (d0, d1) = (j as f64 / m, (j + 1) as f64 / m);
                let ov = y1.min(d1) - y0.max(d0);
                if ov > 0.0 {
                    row.push((j, frac * ov / len));
                }
            }
        }
    }
    let mut v = vec![1.0 / m; cells];
    for _ in 0..MAX_POWER_STEPS {
        let mut next = vec![0.0; cells];
        for (i, row) in rows.iter().enumerate() {
            for &(j, p) in row {
                next[j] += v[i] * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let change: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if change < DENSITY_TOL {
            return Ok(InvariantDensity::Cells {
                values: v.iter().map(|x| x * m).collect(),
                residual: change,
            });
        }
    }
    Err(Error::NonConvergence(format!("Ulam power iteration did not reach {DENSITY_TOL:e}")))
}

/// `(L f)(x) = Σ_k f(y_k)·a/(x+k+a)²` with `y_k = a/(x+k+a)`, truncated at
/// `GAUSS_BRANCHES` with a first-order Hurwitz-zeta tail.
fn gauss_transfer<F: Fn(f64) -> f64>(f: &F, a: f64, x: f64) -> f64 {
    let mut s = 0.0;
    for k in (0..GAUSS_BRANCHES).rev() {
        let d = x + k as f64 + a;
        s += f(a / d) * a / (d * d);
    }
    let f0 = f(0.0);
    let h = 1e-6;
    let df0 = (f(h) - f0) / h;
    let q = x + GAUSS_BRANCHES as f64 + a;
    s + a * f0 * hurwitz_zeta(2.0, q) + a * a * df0 * hurwitz_zeta(3.0, q)
}

/// Transfer operator of the Gauss family applied to `f`.
pub fn gauss_family_transfer<F: Fn(f64) -> f64>(f: F, a: f64, x: f64) -> f64 {
    gauss_transfer(&f, a, x)
}

fn gauss_density(a: f64) -> Result<InvariantDensity> {
    let nodes = cheb_nodes(CHEB_NODES);
    let mut values = vec![1.0; CHEB_NODES];
    for _ in 0..MAX_POWER_STEPS {
        let cur = values.clone();
        let f = |x: f64| barycentric(&nodes, &cur, x);
        let mut next: Vec<f64> = nodes.iter().map(|&x| gauss_transfer(&f, a, x)).collect();
        let mass = integrate_with_breaks(|x| barycentric(&nodes, &next, x), 0.0, 1.0, &[], QuadConfig::with_abs_tol(1e-15))
            .value;
        next.iter_mut().for_each(|v| *v /= mass);
        let change = next.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        values = next;
        if change < DENSITY_TOL {
            return Ok(InvariantDensity::Chebyshev { nodes, values, residual: change });
        }
    }
    Err(Error::NonConvergence("Gauss-family power iteration".into()))
}

/// The invariant density of a supported map.
pub fn invariant_density(kind: &MapKind) -> Result<InvariantDensity> {
    kind.validate()?;
    match kind {
        MapKind::Beta { beta } if beta.fract() == 0.0 => Ok(InvariantDensity::Uniform),
        MapKind::GaussFamily { a } => gauss_density(*a),
        _ => ulam_density(&branches(kind).expect("affine branches"), ULAM_CELLS),
    }
}

/// `|∫ (Kh) f dμ − ∫ h (f∘T) dμ|` by quadrature, where
/// `(Kh)(x) = f_μ(x)^{-1} Σ_{Ty=x} h(y) f_μ(y)/|T'(y)|`.
pub fn duality_residual(
    kind: &MapKind,
    density: &InvariantDensity,
    h: &dyn Fn(f64) -> f64,
    f: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let br = branches(kind).ok_or_else(|| Error::invalid("duality check needs affine branches"))?;
    let cfg = QuadConfig::with_abs_tol(1e-15);
    let mut lhs_breaks: Vec<f64> = br.iter().flat_map(|b| {
        let (u, v) = b.image();
        [u, v]
    }).collect();
    lhs_breaks.extend(density.breaks());
    let lhs = integrate_with_breaks(
        |x| {
            let kh: f64 = br
                .iter()
                .filter_map(|b| {
                    let (u, v) = b.image();
                    if x < u || x > v {
                        return None;
                    }
                    let y = (x - b.offset) / b.slope;
                    (y >= b.lo && y <= b.hi).then(|| h(y) * density.eval(y) / b.slope.abs())
                })
                .sum();
            kh * f(x)
        },
        0.0,
        1.0,
        &lhs_breaks,
        cfg,
    );
    let mut rhs_breaks: Vec<f64> = br.iter().flat_map(|b| [b.lo, b.hi]).collect();
    rhs_breaks.extend(density.breaks());
    let rhs = integrate_with_breaks(|y| h(y) * f(apply_map(kind, y)) * density.eval(y), 0.0, 1.0, &rhs_breaks, cfg);
    Ok((lhs.value - rhs.value).abs())
}

/// Sampling state of an expanding map started from its invariant law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedMap {
    pub kind: MapKind,
    pub observable: Observable,
    pub density: InvariantDensity,
    /// `μ(f)`.
    pub mean: f64,
    pub burn_in: u64,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl PreparedMap {
    pub fn new(kind: &MapKind, observable: &Observable, burn_in: u64) -> Result<Self> {
        let density = invariant_density(kind)?;
        let extra: Vec<f64> = match observable {
            Observable::Indicator { threshold } => vec![*threshold],
            _ => Vec::new(),
        };
        let mean = match (&density, observable.polynomial()) {
            (InvariantDensity::Uniform, Some(c)) => c.iter().enumerate().map(|(i, c)| c / (i + 1) as f64).sum(),
            _ => density.integrate(|x| observable.eval(x), &extra),
        };
        let cdf = density.cdf_table();
        Ok(Self {
            kind: kind.clone(),
            observable: observable.clone(),
            density,
            mean,
            burn_in,
            cdf,
        })
    }

    /// Integer slope of a β-map, which enables exact digit sampling.
    pub fn integer_beta(&self) -> Option<u64> {
        match self.kind {
            MapKind::Beta { beta } if beta.fract() == 0.0 && beta <= 1e6 => Some(beta as u64),
            _ => None,
        }
    }

    /// A draw from the invariant law (inverse c.d.f. on the tabulated grid).
    pub fn draw_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open_unit(rng);
        let m = self.cdf.len() - 1;
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, m);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        ((i - 1) as f64 + t) / m as f64
    }

    /// `S_n(f) = Σ_{k=1}^n (f(T^k x) − μ(f))`.
    pub fn sum<R: RngCore + ?Sized>(&self, n: usize, init: &mut R, steps: &mut R) -> f64 {
        let mut s = 0.0;
        self.for_each_point(n, init, steps, |x| s += self.observable.eval(x) - self.mean);
        s
    }

    /// `X_1, …, X_n` with `X_k = f(T^k x) − μ(f)`.
    pub fn path<R: RngCore + ?Sized>(&self, n: usize, init: &mut R, steps: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        self.for_each_point(n, init, steps, |x| out.push(self.observable.eval(x) - self.mean));
        out
    }

    fn for_each_point<R: RngCore + ?Sized, F: FnMut(f64)>(&self, n: usize, init: &mut R, steps: &mut R, mut visit: F) {
        match self.integer_beta() {
            Some(2) => {
                // x = 0.b₁b₂…; one step drops b₁ and appends a fresh bit
                let mut window = init.next_u64();
                let mut bits = 0u64;
                let mut left = 0u32;
                for _ in 0..n {
                    if left == 0 {
                        bits = steps.next_u64();
                        left = 64;
                    }
                    window = (window << 1) | (bits & 1);
                    bits >>= 1;
                    left -= 1;
                    visit((window >> 11) as f64 * (1.0 / (1u64 << 53) as f64));
                }
            }
            Some(b) => {
                let mut modulus: u128 = 1;
                while modulus <= (1u128 << 100) / b as u128 {
                    modulus *= b as u128;
                }
                let mut v: u128 = 0;
                let scale = modulus / b as u128;
                let mut m = 1u128;
                while m < modulus {
                    v = v * b as u128 + init.random_range(0..b) as u128;
                    m *= b as u128;
                }
                let inv = 1.0 / modulus as f64;
                for _ in 0..n {
                    v = (v % scale) * b as u128 + steps.random_range(0..b) as u128;
                    visit(((v as f64) * inv).min(1.0 - f64::EPSILON / 2.0));
                }
            }
            None => {
                let x0 = self.draw_initial(init);
                match self.kind {
                    MapKind::Beta { beta } => {
                        let mut x = DoubleDouble::from_f64(x0);
                        for _ in 0..self.burn_in {
                            x = x.beta_step(beta);
                        }
                        for _ in 0..n {
                            x = x.beta_step(beta);
                            visit(x.value().min(1.0 - f64::EPSILON / 2.0));
                        }
                    }
                    _ => {
                        let mut x = x0;
                        for _ in 0..self.burn_in {
                            x = apply_map(&self.kind, x);
                        }
                        for _ in 0..n {
                            x = apply_map(&self.kind, x);
                            visit(x);
                        }
                    }
                }
                let _ = steps;
            }
        }
    }

    /// `σ²` and the autocovariances `c_0, c_1, …` for polynomial observables
    /// of integer β-maps, by iterating the transfer operator on polynomial
    /// coefficients; `None` otherwise.
    pub fn exact_autocovariances(&self) -> Option<Vec<f64>> {
        let b = self.integer_beta()? as f64;
        let mut f = self.observable.polynomial()?;
        f[0] -= self.mean;
        let d = f.len();
        // binomials
        let mut binom = vec![vec![0.0; d]; d];
        for m in 0..d {
            binom[m][0] = 1.0;
            for i in 1..=m {
                binom[m][i] = binom[m - 1][i - 1] + if i < m { binom[m - 1][i] } else { 0.0 };
            }
        }
        let bi = b as usize;
        // (L g)(x) = b^{-1} Σ_k g((x+k)/b)
        let transfer = |g: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; d];
            for (m, &c) in g.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let scale = c / b.powi(m as i32 + 1);
                for i in 0..=m {
                    let ks: f64 = (0..bi).map(|k| (k as f64).powi((m - i) as i32)).sum();
                    out[i] += scale * binom[m][i] * ks;
                }
            }
            out
        };
        let inner = |p: &[f64], q: &[f64]| -> f64 {
            let mut s = 0.0;
            for (i, a) in p.iter().enumerate() {
                for (j, c) in q.iter().enumerate() {
                    s += a * c / (i + j + 1) as f64;
                }
            }
            s
        };
        let mut covs = vec![inner(&f, &f)];
        let mut g = f.clone();
        for _ in 0..4000 {
            g = transfer(&g);
            let c = inner(&g, &f);
            covs.push(c);
            if c.abs() < 1e-18 * covs[0].abs().max(1e-300) {
                break;
            }
        }
        Some(covs)
    }
}
