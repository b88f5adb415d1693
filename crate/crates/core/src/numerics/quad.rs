//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Every integral in the crate goes through [`integrate`]. Infinite endpoints
//! are mapped onto finite ones by rational substitutions; endpoint
//! singularities of integrable type are handled by bisection since the
//! Kronrod nodes never touch the endpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Default absolute tolerance for all quadratures.
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
/// Default hard cap on the number of panels.
pub const DEFAULT_MAX_PANELS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: 0.0,
            max_panels: DEFAULT_MAX_PANELS,
        }
    }
}

impl QuadConfig {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub panels: usize,
    pub converged: bool,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let mut error = ((kronrod - gauss) * h).abs();
    if !value.is_finite() || !error.is_finite() {
        error = f64::INFINITY;
    }
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]`; either bound may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: QuadConfig) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            abs_error: 0.0,
            panels: 0,
            converged: true,
        };
    }
    if a > b {
        let r = integrate(f, b, a, cfg);
        return QuadResult {
            value: -r.value,
            ..r
        };
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(&f, &[a, b], cfg),
        (true, false) => upper_tail(&f, a, cfg),
        (false, true) => lower_tail(&f, b, cfg),
        (false, false) => {
            let half = QuadConfig {
                abs_tol: 0.5 * cfg.abs_tol,
                ..cfg
            };
            combine(lower_tail(&f, 0.0, half), upper_tail(&f, 0.0, half))
        }
    }
}

/// `∫_a^∞ f` via `x = a + t/(1−t)`.
fn upper_tail<F: Fn(f64) -> f64>(f: &F, a: f64, cfg: QuadConfig) -> QuadResult {
    let g = |t: f64| {
        let s = 1.0 - t;
        f(a + t / s) / (s * s)
    };
    adaptive(&g, &[0.0, 1.0], cfg)
}

/// `∫_{−∞}^b f` via `x = b − (1−t)/t`.
fn lower_tail<F: Fn(f64) -> f64>(f: &F, b: f64, cfg: QuadConfig) -> QuadResult {
    let g = |t: f64| f(b - (1.0 - t) / t) / (t * t);
    adaptive(&g, &[0.0, 1.0], cfg)
}

/// Integrates over `[a, b]` split at the interior `breaks` (kinks, jumps).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: QuadConfig,
) -> QuadResult {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut edges = Vec::with_capacity(pts.len() + 2);
    edges.push(a);
    edges.extend(pts);
    edges.push(b);
    let pieces = edges.len() - 1;
    let piece_cfg = QuadConfig {
        abs_tol: cfg.abs_tol / pieces as f64,
        ..cfg
    };
    let mut total = QuadResult {
        value: 0.0,
        abs_error: 0.0,
        panels: 0,
        converged: true,
    };
    for w in edges.windows(2) {
        total = combine(total, integrate(&f, w[0], w[1], piece_cfg));
    }
    total
}

fn combine(x: QuadResult, y: QuadResult) -> QuadResult {
    QuadResult {
        value: x.value + y.value,
        abs_error: x.abs_error + y.abs_error,
        panels: x.panels + y.panels,
        converged: x.converged && y.converged,
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, edges: &[f64], cfg: QuadConfig) -> QuadResult {
    if edges.len() == 2 {
        // fast path: a single accepted panel needs no heap
        let p = gk15(f, edges[0], edges[1]);
        if p.error <= cfg.abs_tol.max(cfg.rel_tol * p.value.abs()) {
            return QuadResult {
                value: p.value,
                abs_error: p.error,
                panels: 1,
                converged: true,
            };
        }
    }
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in edges.windows(2) {
        let p = gk15(f, w[0], w[1]);
        value += p.value;
        error += p.error;
        heap.push(p);
    }
    let mut panels = heap.len();
    let mut converged = false;
    loop {
        let target = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= target {
            converged = true;
            break;
        }
        if panels >= cfg.max_panels {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel at machine resolution; its error is roundoff
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            error -= worst.error;
            if heap.iter().all(|p| p.error == 0.0) {
                break;
            }
            continue;
        }
        let left = gk15(f, worst.a, mid);
        let right = gk15(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        // floor roundoff noise at the resolution of the running sum
        let noise = 50.0 * f64::EPSILON * (left.value.abs() + right.value.abs());
        let mut left = left;
        let mut right = right;
        if left.error < noise {
            error -= left.error;
            left.error = 0.0;
        }
        if right.error < noise {
            error -= right.error;
            right.error = 0.0;
        }
        heap.push(left);
        heap.push(right);
        panels += 1;
        if error < 0.0 {
            error = heap.iter().map(|p| p.error).sum();
        }
    }
    // recompute exactly from panels to drop accumulated cancellation error
    let value_sum: f64 = heap.iter().map(|p| p.value).sum();
    let err_sum: f64 = heap.iter().map(|p| p.error).sum();
    QuadResult {
        value: value_sum,
        abs_error: err_sum,
        panels,
        converged: converged || err_sum <= cfg.abs_tol.max(cfg.rel_tol * value_sum.abs()),
    }
}
