//! Serializable process descriptions. Every family validates its own
//! structural invariants before anything is sampled.

use serde::{Deserialize, Serialize};

use super::innovation::InnovationLaw;
use crate::{Error, Result};

fn default_state_cap() -> usize {
    4096
}
fn default_tail_tol() -> f64 {
    1e-10
}
fn default_one() -> f64 {
    1.0
}
fn default_burn_in() -> u64 {
    1000
}
fn default_centering_draws() -> u64 {
    10_000_000
}

/// How the Davydov transition probabilities `a_n` are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ARule {
    /// `a_i = 1 − (p/(2i))(1 + (1+ε)/log i)` from the first `i` where this is
    /// at least 1/2, and 1/2 before.
    Schedule { p: f64, eps: f64 },
    /// `a_n = value` for every `n ≥ 1`.
    Constant { value: f64 },
    /// `a_1, a_2, …` listed; the last value is repeated.
    Explicit { values: Vec<f64> },
}

/// Observable `f` with `X_i = f(Y_i) − π(f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Functional {
    F1,
    F2,
    /// Values at listed states, zero elsewhere.
    Custom { states: Vec<i64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DavydovSpec {
    pub a_rule: ARule,
    #[serde(default = "default_state_cap")]
    pub state_cap: usize,
    pub functional: Functional,
}

/// Coefficients `(a_j)_{j∈ℤ}` of `X_k = Σ_j a_j ε_{k−j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoeffRule {
    /// `a_{offset+i} = coeffs[i]`, zero elsewhere.
    Finite {
        #[serde(default)]
        offset: i64,
        coeffs: Vec<f64>,
    },
    /// `a_j = scale·ρ^j` for `j ≥ 0`.
    Geometric {
        rho: f64,
        #[serde(default = "default_one")]
        scale: f64,
    },
    /// `a_j = scale·(1+|j|)^{−decay}` for `j ≥ 0`, and for `j < 0` when
    /// two-sided.
    Polynomial {
        decay: f64,
        #[serde(default = "default_one")]
        scale: f64,
        #[serde(default)]
        two_sided: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub coefficients: CoeffRule,
    pub innovation: InnovationLaw,
    /// Bound on the discarded `ℓ²` tail `Σ_{|j|>T} a_j²`.
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

/// The map `h` applied to a linear process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HRule {
    Identity,
    /// `|x|^exponent`, `0 < exponent ≤ 1`.
    AbsPower { exponent: f64 },
    /// `x·|x|` (locally Lipschitz with growing constant).
    SignedSquare,
    Constant { value: f64 },
}

impl HRule {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            HRule::Identity => x,
            HRule::AbsPower { exponent } => x.abs().powf(exponent),
            HRule::SignedSquare => x * x.abs(),
            HRule::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionOfLinearSpec {
    pub base: LinearSpec,
    pub h: HRule,
    /// Declared modulus `w_h(t, M) ≤ C t^γ M^α`.
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub modulus_constant: f64,
    /// Monte Carlo draws for the centring constant when no quadrature is
    /// available.
    #[serde(default = "default_centering_draws")]
    pub centering_draws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapKind {
    /// `x ↦ βx − ⌊βx⌋`.
    Beta { beta: f64 },
    /// `x ↦ slopes[k]·x + offsets[k]` on `[breakpoints[k], breakpoints[k+1])`.
    PiecewiseAffine {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        offsets: Vec<f64>,
    },
    /// `x ↦ a(1/x − 1) − ⌊a(1/x − 1)⌋`; `a = 1` is the Gauss map.
    GaussFamily { a: f64 },
}

/// Observable on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    Identity,
    /// `Σ coeffs[i] x^i`.
    Polynomial { coeffs: Vec<f64> },
    /// `1{x ≤ threshold}`.
    Indicator { threshold: f64 },
}

impl Observable {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Observable::Identity => x,
            Observable::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Observable::Indicator { threshold } => {
                if x <= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Monomial coefficients when the observable is polynomial.
    pub fn polynomial(&self) -> Option<Vec<f64>> {
        match self {
            Observable::Identity => Some(vec![0.0, 1.0]),
            Observable::Polynomial { coeffs } => Some(coeffs.clone()),
            Observable::Indicator { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub map: MapKind,
    pub observable: Observable,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidSpec {
    pub law: InnovationLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProcessFamily {
    DavydovChain(DavydovSpec),
    LinearProcess(LinearSpec),
    FunctionOfLinear(FunctionOfLinearSpec),
    ExpandingMap(MapSpec),
    IidBaseline(IidSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub family: ProcessFamily,
    pub seed: u64,
    /// Moment order `p ∈ (2, 3]`.
    pub p_moment: f64,
}

fn check(cond: bool, invariant: &'static str, detail: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invariant(invariant, detail.into()))
    }
}

impl ARule {
    pub fn validate(&self) -> Result<()> {
        match self {
            ARule::Schedule { p, eps } => {
                check(*p > 2.0 && *p <= 3.0, "p in (2, 3]", format!("schedule p = {p}"))?;
                check(*eps > 0.0 && eps.is_finite(), "eps > 0", format!("schedule eps = {eps}"))
            }
            ARule::Constant { value } => check_a(*value, 1),
            ARule::Explicit { values } => {
                check(!values.is_empty(), "1/2 ≤ a_n < 1", "explicit schedule is empty")?;
                values.iter().enumerate().try_for_each(|(i, &a)| check_a(a, i + 1))
            }
        }
    }
}

fn check_a(a: f64, n: usize) -> Result<()> {
    check(
        (0.5..1.0).contains(&a),
        "1/2 ≤ a_n < 1",
        format!("a_{n} = {a}"),
    )
}

impl CoeffRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            CoeffRule::Finite { coeffs, .. } => {
                check(!coeffs.is_empty(), "square-summable coefficients", "no coefficients")?;
                check(
                    coeffs.iter().all(|c| c.is_finite()),
                    "square-summable coefficients",
                    "non-finite coefficient",
                )
            }
            CoeffRule::Geometric { rho, scale } => {
                check(rho.abs() < 1.0, "square-summable coefficients", format!("|rho| = {} ≥ 1", rho.abs()))?;
                check(scale.is_finite(), "square-summable coefficients", "non-finite scale")
            }
            CoeffRule::Polynomial { decay, scale, .. } => {
                check(*decay > 0.5, "square-summable coefficients", format!("decay {decay} ≤ 1/2"))?;
                check(scale.is_finite(), "square-summable coefficients", "non-finite scale")
            }
        }
    }
}

impl LinearSpec {
    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        self.innovation.validate()?;
        check(
            self.tail_tol > 0.0 && self.tail_tol < 1.0,
            "truncation tolerance",
            format!("tail_tol = {}", self.tail_tol),
        )
    }
}

impl MapKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            MapKind::Beta { beta } => check(*beta > 1.0 && beta.is_finite(), "expanding slopes", format!("beta = {beta}")),
            MapKind::GaussFamily { a } => check(*a > 0.0 && a.is_finite(), "a > 0", format!("a = {a}")),
            MapKind::PiecewiseAffine { breakpoints, slopes, offsets } => {
                let k = slopes.len();
                check(k >= 1 && breakpoints.len() == k + 1 && offsets.len() == k, "piecewise shape",
                    "need k slopes, k offsets and k+1 breakpoints")?;
                check(breakpoints[0] == 0.0 && breakpoints[k] == 1.0, "piecewise shape", "breakpoints must span [0, 1]")?;
                for i in 0..k {
                    let (lo, hi) = (breakpoints[i], breakpoints[i + 1]);
                    check(hi > lo, "piecewise shape", "breakpoints must increase")?;
                    check(slopes[i].abs() > 1.0, "expanding slopes", format!("|a_{}| = {} ≤ 1", i + 1, slopes[i].abs()))?;
                    let (y0, y1) = (slopes[i] * lo + offsets[i], slopes[i] * hi + offsets[i]);
                    let tol = 1e-12;
                    check(
                        y0.min(y1) >= -tol && y0.max(y1) <= 1.0 + tol,
                        "map into [0, 1]",
                        format!("piece {} maps outside [0, 1]", i + 1),
                    )?;
                }
                Ok(())
            }
        }
    }
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        check(
            self.p_moment > 2.0 && self.p_moment <= 3.0,
            "p in (2, 3]",
            format!("p_moment = {}", self.p_moment),
        )?;
        match &self.family {
            ProcessFamily::DavydovChain(d) => {
                d.a_rule.validate()?;
                check(d.state_cap >= 4, "N_max ≥ 4", format!("state_cap = {}", d.state_cap))?;
                if let Functional::Custom { states, values } = &d.functional {
                    check(states.len() == values.len(), "custom functional", "states and values differ in length")?;
                }
                Ok(())
            }
            ProcessFamily::LinearProcess(l) => l.validate(),
            ProcessFamily::FunctionOfLinear(f) => {
                f.base.validate()?;
                check(f.gamma > 0.0 && f.gamma <= 1.0, "gamma in (0, 1]", format!("gamma = {}", f.gamma))?;
                check(f.alpha >= 0.0, "alpha ≥ 0", format!("alpha = {}", f.alpha))?;
                check(f.modulus_constant > 0.0, "C > 0", format!("modulus_constant = {}", f.modulus_constant))?;
                check(f.centering_draws >= 1000, "centering draws", format!("{} < 1000", f.centering_draws))
            }
            ProcessFamily::ExpandingMap(m) => m.map.validate(),
            ProcessFamily::IidBaseline(i) => i.law.validate(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            ProcessFamily::DavydovChain(_) => "davydov_chain",
            ProcessFamily::LinearProcess(_) => "linear_process",
            ProcessFamily::FunctionOfLinear(_) => "function_of_linear",
            ProcessFamily::ExpandingMap(_) => "expanding_map",
            ProcessFamily::IidBaseline(_) => "iid_baseline",
        }
    }
}
