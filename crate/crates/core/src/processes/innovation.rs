use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::numerics::normal;
use crate::rng::open_unit;
use crate::{Error, Result};

/// Centred, unit-variance innovation laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationLaw {
    Gaussian,
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// Symmetric Lomax: `P(|ε| > x) = (1 + x/s)^{−q}`, `s` fixed by unit
    /// variance. Moments of order `< q` are finite. `None` resolves to
    /// `p + 0.5` when the process is prepared.
    SymmetricPareto {
        #[serde(default)]
        tail_index: Option<f64>,
    },
}

impl InnovationLaw {
    /// Replaces an unset Pareto tail index by `p + 0.5`.
    pub fn resolved(self, p: f64) -> Self {
        match self {
            InnovationLaw::SymmetricPareto { tail_index: None } => InnovationLaw::SymmetricPareto {
                tail_index: Some(p + 0.5),
            },
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let InnovationLaw::SymmetricPareto { tail_index: Some(q) } = self {
            if !(*q > 2.0 && q.is_finite()) {
                return Err(Error::invariant(
                    "finite variance",
                    format!("Pareto tail index must exceed 2, got {q}"),
                ));
            }
        }
        Ok(())
    }

    fn pareto_q(&self) -> f64 {
        match self {
            InnovationLaw::SymmetricPareto { tail_index } => tail_index.unwrap_or(3.0),
            _ => f64::NAN,
        }
    }

    fn pareto_scale(q: f64) -> f64 {
        ((q - 1.0) * (q - 2.0) / 2.0).sqrt()
    }

    pub fn variance(&self) -> f64 {
        1.0
    }

    /// `E|ε|^r`; infinite when the moment does not exist.
    pub fn abs_moment(&self, r: f64) -> f64 {
        match self {
            InnovationLaw::Gaussian => normal::abs_moment(r),
            InnovationLaw::Rademacher => 1.0,
            InnovationLaw::Uniform => 3f64.sqrt().powf(r) / (r + 1.0),
            InnovationLaw::SymmetricPareto { .. } => {
                let q = self.pareto_q();
                if r >= q {
                    return f64::INFINITY;
                }
                // E(s(U^{−1/q} − 1))^r = s^r q B(r + 1, q − r)
                let s = Self::pareto_scale(q);
                s.powf(r) * q * (ln_gamma(r + 1.0) + ln_gamma(q - r) - ln_gamma(q + 1.0)).exp()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InnovationLaw::Gaussian => StandardNormal.sample(rng),
            InnovationLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            InnovationLaw::Uniform => 3f64.sqrt() * (2.0 * open_unit(rng) - 1.0),
            InnovationLaw::SymmetricPareto { .. } => {
                let m = self.tail_quantile(open_unit(rng));
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }
        }
    }

    /// Quantile function of `|ε|`: `inf{x : P(|ε| > x) ≤ u}`.
    pub fn tail_quantile(&self, u: f64) -> f64 {
        match self {
            InnovationLaw::Gaussian => normal::upper_quantile(0.5 * u).max(0.0),
            InnovationLaw::Rademacher => {
                if u < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            InnovationLaw::Uniform => 3f64.sqrt() * (1.0 - u).max(0.0),
            InnovationLaw::SymmetricPareto { .. } => {
                let q = self.pareto_q();
                Self::pareto_scale(q) * (u.powf(-1.0 / q) - 1.0)
            }
        }
    }

    /// Quantile of `ε` itself.
    pub fn quantile(&self, u: f64) -> f64 {
        if u < 0.5 {
            -self.tail_quantile(2.0 * u)
        } else {
            self.tail_quantile(2.0 * (1.0 - u))
        }
    }
}
