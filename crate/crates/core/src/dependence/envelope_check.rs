//! Contraction of the envelope norm under conditional expectation, checked
//! on `X = g(Y₀, Y₁)` and `E(X | Y₀)` for a stationary finite chain.

use serde::{Deserialize, Serialize};

use crate::metrics::TailQuantile;
use crate::processes::FiniteKernel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    /// `‖E(X | Y₀)‖_{1,Φ,p}`.
    pub lhs: f64,
    /// `‖X‖_{1,Φ,p}`.
    pub rhs: f64,
    pub ok: bool,
}

/// Both norms come from the exact finite laws: `h(s) = Σ_t K(s,t) g(s,t)`
/// under `π`, and `g(s,t)` under `π(s)K(s,t)`.
pub fn envelope_contraction_check<G: Fn(usize, usize) -> f64>(
    kernel: &FiniteKernel,
    g: G,
    p: f64,
) -> Result<EnvelopeCheck> {
    let pi = kernel.stationary();
    let mut cond = Vec::with_capacity(kernel.len());
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for s in 0..kernel.len() {
        let mut h = 0.0;
        for &(t, k) in kernel.row(s) {
            let v = g(s, t);
            if !v.is_finite() {
                return Err(Error::invalid(format!("g({s}, {t}) is not finite")));
            }
            h += k * v;
            values.push(v);
            weights.push(pi[s] * k);
        }
        cond.push(h);
    }
    let lhs = TailQuantile::from_atoms(&cond, pi)?.envelope_norm_exact(p)?;
    let rhs = TailQuantile::from_atoms(&values, &weights)?.envelope_norm_exact(p)?;
    Ok(EnvelopeCheck { lhs, rhs, ok: lhs <= rhs * (1.0 + 1e-9) })
}
