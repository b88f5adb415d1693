//! The Davydov birth-and-return chain on `ℤ`: from `n ≠ 0` it moves one step
//! away from the origin with probability `a_|n|` and jumps to 0 otherwise;
//! from 0 it moves to ±1 with probability 1/2 each.
//!
//! The state space is truncated to `[−N, N]`, with `±N` sent to 0 with
//! probability one. The stationary law satisfies the product recursion
//! `π(±n) = π(0)·½·Π_{k<n} a_k`, which is the direct solve of `πK = π` for
//! this sparsity pattern.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{FiniteKernel, MarkovOperator};
use super::spec::{ARule, Functional};
use crate::rng::open_unit;
use crate::{Error, Result};

/// `a_i` of the polynomial-return schedule.
///
/// Below the first index `i₀ ≥ 2` where the formula reaches 1/2 the value is
/// 1/2; `i = 1` always gives 1/2 because `log 1 = 0`.
pub fn davydov_schedule(p: f64, eps: f64, i: u64) -> f64 {
    if i < schedule_start(p, eps) {
        return 0.5;
    }
    raw_schedule(p, eps, i)
}

fn raw_schedule(p: f64, eps: f64, i: u64) -> f64 {
    let x = i as f64;
    1.0 - p / (2.0 * x) * (1.0 + (1.0 + eps) / x.ln())
}

/// The first index `i₀ ≥ 2` with `a_i ≥ 1/2` for all `i ≥ i₀`.
pub fn schedule_start(p: f64, eps: f64) -> u64 {
    // the formula is increasing in i once positive, so the first hit suffices
    let mut i = 2u64;
    while raw_schedule(p, eps, i) < 0.5 {
        i += 1;
    }
    i
}

impl ARule {
    /// `a_n` for `n ≥ 1` (and 1/2 at 0).
    pub fn a(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.5;
        }
        match self {
            ARule::Schedule { p, eps } => davydov_schedule(*p, *eps, n),
            ARule::Constant { value } => *value,
            ARule::Explicit { values } => values[(n as usize - 1).min(values.len() - 1)],
        }
    }
}

/// Truncated Davydov chain with `O(N)` kernel actions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DavydovChain {
    n_max: usize,
    /// `a_0, …, a_N` (`a_N` unused: the boundary returns to 0).
    a: Vec<f64>,
    /// Stationary law on indices `0..2N+1`, index `s + N` for state `s`.
    pi: Vec<f64>,
    #[serde(skip)]
    pi_cum: Vec<f64>,
    /// Estimated stationary mass the untruncated chain puts beyond `±N`.
    truncated_mass: f64,
    /// `Σ_{n=2}^{N} Π_{k=1}^{n−1} a_k`.
    harris_partial_sum: f64,
}

impl DavydovChain {
    pub fn new(rule: &ARule, n_max: usize) -> Result<Self> {
        rule.validate()?;
        if n_max < 4 {
            return Err(Error::invalid(format!("state cap {n_max} < 4")));
        }
        let a: Vec<f64> = (0..=n_max as u64).map(|n| rule.a(n)).collect();
        // prod[n] = Π_{k=1}^{n−1} a_k
        let mut prod = vec![1.0; n_max + 1];
        for n in 2..=n_max {
            prod[n] = prod[n - 1] * a[n - 1];
        }
        let side: f64 = crate::numerics::compensated_sum(prod[1..].iter().copied());
        let pi0 = 1.0 / (1.0 + side);
        let mut pi = vec![0.0; 2 * n_max + 1];
        pi[n_max] = pi0;
        for n in 1..=n_max {
            let v = pi0 * 0.5 * prod[n];
            pi[n_max + n] = v;
            pi[n_max - n] = v;
        }
        let harris_partial_sum: f64 = prod[2..].iter().sum();
        // local decay exponent of the products near the cap
        let m = n_max / 2;
        let slope = -(prod[n_max].ln() - prod[m].ln()) / ((n_max as f64).ln() - (m as f64).ln());
        let tail = if slope > 1.0 {
            prod[n_max] * n_max as f64 / (slope - 1.0)
        } else {
            f64::INFINITY
        };
        if !tail.is_finite() || tail > side {
            log::warn!(
                "Davydov products look non-summable at N = {n_max} (local exponent {slope:.3}); \
                 Harris recurrence is not supported by the truncated range"
            );
        }
        let truncated_mass = tail / (1.0 + side + tail);
        let mut chain = Self {
            n_max,
            a,
            pi,
            pi_cum: Vec::new(),
            truncated_mass,
            harris_partial_sum,
        };
        chain.rebuild_cache();
        Ok(chain)
    }

    pub fn rebuild_cache(&mut self) {
        let mut acc = 0.0;
        self.pi_cum = self
            .pi
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn a(&self, n: usize) -> f64 {
        self.a[n]
    }

    pub fn index(&self, state: i64) -> usize {
        (state + self.n_max as i64) as usize
    }

    pub fn state(&self, index: usize) -> i64 {
        index as i64 - self.n_max as i64
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    pub fn harris_partial_sum(&self) -> f64 {
        self.harris_partial_sum
    }

    /// Transition row of state index `i` as `(index, probability)` pairs.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        let n = self.n_max;
        let s = self.state(i);
        let zero = n;
        if s == 0 {
            vec![(zero - 1, 0.5), (zero + 1, 0.5)]
        } else if s.unsigned_abs() as usize == n {
            vec![(zero, 1.0)]
        } else {
            let a = self.a[s.unsigned_abs() as usize];
            let out = if s > 0 { i + 1 } else { i - 1 };
            vec![(zero, 1.0 - a), (out, a)]
        }
    }

    /// The kernel as a generic finite kernel (stationary law from the
    /// product recursion, refined once).
    pub fn kernel(&self) -> Result<FiniteKernel> {
        let states: Vec<i64> = (0..self.len()).map(|i| self.state(i)).collect();
        let rows = (0..self.len()).map(|i| self.row(i)).collect();
        FiniteKernel::with_stationary(states, rows, self.pi.clone())
    }

    /// Next state index.
    pub fn step<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> usize {
        let u = open_unit(rng);
        let n = self.n_max;
        let s = self.state(i);
        if s == 0 {
            if u < 0.5 {
                n - 1
            } else {
                n + 1
            }
        } else if s.unsigned_abs() as usize == n {
            n
        } else if u < self.a[s.unsigned_abs() as usize] {
            if s > 0 {
                i + 1
            } else {
                i - 1
            }
        } else {
            n
        }
    }

    pub fn draw_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = open_unit(rng) * self.pi_cum[self.len() - 1];
        self.pi_cum.partition_point(|&c| c < u).min(self.len() - 1)
    }

    /// Values of `f₁`, `f₂` or a custom functional on the truncated states.
    pub fn functional(&self, kind: &Functional) -> Result<Vec<f64>> {
        let n = self.n_max;
        let mut f = vec![0.0; self.len()];
        match kind {
            Functional::F1 => {
                f[n + 1] = 1.0;
                f[n - 1] = -1.0;
            }
            Functional::F2 => {
                f[n] = 1.0;
                for m in 1..n {
                    let v = 1.0 - 1.0 / self.a[m];
                    f[n + m + 1] = v;
                    f[n - m - 1] = v;
                }
            }
            Functional::Custom { states, values } => {
                for (&s, &v) in states.iter().zip(values) {
                    if s.unsigned_abs() as usize > n {
                        return Err(Error::invalid(format!("custom functional state {s} beyond ±{n}")));
                    }
                    f[self.index(s)] = v;
                }
            }
        }
        if !matches!(kind, Functional::Custom { .. }) {
            let kf = self.apply(&f);
            let worst = (1..self.len() - 1).map(|i| kf[i].abs()).fold(0.0, f64::max);
            if worst > 1e-12 {
                return Err(Error::invariant("Kf = 0 on interior states", format!("residual {worst:e}")));
            }
        }
        Ok(f)
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n_max;
        let zero = f[n];
        (0..self.len())
            .map(|i| {
                if i == n {
                    0.5 * (f[n - 1] + f[n + 1])
                } else if i == 0 || i == 2 * n {
                    zero
                } else {
                    let a = self.a[i.abs_diff(n)];
                    let out = if i > n { f[i + 1] } else { f[i - 1] };
                    (1.0 - a) * zero + a * out
                }
            })
            .collect()
    }

    pub fn apply_left(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &m) in mu.iter().enumerate() {
            if m != 0.0 {
                for (j, p) in self.row(i) {
                    out[j] += m * p;
                }
            }
        }
        out
    }
}

impl MarkovOperator for DavydovChain {
    fn num_states(&self) -> usize {
        self.len()
    }
    fn state_labels(&self) -> Vec<i64> {
        (0..self.len()).map(|i| self.state(i)).collect()
    }
    fn stationary_law(&self) -> &[f64] {
        &self.pi
    }
    fn apply_right(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f)
    }
    fn apply_to_measure(&self, mu: &[f64]) -> Vec<f64> {
        self.apply_left(mu)
    }
}

/// Builds the truncated kernel; the generic entry point for exact linear
/// algebra on small caps.
pub fn davydov_kernel(rule: &ARule, n_max: usize) -> Result<FiniteKernel> {
    DavydovChain::new(rule, n_max)?.kernel()
}

/// `f₁` or `f₂` on the states of a truncated Davydov chain.
pub fn mds_functional(kind: &Functional, chain: &DavydovChain) -> Result<Vec<f64>> {
    chain.functional(kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::kernel::sample_chain;
    use crate::rng::{stream, StreamRole};

    #[test]
    fn schedule_values() {
        assert_eq!(schedule_start(2.5, 0.1), 5);
        assert_eq!(davydov_schedule(2.5, 0.1, 4), 0.5);
        let want = 1.0 - (1.25 / 100.0) * (1.0 + 1.1 / 100f64.ln());
        assert_eq!(davydov_schedule(2.5, 0.1, 100), want);
        assert!(davydov_schedule(2.5, 0.1, 1 << 40) > 1.0 - 1e-11);
    }

    #[test]
    fn half_chain_matches_power_iteration() {
        let rule = ARule::Constant { value: 0.5 };
        let chain = DavydovChain::new(&rule, 16).unwrap();
        let k = chain.kernel().unwrap();
        let mut mu = vec![0.0; k.len()];
        mu[0] = 1.0;
        // the chain is aperiodic through the boundary jump; 10⁴ steps suffice
        for _ in 0..10_000 {
            mu = k.apply_left(&mu);
        }
        let i0 = chain.index(0);
        assert!((mu[i0] - chain.stationary()[i0]).abs() < 1e-10);
        assert_eq!(k.row(i0).iter().find(|e| e.0 == i0), None);
    }

    #[test]
    fn functionals_are_harmonic() {
        let rule = ARule::Schedule { p: 2.5, eps: 0.1 };
        let chain = DavydovChain::new(&rule, 64).unwrap();
        let f1 = chain.functional(&Functional::F1).unwrap();
        let f2 = chain.functional(&Functional::F2).unwrap();
        assert_eq!(f1[chain.index(0)], 0.0);
        assert_eq!(f2[chain.index(0)], 1.0);
        let k = chain.kernel().unwrap();
        assert!(k.apply(&f1).iter().all(|v| v.abs() < 1e-15));
        let kf2 = k.apply(&f2);
        assert!(kf2[1..kf2.len() - 1].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn generic_and_structured_actions_agree() {
        let rule = ARule::Schedule { p: 2.2, eps: 0.3 };
        let chain = DavydovChain::new(&rule, 40).unwrap();
        let k = chain.kernel().unwrap();
        let f: Vec<f64> = (0..chain.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = chain.apply(&f);
        let b = k.apply(&f);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-15));
        assert!(k.stationary_residual() < 1e-15);
    }

    #[test]
    fn sampled_frequencies_match_stationary_law() {
        let rule = ARule::Constant { value: 0.6 };
        let chain = DavydovChain::new(&rule, 8).unwrap();
        let k = chain.kernel().unwrap();
        let n = 1_000_000;
        let path = sample_chain(&k, n, &mut stream(3, 0, n as u64, StreamRole::Transitions));
        // batch-means standard errors account for the serial dependence
        let batches = 1000;
        let len = path.len() / batches;
        for i in 0..k.len() {
            let p = k.stationary()[i];
            let freqs: Vec<f64> = path
                .chunks_exact(len)
                .map(|c| c.iter().filter(|&&s| s == i).count() as f64 / len as f64)
                .collect();
            let (mean, se) = crate::numerics::mean_and_stderr(&freqs);
            assert!((mean - p).abs() < 4.0 * se, "state {i}: {mean} vs {p} (se {se})");
        }
    }
}
