//! Conditional moments of partial sums of a finite chain.

use crate::processes::MarkovOperator;
use crate::{Error, Result};

/// Largest `n` accepted by the moment recursions.
pub const MAX_MOMENT_STEPS: usize = 1 << 22;

/// Walks `n = 1, 2, …` keeping `u_n(s) = E(S_n | Y₀ = s)` and
/// `v_n(s) = E(S_n² | Y₀ = s)` for `S_n = Σ_{i=1}^n f(Y_i)`:
///
/// `u_n = K(f + u_{n−1})`, `v_n = K(f² + 2f·u_{n−1} + v_{n−1})`.
pub struct ConditionalMoments<'a, K: MarkovOperator + ?Sized> {
    op: &'a K,
    f: Vec<f64>,
    f2: Vec<f64>,
    n: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl<'a, K: MarkovOperator + ?Sized> ConditionalMoments<'a, K> {
    pub fn new(op: &'a K, f: &[f64]) -> Result<Self> {
        let s = op.num_states();
        if f.len() != s {
            return Err(Error::invalid(format!("f has {} entries for {s} states", f.len())));
        }
        Ok(Self {
            op,
            f: f.to_vec(),
            f2: f.iter().map(|x| x * x).collect(),
            n: 0,
            u: vec![0.0; s],
            v: vec![0.0; s],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn first(&self) -> &[f64] {
        &self.u
    }

    pub fn second(&self) -> &[f64] {
        &self.v
    }

    /// Advances to `n + 1`.
    pub fn advance(&mut self) -> Result<()> {
        if self.n >= MAX_MOMENT_STEPS {
            return Err(Error::Budget(format!("moment recursion beyond n = {MAX_MOMENT_STEPS}")));
        }
        let a: Vec<f64> = self.f.iter().zip(&self.u).map(|(f, u)| f + u).collect();
        let b: Vec<f64> = (0..self.f.len()).map(|i| self.f2[i] + 2.0 * self.f[i] * self.u[i] + self.v[i]).collect();
        self.u = self.op.apply_right(&a);
        self.v = self.op.apply_right(&b);
        self.n += 1;
        Ok(())
    }
}

/// `E(S_n² | Y₀ = s)` for every state.
pub fn conditional_second_moment<K: MarkovOperator + ?Sized>(op: &K, f: &[f64], n: usize) -> Result<Vec<f64>> {
    if n > MAX_MOMENT_STEPS {
        return Err(Error::Budget(format!("n = {n} beyond the moment cap {MAX_MOMENT_STEPS}")));
    }
    let mut m = ConditionalMoments::new(op, f)?;
    for _ in 0..n {
        m.advance()?;
    }
    Ok(m.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::FiniteKernel;

    #[test]
    fn single_step_and_zero() {
        let k = FiniteKernel::from_dense(vec![0, 1], &[0.3, 0.7, 0.6, 0.4]).unwrap();
        let f = [2.0, -1.0];
        let v = conditional_second_moment(&k, &f, 1).unwrap();
        assert!((v[0] - (0.3 * 4.0 + 0.7)).abs() < 1e-15);
        assert!((v[1] - (0.6 * 4.0 + 0.4)).abs() < 1e-15);
        assert!(conditional_second_moment(&k, &[0.0, 0.0], 5).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn matches_path_enumeration() {
        let k = FiniteKernel::from_dense(vec![0, 1, 2], &[0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 0.1, 0.1, 0.8]).unwrap();
        let f = [1.0, -2.0, 0.5];
        let d = k.dense();
        let n = 4;
        let v = conditional_second_moment(&k, &f, n).unwrap();
        for s0 in 0..3 {
            // all 3^n paths
            let mut total = 0.0;
            for code in 0..3usize.pow(n as u32) {
                let mut c = code;
                let mut prev = s0;
                let (mut prob, mut sum) = (1.0, 0.0);
                for _ in 0..n {
                    let next = c % 3;
                    c /= 3;
                    prob *= d[prev * 3 + next];
                    sum += f[next];
                    prev = next;
                }
                total += prob * sum * sum;
            }
            assert!((v[s0] - total).abs() < 1e-13);
        }
    }
}
