use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::open_unit;
use crate::{Error, Result};

/// Row-sum and stationarity tolerance.
pub const KERNEL_TOL: f64 = 1e-12;

/// The operations shared by finite kernels and structured chains whose
/// kernels are too large to store row by row.
pub trait MarkovOperator: Sync {
    fn num_states(&self) -> usize;
    /// Integer labels, index-aligned with every vector argument.
    fn state_labels(&self) -> Vec<i64>;
    fn stationary_law(&self) -> &[f64];
    /// `(Kf)(i)`.
    fn apply_right(&self, f: &[f64]) -> Vec<f64>;
    /// `(μK)(j)`.
    fn apply_to_measure(&self, mu: &[f64]) -> Vec<f64>;
}

/// A Markov kernel on finitely many integer-labelled states, with its
/// stationary law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteKernel {
    states: Vec<i64>,
    /// Sparse rows `(column, probability)`, columns increasing.
    rows: Vec<Vec<(usize, f64)>>,
    stationary: Vec<f64>,
    #[serde(skip)]
    row_cum: Vec<Vec<f64>>,
    #[serde(skip)]
    pi_cum: Vec<f64>,
}

impl FiniteKernel {
    /// Validates the rows and solves for the stationary law (dense solve
    /// followed by one power-iteration refinement).
    pub fn from_rows(states: Vec<i64>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut k = Self::unchecked(states, rows, Vec::new())?;
        k.stationary = k.solve_stationary()?;
        k.finish()
    }

    /// Uses a supplied stationary vector (after one refinement step).
    pub fn with_stationary(
        states: Vec<i64>,
        rows: Vec<Vec<(usize, f64)>>,
        stationary: Vec<f64>,
    ) -> Result<Self> {
        let k = Self::unchecked(states, rows, stationary)?;
        k.finish()
    }

    pub fn from_dense(states: Vec<i64>, matrix: &[f64]) -> Result<Self> {
        let n = states.len();
        if matrix.len() != n * n {
            return Err(Error::invalid("dense kernel must be square"));
        }
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| matrix[i * n + j] != 0.0)
                    .map(|j| (j, matrix[i * n + j]))
                    .collect()
            })
            .collect();
        Self::from_rows(states, rows)
    }

    fn unchecked(states: Vec<i64>, mut rows: Vec<Vec<(usize, f64)>>, stationary: Vec<f64>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::invalid("kernel needs at least one state"));
        }
        if rows.len() != n {
            return Err(Error::invalid(format!("{} states but {} rows", n, rows.len())));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut sum = 0.0;
            for &(j, p) in row.iter() {
                if j >= n {
                    return Err(Error::invalid(format!("row {i} points to missing state {j}")));
                }
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(Error::invariant(
                        "probability rows",
                        format!("K({}, {}) = {p}", states[i], states[j]),
                    ));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > KERNEL_TOL {
                return Err(Error::invariant(
                    "rows sum to 1",
                    format!("row of state {} sums to {sum:.17}", states[i]),
                ));
            }
        }
        Ok(Self {
            states,
            rows,
            stationary,
            row_cum: Vec::new(),
            pi_cum: Vec::new(),
        })
    }

    fn finish(mut self) -> Result<Self> {
        if !self.is_irreducible() {
            return Err(Error::invariant(
                "single communicating class",
                "kernel is not irreducible",
            ));
        }
        if self.stationary.len() != self.len() || self.stationary.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invariant("stationary law", "invalid stationary vector"));
        }
        // one power-iteration refinement
        let refined = self.apply_left(&self.stationary);
        let total: f64 = crate::numerics::compensated_sum(refined.iter().copied());
        self.stationary = refined.into_iter().map(|p| p / total).collect();
        let res = self.stationary_residual();
        if res > KERNEL_TOL {
            return Err(Error::Tolerance(format!("πK − π residual {res:e} exceeds {KERNEL_TOL:e}")));
        }
        self.rebuild_caches();
        Ok(self)
    }

    /// Recomputes sampling tables (after deserialization).
    pub fn rebuild_caches(&mut self) {
        self.row_cum = self
            .rows
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|&(_, p)| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut acc = 0.0;
        self.pi_cum = self
            .stationary
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[i64] {
        &self.states
    }

    pub fn index_of(&self, state: i64) -> Option<usize> {
        self.states.iter().position(|&s| s == state)
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// `(Kf)(i) = Σ_j K(i, j) f(j)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, p)| p * f[j]).sum())
            .collect()
    }

    /// `(μK)(j) = Σ_i μ(i) K(i, j)`.
    pub fn apply_left(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let m = mu[i];
            if m != 0.0 {
                for &(j, p) in row {
                    out[j] += m * p;
                }
            }
        }
        out
    }

    /// `max_j |(πK)(j) − π(j)|`.
    pub fn stationary_residual(&self) -> f64 {
        let pk = self.apply_left(&self.stationary);
        pk.iter()
            .zip(&self.stationary)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_s π(s) f(s)`.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        crate::numerics::compensated_sum(self.stationary.iter().zip(f).map(|(p, v)| p * v))
    }

    /// Dense row-major copy.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut m = vec![0.0; n * n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                m[i * n + j] = p;
            }
        }
        m
    }

    /// Dense `K^m`.
    pub fn dense_power(&self, m: usize) -> Vec<f64> {
        let n = self.len();
        let mut out = identity(n);
        for _ in 0..m {
            out = self.right_multiply_dense(&out);
        }
        out
    }

    /// `K · B` for a dense `B`.
    pub fn right_multiply_dense(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let cols = b.len() / n;
        let mut out = vec![0.0; n * cols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, p) in row {
                let src = &b[k * cols..(k + 1) * cols];
                let dst = &mut out[i * cols..(i + 1) * cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += p * s;
                }
            }
        }
        out
    }

    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        let reach = |forward: bool| {
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (i, row) in self.rows.iter().enumerate() {
                for &(j, p) in row {
                    if p > 0.0 {
                        if forward {
                            adj[i].push(j);
                        } else {
                            adj[j].push(i);
                        }
                    }
                }
            }
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for &j in &adj[i] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Solves `π(K − I) = 0, Σπ = 1` by Gaussian elimination with partial pivoting.
    fn solve_stationary(&self) -> Result<Vec<f64>> {
        let n = self.len();
        if n > 4096 {
            return Err(Error::Budget(format!("dense stationary solve on {n} states")));
        }
        // unknowns π; equations: columns of (K − I)ᵀ, last replaced by normalisation
        let mut a = vec![0.0; n * n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                a[j * n + i] += p;
            }
            a[i * n + i] -= 1.0;
        }
        let mut b = vec![0.0; n];
        for j in 0..n {
            a[(n - 1) * n + j] = 1.0;
        }
        b[n - 1] = 1.0;
        let x = solve_dense(&mut a, &mut b, n)?;
        Ok(x.into_iter().map(|v| v.max(0.0)).collect())
    }

    /// Next state by inverse-c.d.f. sampling from row `i`.
    pub fn step<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> usize {
        let u = open_unit(rng);
        let cum = &self.row_cum[i];
        let k = cum.partition_point(|&c| c < u).min(cum.len() - 1);
        self.rows[i][k].0
    }

    /// A draw from the stationary law.
    pub fn draw_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = open_unit(rng) * self.pi_cum[self.len() - 1];
        self.pi_cum.partition_point(|&c| c < u).min(self.len() - 1)
    }

    /// Replaces a row without re-validation; used to build corrupted
    /// kernels for negative tests.
    #[doc(hidden)]
    pub fn set_row_unchecked(&mut self, i: usize, row: Vec<(usize, f64)>) {
        self.rows[i] = row;
        self.rebuild_caches();
    }

    /// Re-runs the structural checks (row sums, irreducibility, stationarity).
    pub fn validate(&self) -> Result<()> {
        let k = Self::unchecked(self.states.clone(), self.rows.clone(), self.stationary.clone())?;
        if !k.is_irreducible() {
            return Err(Error::invariant("single communicating class", "kernel is not irreducible"));
        }
        let res = self.stationary_residual();
        if res > KERNEL_TOL {
            return Err(Error::invariant("πK = π", format!("residual {res:e}")));
        }
        Ok(())
    }
}

impl MarkovOperator for FiniteKernel {
    fn num_states(&self) -> usize {
        self.len()
    }
    fn state_labels(&self) -> Vec<i64> {
        self.states.clone()
    }
    fn stationary_law(&self) -> &[f64] {
        &self.stationary
    }
    fn apply_right(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f)
    }
    fn apply_to_measure(&self, mu: &[f64]) -> Vec<f64> {
        self.apply_left(mu)
    }
}

pub(crate) fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// Solves `A x = b` in place (row-major `A`).
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .unwrap();
        if a[piv * n + col].abs() < 1e-300 {
            return Err(Error::NonConvergence("singular linear system".into()));
        }
        if piv != col {
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= a[i * n + j] * x[j];
        }
        x[i] = s / a[i * n + i];
    }
    Ok(x)
}

/// A path of state indices `Y_0, …, Y_n` with `Y_0 ~ π`.
pub fn sample_chain<R: Rng + ?Sized>(kernel: &FiniteKernel, n: usize, rng: &mut R) -> Vec<usize> {
    let mut path = Vec::with_capacity(n + 1);
    let mut y = kernel.draw_stationary(rng);
    path.push(y);
    for _ in 0..n {
        y = kernel.step(y, rng);
        path.push(y);
    }
    path
}
