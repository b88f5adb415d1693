//! Replicated normalized partial sums `n^{-1/2} S_n` over a grid of `n`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::prepared::PreparedProcess;
use crate::numerics::mean_and_stderr;
use crate::{Error, Result};

/// Default guard on `M·max(n)` (process steps per grid point).
pub const DEFAULT_STEP_BUDGET: u64 = 4_000_000_000;
pub const CACHE_MAGIC: &[u8; 4] = b"CLTR";
pub const CACHE_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub seed: u64,
    pub n_grid: Vec<u64>,
    pub replicates: u64,
    /// `values[i][r] = n_i^{-1/2} S_{n_i}` of replicate `r`, drawn from the
    /// streams keyed by `(seed, r, n_i)`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub n: u64,
    pub mean: f64,
    pub stderr: f64,
}

/// Generates `M` replicates of `n^{-1/2} S_n` for each `n` of the grid.
pub fn partial_sums_batch(
    process: &PreparedProcess,
    n_grid: &[u64],
    replicates: u64,
    seed: u64,
    step_budget: u64,
) -> Result<TrajectoryBatch> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return Err(Error::invalid("n_grid must be a non-empty increasing list of positive integers"));
    }
    if replicates < 100 {
        return Err(Error::invalid(format!("M = {replicates} < 100 replicates")));
    }
    let max_n = *n_grid.last().unwrap();
    let steps = replicates.saturating_mul(max_n);
    if steps > step_budget {
        return Err(Error::Budget(format!(
            "M·max(n) = {replicates}·{max_n} = {steps} exceeds the budget {step_budget}"
        )));
    }
    let values = n_grid
        .iter()
        .map(|&n| {
            let v = process.normalized_sums(n as usize, replicates, seed);
            if let Some(bad) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::invariant("finite values", format!("replicate {bad} at n = {n}")));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBatch { seed, n_grid: n_grid.to_vec(), replicates, values })
}

impl TrajectoryBatch {
    pub fn summary(&self) -> Vec<GridSummary> {
        self.n_grid
            .iter()
            .zip(&self.values)
            .map(|(&n, v)| {
                let (mean, stderr) = mean_and_stderr(v);
                GridSummary { n, mean, stderr }
            })
            .collect()
    }

    /// Regenerates one value and compares bit for bit.
    pub fn replay_matches(&self, process: &PreparedProcess, grid_index: usize, replicate: u64) -> bool {
        let n = self.n_grid[grid_index];
        let v = process.sum(n as usize, self.seed, replicate) / (n as f64).sqrt();
        v.to_bits() == self.values[grid_index][replicate as usize].to_bits()
    }

    /// CSV with header `n,replicate,value`; values in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,replicate,value")?;
        for (&n, vals) in self.n_grid.iter().zip(&self.values) {
            for (r, v) in vals.iter().enumerate() {
                writeln!(w, "{n},{r},{v:?}")?;
            }
        }
        Ok(())
    }

    /// `"CLTR"`, version `u16`, then little-endian seed `u64`, grid length
    /// `u32`, `M` as `u64`, the grid as `u64`s and the values as `f64`s.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.n_grid.len() as u32).to_le_bytes())?;
        w.write_all(&self.replicates.to_le_bytes())?;
        for n in &self.n_grid {
            w.write_all(&n.to_le_bytes())?;
        }
        for vals in &self.values {
            for v in vals {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Format("missing CLTR magic bytes".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != CACHE_VERSION {
            return Err(Error::Format(format!("unsupported cache version {version}")));
        }
        let mut b8 = [0u8; 8];
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        r.read_exact(&mut b4)?;
        let count = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let replicates = u64::from_le_bytes(b8);
        let mut n_grid = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            n_grid.push(u64::from_le_bytes(b8));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let mut vals = Vec::with_capacity(replicates as usize);
            for _ in 0..replicates {
                r.read_exact(&mut b8)?;
                vals.push(f64::from_le_bytes(b8));
            }
            values.push(vals);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes in cache", rest.len())));
        }
        Ok(Self { seed, n_grid, replicates, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::innovation::InnovationLaw;
    use crate::processes::spec::*;

    fn iid() -> PreparedProcess {
        PreparedProcess::new(&ProcessSpec {
            family: ProcessFamily::IidBaseline(IidSpec { law: InnovationLaw::Gaussian }),
            seed: 5,
            p_moment: 3.0,
        })
        .unwrap()
    }

    #[test]
    fn binary_round_trip_and_replay() {
        let p = iid();
        let b = partial_sums_batch(&p, &[1, 4, 16], 100, 5, DEFAULT_STEP_BUDGET).unwrap();
        let mut buf = Vec::new();
        b.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CLTR");
        assert_eq!(TrajectoryBatch::read_binary(&buf[..]).unwrap(), b);
        assert!(b.replay_matches(&p, 2, 37));
        let mut csv = Vec::new();
        b.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("n,replicate,value\n1,0,"));
    }

    #[test]
    fn n_one_gives_single_draws() {
        let p = iid();
        let b = partial_sums_batch(&p, &[1], 100, 5, DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(b.values[0][3], p.path(1, 5, 3)[0]);
    }

    #[test]
    fn budget_guard() {
        let p = iid();
        let err = partial_sums_batch(&p, &[1 << 20], 1000, 5, 1 << 20).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
    }
}
