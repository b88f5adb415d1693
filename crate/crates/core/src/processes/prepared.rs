//! A validated process with every auxiliary object built once: kernels,
//! stationary laws, truncated coefficients, densities and centring constants.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::davydov::DavydovChain;
use super::innovation::InnovationLaw;
use super::linear::{batch_means_variance, FunctionOfLinear, TruncatedLinear};
use super::maps::PreparedMap;
use super::spec::{Functional, ProcessFamily, ProcessSpec};
use crate::rng::{stream, StreamRole};
use crate::Result;

/// Length of the single path behind batch-means variance estimates.
pub const BATCH_MEANS_PATH: usize = 1 << 22;
/// Lags summed when autocovariances come from kernel powers.
pub const MAX_COVARIANCE_LAGS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    /// Innovation variance, `A² Var ε`, or `π(f²)` for martingale differences.
    ClosedForm,
    /// Autocovariances from powers of a finite kernel.
    KernelPowers,
    /// Autocovariances from the transfer operator on polynomials.
    TransferOperator,
    /// Batch means over one long path.
    BatchMeans,
}

/// Long-run variance `σ² = Σ_k Cov(X_0, X_k)` with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRunVariance {
    pub sigma2: f64,
    /// Zero for exact methods.
    pub stderr: f64,
    pub method: VarianceMethod,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Prepared {
    DavydovChain {
        chain: DavydovChain,
        f: Vec<f64>,
        /// `π(f)`.
        mean: f64,
        /// `Kf = 0` on every truncated state.
        martingale: bool,
    },
    LinearProcess(TruncatedLinear),
    FunctionOfLinear(FunctionOfLinear),
    ExpandingMap(PreparedMap),
    IidBaseline(InnovationLaw),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreparedProcess {
    pub spec: ProcessSpec,
    pub process: Prepared,
    /// `c_0, c_1, …` when exactly available.
    autocov: Option<Vec<f64>>,
    variance: LongRunVariance,
}

fn davydov_autocovariances(chain: &DavydovChain, f: &[f64], mean: f64) -> Vec<f64> {
    let pi = chain.stationary();
    let centred: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let dot = |g: &[f64]| crate::numerics::compensated_sum(pi.iter().zip(&centred).zip(g).map(|((p, a), b)| p * a * b));
    let mut covs = vec![dot(&centred)];
    let mut g = centred.clone();
    let mut quiet = 0;
    for _ in 1..MAX_COVARIANCE_LAGS {
        g = chain.apply(&g);
        let c = dot(&g);
        covs.push(c);
        quiet = if c.abs() < 1e-15 * covs[0].abs() { quiet + 1 } else { 0 };
        if quiet >= 16 {
            break;
        }
    }
    covs
}

impl PreparedProcess {
    pub fn new(spec: &ProcessSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.p_moment;
        let (process, autocov, variance) = match &spec.family {
            ProcessFamily::DavydovChain(d) => {
                let chain = DavydovChain::new(&d.a_rule, d.state_cap)?;
                let f = chain.functional(&d.functional)?;
                let mean = crate::numerics::compensated_sum(chain.stationary().iter().zip(&f).map(|(p, v)| p * v));
                let kf = chain.apply(&f);
                let martingale = kf.iter().all(|v| v.abs() <= 1e-12) && !matches!(d.functional, Functional::Custom { .. });
                let (covs, method) = if martingale {
                    let c0 = crate::numerics::compensated_sum(
                        chain.stationary().iter().zip(&f).map(|(p, v)| p * (v - mean) * (v - mean)),
                    );
                    (vec![c0], VarianceMethod::ClosedForm)
                } else {
                    (davydov_autocovariances(&chain, &f, mean), VarianceMethod::KernelPowers)
                };
                let sigma2 = covs[0] + 2.0 * crate::numerics::compensated_sum(covs[1..].iter().copied());
                (
                    Prepared::DavydovChain { chain, f, mean, martingale },
                    Some(covs),
                    LongRunVariance { sigma2, stderr: 0.0, method },
                )
            }
            ProcessFamily::LinearProcess(l) => {
                let lin = TruncatedLinear::new(l, p)?;
                let v = LongRunVariance { sigma2: lin.sigma2(), stderr: 0.0, method: VarianceMethod::ClosedForm };
                (Prepared::LinearProcess(lin), None, v)
            }
            ProcessFamily::FunctionOfLinear(fl) => {
                let prepared = FunctionOfLinear::new(fl, p, spec.seed)?;
                let mut rng = stream(spec.seed, u64::MAX, BATCH_MEANS_PATH as u64, StreamRole::Synthetic);
                let path = prepared.sample_path(BATCH_MEANS_PATH, &mut rng);
                let (sigma2, stderr) = batch_means_variance(&path, 2048);
                (
                    Prepared::FunctionOfLinear(prepared),
                    None,
                    LongRunVariance { sigma2, stderr, method: VarianceMethod::BatchMeans },
                )
            }
            ProcessFamily::ExpandingMap(m) => {
                let map = PreparedMap::new(&m.map, &m.observable, m.burn_in)?;
                match map.exact_autocovariances() {
                    Some(covs) => {
                        let sigma2 = covs[0] + 2.0 * covs[1..].iter().sum::<f64>();
                        (
                            Prepared::ExpandingMap(map),
                            Some(covs),
                            LongRunVariance { sigma2, stderr: 0.0, method: VarianceMethod::TransferOperator },
                        )
                    }
                    None => {
                        let mut a = stream(spec.seed, u64::MAX, BATCH_MEANS_PATH as u64, StreamRole::Synthetic);
                        let mut b = stream(spec.seed, u64::MAX - 1, BATCH_MEANS_PATH as u64, StreamRole::Synthetic);
                        let path = map.path(BATCH_MEANS_PATH, &mut a, &mut b);
                        let (sigma2, stderr) = batch_means_variance(&path, 2048);
                        (
                            Prepared::ExpandingMap(map),
                            None,
                            LongRunVariance { sigma2, stderr, method: VarianceMethod::BatchMeans },
                        )
                    }
                }
            }
            ProcessFamily::IidBaseline(i) => {
                let law = i.law.resolved(p);
                let v = LongRunVariance { sigma2: law.variance(), stderr: 0.0, method: VarianceMethod::ClosedForm };
                (Prepared::IidBaseline(law), None, v)
            }
        };
        Ok(Self { spec: spec.clone(), process, autocov, variance })
    }

    pub fn long_run_variance(&self) -> LongRunVariance {
        self.variance
    }

    /// `σ_n² = n^{-1} E S_n²`; batch-means families return `σ²`.
    pub fn sigma_n2(&self, n: usize) -> f64 {
        if let Prepared::LinearProcess(lin) = &self.process {
            return lin.sigma_n2(n);
        }
        match &self.autocov {
            Some(c) => {
                let nn = n as f64;
                let cross: f64 = c
                    .iter()
                    .enumerate()
                    .skip(1)
                    .take(n.saturating_sub(1))
                    .map(|(k, v)| (1.0 - k as f64 / nn) * v)
                    .sum();
                c[0] + 2.0 * cross
            }
            None => self.variance.sigma2,
        }
    }

    pub fn autocovariances(&self) -> Option<&[f64]> {
        self.autocov.as_deref()
    }

    fn rngs(&self, seed: u64, replicate: u64, n: usize) -> (ChaCha8Rng, ChaCha8Rng) {
        (
            stream(seed, replicate, n as u64, StreamRole::InitialState),
            stream(seed, replicate, n as u64, StreamRole::Transitions),
        )
    }

    /// `S_n` of one replicate; the streams depend only on `(seed, replicate, n)`.
    pub fn sum(&self, n: usize, seed: u64, replicate: u64) -> f64 {
        match &self.process {
            Prepared::LinearProcess(lin) => {
                let w = lin.sum_weights(n);
                self.linear_sum(lin, &w, n, seed, replicate)
            }
            _ => self.path(n, seed, replicate).iter().sum(),
        }
    }

    fn linear_sum(&self, lin: &TruncatedLinear, weights: &[f64], n: usize, seed: u64, replicate: u64) -> f64 {
        let mut rng = stream(seed, replicate, n as u64, StreamRole::Innovations);
        lin.sample_sum(n, weights, &mut rng)
    }

    /// `X_1, …, X_n` of one replicate.
    pub fn path(&self, n: usize, seed: u64, replicate: u64) -> Vec<f64> {
        match &self.process {
            Prepared::DavydovChain { chain, f, mean, .. } => {
                let (mut init, mut steps) = self.rngs(seed, replicate, n);
                let mut y = chain.draw_stationary(&mut init);
                (0..n)
                    .map(|_| {
                        y = chain.step(y, &mut steps);
                        f[y] - mean
                    })
                    .collect()
            }
            Prepared::LinearProcess(lin) => {
                let mut rng = stream(seed, replicate, n as u64, StreamRole::Innovations);
                lin.sample_path(n, &mut rng)
            }
            Prepared::FunctionOfLinear(fl) => {
                let mut rng = stream(seed, replicate, n as u64, StreamRole::Innovations);
                fl.sample_path(n, &mut rng)
            }
            Prepared::ExpandingMap(map) => {
                let (mut init, mut steps) = self.rngs(seed, replicate, n);
                map.path(n, &mut init, &mut steps)
            }
            Prepared::IidBaseline(law) => {
                let mut rng = stream(seed, replicate, n as u64, StreamRole::Innovations);
                (0..n).map(|_| law.sample(&mut rng)).collect()
            }
        }
    }

    /// `n^{-1/2} S_n` for replicates `0..m`, in parallel; the result does not
    /// depend on the thread count.
    pub fn normalized_sums(&self, n: usize, m: u64, seed: u64) -> Vec<f64> {
        use rayon::prelude::*;
        let scale = 1.0 / (n as f64).sqrt();
        match &self.process {
            Prepared::LinearProcess(lin) => {
                let w = lin.sum_weights(n);
                (0..m).into_par_iter().map(|r| self.linear_sum(lin, &w, n, seed, r) * scale).collect()
            }
            Prepared::DavydovChain { chain, f, mean, .. } => (0..m)
                .into_par_iter()
                .map(|r| {
                    let (mut init, mut steps) = self.rngs(seed, r, n);
                    let mut y = chain.draw_stationary(&mut init);
                    let mut s = 0.0;
                    for _ in 0..n {
                        y = chain.step(y, &mut steps);
                        s += f[y] - mean;
                    }
                    s * scale
                })
                .collect(),
            Prepared::ExpandingMap(map) => (0..m)
                .into_par_iter()
                .map(|r| {
                    let (mut init, mut steps) = self.rngs(seed, r, n);
                    map.sum(n, &mut init, &mut steps) * scale
                })
                .collect(),
            _ => (0..m).into_par_iter().map(|r| self.sum(n, seed, r) * scale).collect(),
        }
    }
}

/// The long-run variance record of a spec.
pub fn long_run_variance(spec: &ProcessSpec) -> Result<LongRunVariance> {
    Ok(PreparedProcess::new(spec)?.long_run_variance())
}
