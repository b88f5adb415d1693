//! Covariance inequalities for products of `k` centred variables, checked
//! exactly on finite chains.

use serde::{Deserialize, Serialize};

use crate::metrics::{EmpiricalDistribution, TailQuantile, TailQuantileFn};
use crate::processes::FiniteKernel;
use crate::{Error, Result};

/// Relative slack of the inequality checks.
pub const COVARIANCE_SLACK: f64 = 1e-9;
/// Largest joint law (atoms) built by [`check_covariance_inequality`].
pub const JOINT_ATOM_CAP: usize = 1 << 22;

/// The three right-hand sides for variables with given laws and `φ^{(i)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductBounds {
    /// `∫₀¹ Π D_i(u/φ_i) du`.
    pub d_form: f64,
    /// `2^k ∫₀¹ Π Q_i(u/φ_i) du`.
    pub q_form: f64,
    /// `2^k Π φ_i^{1/p_i} ‖X_i‖_{p_i}`.
    pub holder_form: f64,
}

impl ProductBounds {
    pub fn min(&self) -> f64 {
        self.d_form.min(self.q_form).min(self.holder_form)
    }
}

/// `∫₀¹ Π_i g_i(u) du` for step functions constant between `breaks`.
fn step_product_integral(factors: &[&dyn Fn(f64) -> f64], mut breaks: Vec<f64>) -> f64 {
    breaks.retain(|b| *b > 0.0 && *b < 1.0);
    breaks.push(0.0);
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0]) * factors.iter().map(|g| g(mid)).product::<f64>()
        })
        .sum()
}

/// `D(v) = (F⁻¹(1−v) − F⁻¹(v))_+`, zero for `v ≥ 1/2`.
fn dispersion(law: &EmpiricalDistribution, v: f64) -> f64 {
    if v >= 0.5 {
        return 0.0;
    }
    (law.quantile(1.0 - v) - law.quantile(v)).max(0.0)
}

/// `Q(v)` with `Q(v) = 0` for `v ≥ 1`.
fn tail_or_zero(q: &dyn TailQuantileFn, v: f64) -> f64 {
    if v >= 1.0 {
        0.0
    } else {
        q.eval(v)
    }
}

fn check_phis(phis: &[f64], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid("covariance bounds need k ≥ 2"));
    }
    if phis.len() != k {
        return Err(Error::invalid(format!("{} phi values for k = {k}", phis.len())));
    }
    if let Some(p) = phis.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::invalid(format!("phi must be finite and ≥ 0, got {p}")));
    }
    Ok(())
}

fn holder_exponents(holder: Option<&[f64]>, k: usize) -> Result<Vec<f64>> {
    let p = holder.map(<[f64]>::to_vec).unwrap_or_else(|| vec![k as f64; k]);
    if p.len() != k || p.iter().any(|x| !(*x >= 1.0)) {
        return Err(Error::invalid("Hölder exponents must be k values ≥ 1"));
    }
    let s: f64 = p.iter().map(|x| 1.0 / x).sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("Σ 1/p_i = {s}, must be 1")));
    }
    Ok(p)
}

/// `∫₀¹ Π Q_i(u/φ_i) du` for step quantiles; a factor with `φ_i = 0` is zero.
pub fn quantile_product_integral(quantiles: &[&dyn TailQuantileFn], phis: &[f64]) -> Result<f64> {
    check_phis(phis, quantiles.len())?;
    if phis.iter().any(|&p| p == 0.0) {
        return Ok(0.0);
    }
    let mut breaks = Vec::new();
    for (q, &phi) in quantiles.iter().zip(phis) {
        breaks.extend(q.breakpoints().into_iter().map(|b| b * phi));
        breaks.push(phi);
    }
    let factors: Vec<Box<dyn Fn(f64) -> f64 + '_>> = quantiles
        .iter()
        .zip(phis)
        .map(|(q, &phi)| Box::new(move |u: f64| tail_or_zero(*q, u / phi)) as Box<dyn Fn(f64) -> f64>)
        .collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = factors.iter().map(|b| b.as_ref()).collect();
    Ok(step_product_integral(&refs, breaks))
}

/// D-, Q- and Hölder-form bounds on `|E Π(X_i − E X_i)|` for finitely
/// supported `X_i`; `holder` defaults to `p_i = k`.
pub fn covariance_product_bound(
    laws: &[EmpiricalDistribution],
    phis: &[f64],
    holder: Option<&[f64]>,
) -> Result<ProductBounds> {
    let k = laws.len();
    check_phis(phis, k)?;
    let p = holder_exponents(holder, k)?;
    let scale = 2f64.powi(k as i32);
    if phis.iter().any(|&x| x == 0.0) {
        return Ok(ProductBounds { d_form: 0.0, q_form: 0.0, holder_form: 0.0 });
    }
    let mut breaks = Vec::new();
    for (law, &phi) in laws.iter().zip(phis) {
        for &c in law.cumulative() {
            breaks.push(phi * c);
            breaks.push(phi * (1.0 - c));
        }
        breaks.push(0.5 * phi);
    }
    let d_factors: Vec<Box<dyn Fn(f64) -> f64 + '_>> = laws
        .iter()
        .zip(phis)
        .map(|(law, &phi)| Box::new(move |u: f64| dispersion(law, u / phi)) as Box<dyn Fn(f64) -> f64>)
        .collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = d_factors.iter().map(|b| b.as_ref()).collect();
    let d_form = step_product_integral(&refs, breaks);

    let tails: Vec<TailQuantile> = laws
        .iter()
        .map(|law| TailQuantile::from_atoms(law.points(), law.weights()))
        .collect::<Result<_>>()?;
    let qrefs: Vec<&dyn TailQuantileFn> = tails.iter().map(|q| q as &dyn TailQuantileFn).collect();
    let q_form = scale * quantile_product_integral(&qrefs, phis)?;

    let holder_form = scale
        * laws
            .iter()
            .zip(phis)
            .zip(&p)
            .map(|((law, &phi), &pi)| phi.powf(1.0 / pi) * law.abs_moment(pi).powf(1.0 / pi))
            .product::<f64>();
    Ok(ProductBounds { d_form, q_form, holder_form })
}

/// A piece of a declared functional: monotone values on consecutive state
/// labels `start, start+1, …`, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonePiece {
    pub weight: f64,
    pub start: i64,
    pub values: Vec<f64>,
}

impl MonotonePiece {
    pub fn eval(&self, label: i64) -> f64 {
        let off = label - self.start;
        if off >= 0 && (off as usize) < self.values.len() {
            self.values[off as usize]
        } else {
            0.0
        }
    }
}

/// `f = Σ_j λ_j f_j` with `Σ|λ_j| ≤ 1` and each `f_j` monotone on an interval
/// and null elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclaredFunctional {
    pub pieces: Vec<MonotonePiece>,
}

impl DeclaredFunctional {
    pub fn validate(&self) -> Result<()> {
        const INV: &str = "functional decomposes into declared monotone pieces";
        let total: f64 = self.pieces.iter().map(|p| p.weight.abs()).sum();
        if !(total <= 1.0 + 1e-12) {
            return Err(Error::invariant(INV, format!("Σ|λ| = {total} > 1")));
        }
        for (j, p) in self.pieces.iter().enumerate() {
            if p.values.iter().any(|v| !v.is_finite()) || !p.weight.is_finite() {
                return Err(Error::invariant(INV, format!("piece {j} has non-finite entries")));
            }
            let up = p.values.windows(2).all(|w| w[0] <= w[1]);
            let down = p.values.windows(2).all(|w| w[0] >= w[1]);
            if !(up || down) {
                return Err(Error::invariant(INV, format!("piece {j} is not monotone")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, label: i64) -> f64 {
        self.pieces.iter().map(|p| p.weight * p.eval(label)).sum()
    }

    pub fn values_on(&self, labels: &[i64]) -> Vec<f64> {
        labels.iter().map(|&l| self.eval(l)).collect()
    }
}

/// Joint law of a random vector on a product of finite level sets, stored as
/// a dense tensor (last coordinate fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw {
    /// Increasing values of each coordinate.
    pub levels: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
}

impl JointLaw {
    pub fn dims(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn k(&self) -> usize {
        self.levels.len()
    }

    fn strides(&self) -> Vec<usize> {
        let dims = self.dims();
        let mut s = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * dims[i + 1];
        }
        s
    }

    fn coords(&self, mut flat: usize, strides: &[usize]) -> Vec<usize> {
        strides
            .iter()
            .map(|&st| {
                let c = flat / st;
                flat %= st;
                c
            })
            .collect()
    }

    /// Law of `(Y_{t_1}, …, Y_{t_k})` for the stationary chain, coordinates in
    /// the order of `times`; levels are the state labels.
    pub fn of_chain(kernel: &FiniteKernel, times: &[usize]) -> Result<Self> {
        let k = times.len();
        if k == 0 {
            return Err(Error::invalid("no time indices"));
        }
        let s = kernel.len();
        let atoms = (s as f64).powi(k as i32);
        if atoms > JOINT_ATOM_CAP as f64 {
            return Err(Error::Budget(format!("joint law with {s}^{k} atoms exceeds {JOINT_ATOM_CAP}")));
        }
        // states in increasing label order
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by_key(|&i| kernel.states()[i]);
        let labels: Vec<f64> = order.iter().map(|&i| kernel.states()[i] as f64).collect();
        let mut sorted_pos: Vec<usize> = (0..k).collect();
        sorted_pos.sort_by_key(|&j| times[j]);
        let pi = kernel.stationary();
        // transition matrices between consecutive sorted times, in label order
        let mut steps: Vec<Vec<f64>> = Vec::with_capacity(k - 1);
        for w in sorted_pos.windows(2) {
            let gap = times[w[1]] - times[w[0]];
            let dense = kernel.dense_power(gap);
            let mut m = vec![0.0; s * s];
            for (a, &ia) in order.iter().enumerate() {
                for (b, &ib) in order.iter().enumerate() {
                    m[a * s + b] = dense[ia * s + ib];
                }
            }
            steps.push(m);
        }
        // mass over sorted coordinates, built one coordinate at a time
        let mut mass: Vec<f64> = order.iter().map(|&i| pi[i]).collect();
        for m in &steps {
            let mut next = Vec::with_capacity(mass.len() * s);
            for (idx, &w) in mass.iter().enumerate() {
                let last = idx % s;
                next.extend((0..s).map(|b| w * m[last * s + b]));
            }
            mass = next;
        }
        let sorted = JointLaw { levels: vec![labels; k], mass };
        Ok(sorted.permuted(&sorted_pos))
    }

    /// Reorders coordinates: new coordinate `sorted_pos[j]` is old `j`.
    fn permuted(&self, sorted_pos: &[usize]) -> Self {
        let k = self.k();
        if sorted_pos.iter().enumerate().all(|(i, &j)| i == j) {
            return self.clone();
        }
        let mut levels = vec![Vec::new(); k];
        for (j, &target) in sorted_pos.iter().enumerate() {
            levels[target] = self.levels[j].clone();
        }
        let out = JointLaw { levels, mass: vec![0.0; self.mass.len()] };
        let old_strides = self.strides();
        let new_strides = out.strides();
        let mut mass = vec![0.0; self.mass.len()];
        for (flat, &w) in self.mass.iter().enumerate() {
            let c = self.coords(flat, &old_strides);
            let mut target = 0;
            for (j, &cj) in c.iter().enumerate() {
                target += cj * new_strides[sorted_pos[j]];
            }
            mass[target] = w;
        }
        JointLaw { mass, ..out }
    }

    /// Law of `(f_1(V_1), …, f_k(V_k))`, where `fs[i]` lists `f_i` on the
    /// levels of coordinate `i`.
    pub fn mapped(&self, fs: &[Vec<f64>]) -> Result<Self> {
        if fs.len() != self.k() || fs.iter().zip(&self.levels).any(|(f, l)| f.len() != l.len()) {
            return Err(Error::invalid("one value per level and coordinate required"));
        }
        let mut levels = Vec::with_capacity(self.k());
        let mut maps = Vec::with_capacity(self.k());
        for f in fs {
            let mut vals = f.clone();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            maps.push(f.iter().map(|v| vals.partition_point(|w| w < v)).collect::<Vec<_>>());
            levels.push(vals);
        }
        let mut out = JointLaw { levels, mass: Vec::new() };
        let new_strides = out.strides();
        let total: usize = out.dims().iter().product();
        let mut mass = vec![0.0; total];
        let old_strides = self.strides();
        for (flat, &w) in self.mass.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let c = self.coords(flat, &old_strides);
            let target: usize = c.iter().enumerate().map(|(i, &ci)| maps[i][ci] * new_strides[i]).sum();
            mass[target] += w;
        }
        out.mass = mass;
        Ok(out)
    }

    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let strides = self.strides();
        let d = self.levels[i].len();
        let mut m = vec![0.0; d];
        for (flat, &w) in self.mass.iter().enumerate() {
            m[(flat / strides[i]) % d] += w;
        }
        m
    }

    pub fn marginal_law(&self, i: usize) -> Result<EmpiricalDistribution> {
        let m = self.marginal(i);
        let (pts, ws): (Vec<f64>, Vec<f64>) =
            self.levels[i].iter().zip(&m).filter(|(_, w)| **w > 0.0).map(|(v, w)| (*v, *w)).unzip();
        EmpiricalDistribution::from_unnormalized(pts, ws)
    }

    /// `E Π (V_i − E V_i)`.
    pub fn centred_product_moment(&self) -> f64 {
        let means: Vec<f64> =
            (0..self.k()).map(|i| self.levels[i].iter().zip(self.marginal(i)).map(|(v, w)| v * w).sum()).collect();
        let strides = self.strides();
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(flat, &w)| {
                let c = self.coords(flat, &strides);
                w * c.iter().enumerate().map(|(i, &ci)| self.levels[i][ci] - means[i]).product::<f64>()
            })
            .sum()
    }

    /// `φ^{(i)} = φ(σ(V_i), (V_j)_{j≠i})` for every `i`; thresholds range over
    /// the levels, where the sup over `ℝ^{k−1}` is attained.
    pub fn phi_vector(&self) -> Vec<f64> {
        let k = self.k();
        let dims = self.dims();
        let cdfs: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut acc = 0.0;
                self.marginal(i)
                    .into_iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect()
            })
            .collect();
        (0..k)
            .map(|i| {
                let others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
                let odims: Vec<usize> = others.iter().map(|&j| dims[j]).collect();
                let size: usize = odims.iter().product();
                let strides = self.strides();
                // slices[v] = unnormalised law of the other coordinates given V_i = v
                let mut slices = vec![vec![0.0; size]; dims[i]];
                let mut ostrides = vec![1; others.len()];
                for a in (0..others.len().saturating_sub(1)).rev() {
                    ostrides[a] = ostrides[a + 1] * odims[a + 1];
                }
                for (flat, &w) in self.mass.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let c = self.coords(flat, &strides);
                    let o: usize = others.iter().enumerate().map(|(a, &j)| c[j] * ostrides[a]).sum();
                    slices[c[i]][o] += w;
                }
                let mut total = vec![0.0; size];
                for sl in &slices {
                    for (t, x) in total.iter_mut().zip(sl) {
                        *t += x;
                    }
                }
                let ocdfs: Vec<&[f64]> = others.iter().map(|&j| cdfs[j].as_slice()).collect();
                let uncond = threshold_transform(total, &odims, &ocdfs);
                let mut best: f64 = 0.0;
                for sl in slices {
                    let pv: f64 = sl.iter().sum();
                    if pv <= 0.0 {
                        continue;
                    }
                    let cond = threshold_transform(sl, &odims, &ocdfs);
                    for (c, u) in cond.iter().zip(&uncond) {
                        best = best.max((c / pv - u).abs());
                    }
                }
                best.min(1.0)
            })
            .collect()
    }
}

/// Maps a mass tensor `m` to `T(x) = Σ_y m(y) Π_a (1{y_a ≤ x_a} − F_a(x_a))`
/// over all threshold tuples; separable, so one cumulative pass per axis.
fn threshold_transform(mut t: Vec<f64>, dims: &[usize], cdfs: &[&[f64]]) -> Vec<f64> {
    let n: usize = dims.iter().product();
    let mut inner = n;
    for (a, &d) in dims.iter().enumerate() {
        inner /= d;
        let outer = n / (d * inner);
        for o in 0..outer {
            for r in 0..inner {
                let base = o * d * inner + r;
                let total: f64 = (0..d).map(|x| t[base + x * inner]).sum();
                let mut acc = 0.0;
                for x in 0..d {
                    acc += t[base + x * inner];
                    t[base + x * inner] = acc - cdfs[a][x] * total;
                }
            }
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundForm {
    /// `∫ Π D_i(u/φ^{(i)})`, `φ^{(i)}` of the vector `X`.
    DForm,
    /// `2^k ∫ Π Q_i(u/φ^{(i)})`.
    QForm,
    /// `2^k Π (φ^{(i)})^{1/p_i} ‖X_i‖_{p_i}`.
    HolderForm,
    /// `2^{2k−1} ∫ Π Q_i(u/φ^{(i)})`, `φ^{(i)}` of the vector `Y`, `Q_i`
    /// dominating every declared piece.
    CorollaryQuantile,
    /// `2^{2k−1} Π (φ^{(i)} M_i)^{1/p_i}`.
    CorollaryHolder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub times: Vec<usize>,
    pub lhs: f64,
    pub rhs_forms: Vec<(BoundForm, f64)>,
    pub phi_x: Vec<f64>,
    pub phi_y: Vec<f64>,
    /// Absolute round-off allowance added to the relative slack.
    pub roundoff: f64,
    pub ok: bool,
}

impl CovarianceCheck {
    pub fn min_rhs(&self) -> f64 {
        self.rhs_forms.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min)
    }
}

/// Exact check of the product-covariance inequalities for
/// `X_i = f_i(Y_{t_i})` on a stationary finite chain.
pub fn check_covariance_inequality(
    kernel: &FiniteKernel,
    fs: &[DeclaredFunctional],
    times: &[usize],
    holder: Option<&[f64]>,
) -> Result<CovarianceCheck> {
    let k = fs.len();
    if k < 2 || times.len() != k {
        return Err(Error::invalid("need k ≥ 2 functionals and one time index each"));
    }
    for f in fs {
        f.validate()?;
    }
    let p = holder_exponents(holder, k)?;
    let ylaw = JointLaw::of_chain(kernel, times)?;
    let labels: Vec<i64> = ylaw.levels[0].iter().map(|&v| v as i64).collect();
    let fvals: Vec<Vec<f64>> = fs.iter().map(|f| f.values_on(&labels)).collect();
    let xlaw = ylaw.mapped(&fvals)?;

    let lhs = xlaw.centred_product_moment().abs();
    let phi_x = xlaw.phi_vector();
    let phi_y = ylaw.phi_vector();
    let laws: Vec<EmpiricalDistribution> = (0..k).map(|i| xlaw.marginal_law(i)).collect::<Result<_>>()?;
    let prop = covariance_product_bound(&laws, &phi_x, Some(&p))?;

    // pieces of f_i under the marginal of Y_{t_i} (= π)
    let pi_sorted = ylaw.marginal(0);
    let mut piece_tails: Vec<Vec<TailQuantile>> = Vec::with_capacity(k);
    let mut moments = Vec::with_capacity(k);
    for (f, &pi_exp) in fs.iter().zip(&p) {
        let mut tails = Vec::new();
        let mut m: f64 = 0.0;
        for piece in &f.pieces {
            let vals: Vec<f64> = labels.iter().map(|&l| piece.eval(l)).collect();
            m = m.max(vals.iter().zip(&pi_sorted).map(|(v, w)| w * v.abs().powf(pi_exp)).sum());
            tails.push(TailQuantile::from_atoms(&vals, &pi_sorted)?);
        }
        if tails.is_empty() {
            tails.push(TailQuantile::from_atoms(&[0.0], &[1.0])?);
        }
        piece_tails.push(tails);
        moments.push(m);
    }
    let envelopes: Vec<MaxQuantile> = piece_tails.into_iter().map(MaxQuantile).collect();
    let erefs: Vec<&dyn TailQuantileFn> = envelopes.iter().map(|q| q as &dyn TailQuantileFn).collect();
    let big = 2f64.powi(2 * k as i32 - 1);
    let cor_q = big * quantile_product_integral(&erefs, &phi_y)?;
    let cor_h = big
        * phi_y.iter().zip(&moments).zip(&p).map(|((f, m), pe)| (f * m).powf(1.0 / pe)).product::<f64>();

    let rhs_forms = vec![
        (BoundForm::DForm, prop.d_form),
        (BoundForm::QForm, prop.q_form),
        (BoundForm::HolderForm, prop.holder_form),
        (BoundForm::CorollaryQuantile, cor_q),
        (BoundForm::CorollaryHolder, cor_h),
    ];
    let scale: f64 = laws.iter().map(|l| l.points().iter().fold(0.0f64, |a, v| a.max(v.abs()))).product();
    let roundoff = 64.0 * f64::EPSILON * scale;
    let min = rhs_forms.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let ok = lhs <= min * (1.0 + COVARIANCE_SLACK) + roundoff;
    Ok(CovarianceCheck { times: times.to_vec(), lhs, rhs_forms, phi_x, phi_y, roundoff, ok })
}

/// Pointwise maximum of step tail quantiles.
struct MaxQuantile(Vec<TailQuantile>);

impl TailQuantileFn for MaxQuantile {
    fn eval(&self, u: f64) -> f64 {
        self.0.iter().map(|q| q.eval(u)).fold(0.0, f64::max)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.0.iter().flat_map(|q| q.breakpoints()).collect()
    }

    fn is_bounded(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_quantiles_give_four() {
        // 2²·∫₀¹ 1 du
        let one = TailQuantile::from_atoms(&[1.0], &[1.0]).unwrap();
        let q = [&one as &dyn TailQuantileFn, &one];
        assert!((4.0 * quantile_product_integral(&q, &[1.0, 1.0]).unwrap() - 4.0).abs() < 1e-15);
        let law = EmpiricalDistribution::with_weights(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let b = covariance_product_bound(&[law.clone(), law], &[1.0, 1.0], Some(&[2.0, 2.0])).unwrap();
        assert!((b.holder_form - 4.0).abs() < 1e-15);
        assert!((b.q_form - 4.0).abs() < 1e-15);
    }

    #[test]
    fn zero_phi_gives_zero() {
        let law = EmpiricalDistribution::new(vec![0.0, 1.0, 3.0]).unwrap();
        let b = covariance_product_bound(&[law.clone(), law], &[0.0, 0.4], None).unwrap();
        assert_eq!(b.min(), 0.0);
    }

    #[test]
    fn d_form_of_symmetric_pair() {
        // X uniform on {−1, 1}: D(v) = 2 on (0, 1/2); φ = 1 gives ∫₀^{1/2} 4 = 2
        let law = EmpiricalDistribution::with_weights(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let b = covariance_product_bound(&[law.clone(), law], &[1.0, 1.0], None).unwrap();
        assert!((b.d_form - 2.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_transform_one_axis() {
        let t = threshold_transform(vec![0.2, 0.3, 0.5], &[3], &[&[0.2, 0.5, 1.0]]);
        assert!(t.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn monotone_validation() {
        let bad = DeclaredFunctional {
            pieces: vec![MonotonePiece { weight: 1.0, start: 0, values: vec![0.0, 1.0, 0.5] }],
        };
        assert!(bad.validate().is_err());
        let heavy = DeclaredFunctional {
            pieces: vec![
                MonotonePiece { weight: 0.7, start: 0, values: vec![1.0] },
                MonotonePiece { weight: -0.7, start: 1, values: vec![1.0] },
            ],
        };
        assert!(heavy.validate().is_err());
    }

    #[test]
    fn constant_functional_has_zero_lhs() {
        let k = FiniteKernel::from_dense(vec![0, 1, 2], &[0.5, 0.5, 0.0, 0.25, 0.5, 0.25, 0.0, 0.5, 0.5]).unwrap();
        let c = DeclaredFunctional { pieces: vec![MonotonePiece { weight: 1.0, start: 0, values: vec![1.0; 3] }] };
        let inc = DeclaredFunctional { pieces: vec![MonotonePiece { weight: 1.0, start: 0, values: vec![0.0, 1.0, 2.0] }] };
        let r = check_covariance_inequality(&k, &[c, inc], &[0, 2], None).unwrap();
        assert!(r.lhs.abs() < 1e-15);
        assert!(r.ok);
    }
}
