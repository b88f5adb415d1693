use super::empirical::{GaussianLaw, Law};
use crate::{Error, Result};

/// `sup_x |F(x) − Φ_σ(x)|`, evaluated on both sides of every atom of either law.
pub fn kolmogorov(x: &Law, g: &GaussianLaw) -> f64 {
    match x {
        Law::Gaussian(h) => gaussian_pair(h.sigma, g.sigma),
        Law::Empirical(e) => {
            let mut best: f64 = 0.0;
            let mut check = |t: f64| {
                best = best
                    .max((e.cdf(t) - g.cdf(t)).abs())
                    .max((e.cdf_left(t) - g.cdf_left(t)).abs());
            };
            let pts = e.points();
            let mut k = 0;
            while k < pts.len() {
                check(pts[k]);
                // skip ties
                let t = pts[k];
                while k < pts.len() && pts[k] == t {
                    k += 1;
                }
            }
            if g.sigma == 0.0 {
                check(0.0);
            }
            best
        }
    }
}

/// Two centred normals: the d.f. gap is maximal at `x*` with equal densities.
fn gaussian_pair(a: f64, b: f64) -> f64 {
    use crate::numerics::normal::cdf;
    if a == b {
        return 0.0;
    }
    if a == 0.0 || b == 0.0 {
        return 0.5;
    }
    let (s, t) = if a < b { (a, b) } else { (b, a) };
    let x = s * t * (2.0 * (t / s).ln() / (t * t - s * s)).sqrt();
    (cdf(x / s) - cdf(x / t)).abs()
}

/// `Π ≤ W_r^{1/(r+1)}`, valid for `r ∈ (0, 1]`.
pub fn prokhorov_bound(w: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::invalid(format!("r must lie in (0, 1], got {r}")));
    }
    if !(w >= 0.0) {
        return Err(Error::invalid(format!("distance must be ≥ 0, got {w}")));
    }
    Ok(w.powf(1.0 / (r + 1.0)))
}

/// `(1 + σ⁻¹(2π)^{−1/2})·Π`.
pub fn kolmogorov_from_prokhorov(pi: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok((1.0 + 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt())) * pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::EmpiricalDistribution;
    use crate::numerics::normal::cdf;

    #[test]
    fn examples() {
        let g = GaussianLaw::standard();
        let pm = Law::Empirical(EmpiricalDistribution::new(vec![0.0]).unwrap());
        assert!((kolmogorov(&pm, &g) - 0.5).abs() < 1e-15);
        let two = Law::Empirical(EmpiricalDistribution::new(vec![-1.0, 1.0]).unwrap());
        assert!((kolmogorov(&two, &g) - (cdf(1.0) - 0.5)).abs() < 1e-15);
        assert_eq!(kolmogorov(&Law::Gaussian(g), &g), 0.0);
        assert!((prokhorov_bound(0.04, 1.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(prokhorov_bound(0.04, 1.5).is_err());
        assert!((kolmogorov_from_prokhorov(1.0, 1.0).unwrap() - 1.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn degenerate_target_checks_origin() {
        let g = GaussianLaw::new(0.0).unwrap();
        let e = Law::Empirical(EmpiricalDistribution::new(vec![-1.0, 1.0]).unwrap());
        assert_eq!(kolmogorov(&e, &g), 0.5);
    }
}
