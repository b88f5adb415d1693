//! Standard normal distribution function, density, quantile and absolute moments.

use libm::erfc;
use statrs::function::gamma::ln_gamma;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density of N(0, 1).
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Distribution function Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail 1 − Φ(x), accurate for large positive `x`.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Quantile Φ⁻¹(u) for u in [0, 1].
///
/// Wichura's AS 241 rational approximation followed by a single Newton step
/// on the lower tail representation.
pub fn quantile(u: f64) -> f64 {
    if u.is_nan() || !(0.0..=1.0).contains(&u) {
        return f64::NAN;
    }
    if u == 0.0 {
        return f64::NEG_INFINITY;
    }
    if u == 1.0 {
        return f64::INFINITY;
    }
    if u > 0.5 {
        return -lower_quantile(1.0 - u);
    }
    lower_quantile(u)
}

/// Φ⁻¹(1 − v) computed without forming 1 − v.
pub fn upper_quantile(v: f64) -> f64 {
    if v <= 0.5 {
        -lower_quantile(v)
    } else {
        quantile(1.0 - v)
    }
}

fn lower_quantile(u: f64) -> f64 {
    let x = as241(u);
    if !x.is_finite() {
        return x;
    }
    // one Newton step; the relative error of `cdf` is small in the lower tail
    let d = pdf(x);
    if d > 0.0 {
        x - (cdf(x) - u) / d
    } else {
        x
    }
}

fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_87)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// E|Y|^r for Y ~ N(0, 1): 2^{r/2} Γ((r+1)/2) / √π.
pub fn abs_moment(r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    (0.5 * r * std::f64::consts::LN_2 + ln_gamma(0.5 * (r + 1.0))
        - 0.5 * std::f64::consts::PI.ln())
    .exp()
}

/// Probabilists' Hermite polynomial He_m(x); φ^{(m)}(x) = (−1)^m He_m(x) φ(x).
pub fn hermite_he(m: usize, x: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut a, mut b) = (1.0, x);
            for k in 1..m {
                let c = x * b - k as f64 * a;
                a = b;
                b = c;
            }
            b
        }
    }
}

/// m-th derivative of the standard normal density.
pub fn pdf_derivative(m: usize, x: f64) -> f64 {
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    sign * hermite_he(m, x) * pdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_inverts_cdf() {
        for &u in &[1e-300, 1e-20, 1e-8, 0.001, 0.025, 0.3, 0.5, 0.7, 0.975, 0.999_999] {
            let x = quantile(u);
            let back = cdf(x);
            // relative error in x of 1e-14 moves Φ(x) by a factor ≈ 1 + x²·1e-14
            assert!(((back - u) / u).abs() < 1e-14 * (1.0 + x * x), "u={u} x={x} back={back}");
        }
        assert_eq!(quantile(0.5), 0.0);
    }

    #[test]
    fn known_values() {
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((abs_moment(1.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((abs_moment(2.0) - 1.0).abs() < 1e-14);
        assert!((abs_moment(3.0) - 2.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn upper_quantile_matches_symmetry() {
        for &v in &[1e-12, 0.01, 0.2, 0.5, 0.8] {
            assert!((upper_quantile(v) + quantile(v)).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_recursion() {
        // He_3 = x^3 - 3x
        assert!((hermite_he(3, 2.0) - 2.0).abs() < 1e-15);
        let h = 1e-5;
        let num = (pdf(0.7 + h) - pdf(0.7 - h)) / (2.0 * h);
        assert!((num - pdf_derivative(1, 0.7)).abs() < 1e-9);
    }
}
