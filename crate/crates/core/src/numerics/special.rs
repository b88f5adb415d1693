//! Hurwitz zeta function for power-law coefficient tails.

const BERNOULLI_2K: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// ζ(s, q) = Σ_{k ≥ 0} (k + q)^{−s} for s > 1, q > 0 (Euler–Maclaurin).
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0, "hurwitz_zeta needs s > 1 and q > 0");
    const SHIFT: usize = 12;
    let mut direct = 0.0;
    let mut x = q;
    let mut shift = 0;
    while x < SHIFT as f64 && shift < SHIFT {
        direct += x.powf(-s);
        x += 1.0;
        shift += 1;
    }
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) / (2j)!
    let mut coeff = s;
    let mut fact = 2.0;
    let mut xpow = x.powf(-s - 1.0);
    for (j, b) in BERNOULLI_2K.iter().enumerate() {
        let term = b / fact * coeff * xpow;
        tail += term;
        if term.abs() < 1e-17 * tail.abs() {
            break;
        }
        let k = 2.0 * (j as f64 + 1.0);
        coeff *= (s + k - 1.0) * (s + k);
        fact *= (k + 1.0) * (k + 2.0);
        xpow /= x * x;
    }
    direct + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riemann_values() {
        let pi = std::f64::consts::PI;
        assert!((hurwitz_zeta(2.0, 1.0) - pi * pi / 6.0).abs() < 1e-14);
        assert!((hurwitz_zeta(4.0, 1.0) - pi.powi(4) / 90.0).abs() < 1e-14);
    }

    #[test]
    fn shift_identity() {
        // ζ(s, q) − ζ(s, q + 1) = q^{−s}
        for &(s, q) in &[(1.5, 0.3), (2.7, 5.0), (3.2, 1234.5)] {
            let d = hurwitz_zeta(s, q) - hurwitz_zeta(s, q + 1.0);
            assert!((d - q.powf(-s)).abs() < 1e-13 * q.powf(-s).max(1e-3), "{s} {q}");
        }
    }
}
