//! Brute-force oracles for the exact computations of `cltlab-core`: each
//! one enumerates the definition directly and shares no code with the
//! library routine it checks.

use cltlab_core::processes::FiniteKernel;

/// Minimum of (1/M)Σ|x_i − y_π(i)|^r over every permutation (Heap's order).
pub fn permutation_minimum(x: &[f64], y: &[f64], r: f64) -> f64 {
    let m = x.len();
    let mut perm: Vec<usize> = (0..m).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| (x[i] - y[j]).abs().powf(r)).sum::<f64>();
    let mut best = cost(&perm);
    let mut c = vec![0usize; m];
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let mean = best / m as f64;
    if r >= 1.0 {
        mean.powf(1.0 / r)
    } else {
        mean
    }
}

pub fn dense_power(k: &FiniteKernel, n: usize) -> Vec<f64> {
    let s = k.len();
    let d = k.dense();
    let mut p: Vec<f64> = (0..s * s).map(|i| if i / s == i % s { 1.0 } else { 0.0 }).collect();
    for _ in 0..n {
        let mut q = vec![0.0; s * s];
        for i in 0..s {
            for l in 0..s {
                let a = p[i * s + l];
                if a != 0.0 {
                    for j in 0..s {
                        q[i * s + j] += a * d[l * s + j];
                    }
                }
            }
        }
        p = q;
    }
    p
}

/// `sup_{A,B} |P(Y₀∈A, Y_n∈B) − π(A)π(B)|` by enumerating subset pairs.
pub fn alpha_by_subsets(k: &FiniteKernel, n: usize) -> f64 {
    let s = k.len();
    let pi = k.stationary();
    let kn = dense_power(k, n);
    let mut best = 0.0f64;
    for a in 0u32..(1 << s) {
        let pa: f64 = (0..s).filter(|i| a >> i & 1 == 1).map(|i| pi[i]).sum();
        for b in 0u32..(1 << s) {
            let pb: f64 = (0..s).filter(|j| b >> j & 1 == 1).map(|j| pi[j]).sum();
            let mut joint = 0.0;
            for i in (0..s).filter(|i| a >> i & 1 == 1) {
                for j in (0..s).filter(|j| b >> j & 1 == 1) {
                    joint += pi[i] * kn[i * s + j];
                }
            }
            best = best.max((joint - pa * pb).abs());
        }
    }
    best
}

/// `sup_{i ≥ n} sup_{x,s} |P(Y_i ≤ x | Y₀ = s) − P(Y₀ ≤ x)|`, the sup over `i`
/// on `n ≤ i < n + 40` (the kernels below mix within a few steps).
pub fn phi1_by_definition(k: &FiniteKernel, n: usize) -> f64 {
    let s = k.len();
    let pi = k.stationary();
    let mut best = 0.0f64;
    for i in n..n + 40 {
        let kn = dense_power(k, i);
        for x in 0..s {
            let unc: f64 = pi[..=x].iter().sum();
            for y0 in 0..s {
                let cond: f64 = (0..=x).map(|j| kn[y0 * s + j]).sum();
                best = best.max((cond - unc).abs());
            }
        }
    }
    best
}

/// `E Π (f_i(Y_{t_i}) − π f_i)` by summing over state paths.
pub fn centred_product_by_paths(k: &FiniteKernel, f: &[Vec<f64>], times: &[usize]) -> f64 {
    let s = k.len();
    let pi = k.stationary();
    let means: Vec<f64> = f.iter().map(|v| v.iter().zip(pi).map(|(a, b)| a * b).sum()).collect();
    let steps: Vec<Vec<f64>> = times.windows(2).map(|w| dense_power(k, w[1] - w[0])).collect();
    let mut total = 0.0;
    let mut path = vec![0usize; times.len()];
    loop {
        let mut w = pi[path[0]];
        for (m, st) in steps.iter().enumerate() {
            w *= st[path[m] * s + path[m + 1]];
        }
        if w != 0.0 {
            total += w * path.iter().enumerate().map(|(i, &x)| f[i][x] - means[i]).product::<f64>();
        }
        let mut d = 0;
        loop {
            if d == path.len() {
                return total;
            }
            path[d] += 1;
            if path[d] < s {
                break;
            }
            path[d] = 0;
            d += 1;
        }
    }
}

/// `A_n = Σ_j (Σ_{k=1}^n b_{k−j})²` with `b_j = a_j − 1{j=0}Σa`, summed
/// directly over a finite coefficient window starting at `lo`.
pub fn a_n_direct(lo: i64, a: &[f64], n: usize) -> f64 {
    let total: f64 = a.iter().sum();
    let b = |j: i64| {
        let i = j - lo;
        let v = if i >= 0 && (i as usize) < a.len() { a[i as usize] } else { 0.0 };
        if j == 0 {
            v - total
        } else {
            v
        }
    };
    let hi = lo + a.len() as i64 - 1;
    ((1 - hi.max(0) - 2)..=(n as i64 - lo.min(0) + 2))
        .map(|j| (1..=n as i64).map(|k| b(k - j)).sum::<f64>().powi(2))
        .sum()
}

/// `B_n = Σ_{k=1}^n ((Σ_{j≥k}|a_j|)² + (Σ_{j≤−k}|a_j|)²)`, directly.
pub fn b_n_direct(lo: i64, a: &[f64], n: usize) -> f64 {
    let coef = |j: i64| {
        let i = j - lo;
        if i >= 0 && (i as usize) < a.len() {
            a[i as usize].abs()
        } else {
            0.0
        }
    };
    let hi = lo + a.len() as i64 - 1;
    (1..=n as i64)
        .map(|k| {
            let up: f64 = (k..=hi.max(k)).map(coef).sum();
            let down: f64 = (lo.min(-k)..=-k).map(coef).sum();
            up * up + down * down
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_minimum_on_hand_cases() {
        // pairing 0↔0.5, 1↔0.5 costs 0.25 each in squares
        assert!((permutation_minimum(&[0.0, 1.0], &[0.5, 0.5], 2.0) - 0.5).abs() < 1e-15);
        // crossing is never cheaper for convex costs
        assert_eq!(permutation_minimum(&[0.0, 2.0], &[1.0, 3.0], 1.0), 1.0);
        assert_eq!(permutation_minimum(&[0.0, 1.0, 5.0], &[5.0, 0.0, 1.0], 0.5), 0.0);
    }

    #[test]
    fn flip_chain_oracles() {
        // P(Y_n = Y_0) = (1 + (1−2q)^n)/2, so α(n) = |1−2q|^n / 4
        let q = 0.3;
        let k = FiniteKernel::from_dense(vec![0, 1], &[1.0 - q, q, q, 1.0 - q]).unwrap();
        for n in 1..5 {
            let want = (1.0 - 2.0 * q).abs().powi(n as i32) / 4.0;
            assert!((alpha_by_subsets(&k, n) - want).abs() < 1e-15);
        }
        let f = vec![vec![-1.0, 1.0], vec![-1.0, 1.0]];
        assert!((centred_product_by_paths(&k, &f, &[0, 2]) - 0.16).abs() < 1e-15);
    }

    #[test]
    fn a_n_vanishes_for_a_single_coefficient() {
        assert_eq!(a_n_direct(0, &[1.7], 5), 0.0);
        assert_eq!(b_n_direct(0, &[1.7], 5), 0.0);
        // a_1 = 1: b_0 = −1, b_1 = 1, so Σ_j (b_{1−j} + … )² = 2 for every n
        assert!((a_n_direct(1, &[1.0], 4) - 2.0).abs() < 1e-15);
        assert_eq!(b_n_direct(1, &[1.0], 4), 1.0);
    }
}
