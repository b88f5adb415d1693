//! Dense linear assignment (Hungarian algorithm, shortest augmenting paths).

/// Minimises `Σ cost[i][perm[i]]` over permutations of an `m × m` matrix
/// stored row-major. Returns the optimal permutation (row → column).
pub fn solve(cost: &[f64], m: usize) -> Vec<usize> {
    assert_eq!(cost.len(), m * m, "cost matrix must be square");
    if m == 0 {
        return Vec::new();
    }
    // 1-based potentials; column 0 is a virtual source
    let mut u = vec![0.0f64; m + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; m];
    for j in 1..=m {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &[f64], m: usize) -> f64 {
        fn rec(cost: &[f64], m: usize, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == m {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..m {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row * m + j] + rec(cost, m, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, m, 0, &mut vec![false; m])
    }

    #[test]
    fn matches_brute_force() {
        let mut state = 12345u64;
        for m in 1..=6 {
            for _ in 0..20 {
                let cost: Vec<f64> = (0..m * m)
                    .map(|_| {
                        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        (state >> 11) as f64 / (1u64 << 53) as f64
                    })
                    .collect();
                let perm = solve(&cost, m);
                let got: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i * m + j]).sum();
                assert!((got - brute(&cost, m)).abs() < 1e-12);
            }
        }
    }
}
