use cltlab_core::dependence::*;
use cltlab_core::processes::*;
use cltlab_core::rng::{stream, StreamRole};
use proptest::prelude::*;
use rand::Rng;

fn random_kernel(states: usize, seed: u64) -> FiniteKernel {
    let mut rng = stream(seed, 0, states as u64, StreamRole::Synthetic);
    let mut m = vec![0.0; states * states];
    for i in 0..states {
        let row: Vec<f64> = (0..states).map(|_| rng.random::<f64>().powi(3) + 1e-3).collect();
        let total: f64 = row.iter().sum();
        for j in 0..states {
            m[i * states + j] = row[j] / total;
        }
    }
    FiniteKernel::from_dense((0..states as i64).collect(), &m).unwrap()
}

fn matmul(a: &[f64], b: &[f64], s: usize) -> Vec<f64> {
    let mut c = vec![0.0; s * s];
    for i in 0..s {
        for k in 0..s {
            for j in 0..s {
                c[i * s + j] += a[i * s + k] * b[k * s + j];
            }
        }
    }
    c
}

fn power(k: &FiniteKernel, n: usize) -> Vec<f64> {
    let s = k.len();
    let d = k.dense();
    let mut p: Vec<f64> = (0..s * s).map(|i| if i / s == i % s { 1.0 } else { 0.0 }).collect();
    for _ in 0..n {
        p = matmul(&p, &d, s);
    }
    p
}

/// `sup_{A,B} |P(Y₀∈A, Y_n∈B) − π(A)π(B)|` over all pairs of state subsets.
fn brute_alpha(k: &FiniteKernel, n: usize) -> f64 {
    let s = k.len();
    let pi = k.stationary();
    let kn = power(k, n);
    let mut best = 0.0f64;
    for a in 0u32..(1 << s) {
        for b in 0u32..(1 << s) {
            let mut joint = 0.0;
            let (mut pa, mut pb) = (0.0, 0.0);
            for i in 0..s {
                if a >> i & 1 == 1 {
                    pa += pi[i];
                    for j in 0..s {
                        if b >> j & 1 == 1 {
                            joint += pi[i] * kn[i * s + j];
                        }
                    }
                }
                if b >> i & 1 == 1 {
                    pb += pi[i];
                }
            }
            best = best.max((joint - pa * pb).abs());
        }
    }
    best
}

/// `sup_{i ≥ n} sup_{x, s} |P(Y_i ≤ x | Y₀ = s) − P(Y₀ ≤ x)|`, the sup over
/// `i` taken on `n ≤ i < n + 40`.
fn brute_phi1(k: &FiniteKernel, n: usize) -> f64 {
    let s = k.len();
    let pi = k.stationary();
    let mut best = 0.0f64;
    for i in n..n + 40 {
        let kn = power(k, i);
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

#[test]
fn alpha_and_phi1_match_definitions_on_random_small_chains() {
    for case in 0..50u64 {
        let s = 2 + (case as usize % 8);
        let k = random_kernel(s, 100 + case);
        for n in [1, 2, 3] {
            let a = alpha1_exact(&k, None, n).unwrap();
            assert_eq!(a.method, CoefficientMethod::Exact);
            let b = brute_alpha(&k, n);
            assert!((a.value - b).abs() < 1e-12, "case {case} n={n}: {} vs {b}", a.value);
            let p = phi_coeff(&k, None, 1, n, DEFAULT_GAP_CAP).unwrap();
            let q = brute_phi1(&k, n);
            assert!((p.value - q).abs() < 1e-12, "case {case} n={n}: {} vs {q}", p.value);
        }
    }
}

#[test]
fn two_state_flip_chain_alpha() {
    for q in [0.1, 0.3, 0.5, 0.8] {
        let k = FiniteKernel::from_dense(vec![0, 1], &[1.0 - q, q, q, 1.0 - q]).unwrap();
        for n in 1..6 {
            let a = alpha1_exact(&k, None, n).unwrap().value;
            let want = (1.0f64 - 2.0 * q).abs().powi(n as i32) / 4.0;
            assert!((a - want).abs() < 1e-14);
        }
    }
}

#[test]
fn profile_on_davydov_chain() {
    let chain = DavydovChain::new(&ARule::Schedule { p: 2.5, eps: 0.1 }, 24).unwrap();
    let f = chain.functional(&Functional::F1).unwrap();
    let prof = DependenceProfile::compute(&chain, Some(&f), None, 40, 16).unwrap();
    prof.validate().unwrap();
    let mut csv = Vec::new();
    prof.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 41);
    assert!(prof.to_json().unwrap().contains("\"method\""));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn coefficients_are_ordered_and_monotone(s in 2usize..7, seed in any::<u64>()) {
        let k = random_kernel(s, seed);
        let prof = DependenceProfile::compute(&k, None, None, 12, 8).unwrap();
        prof.validate().unwrap();
        for i in 0..12 {
            prop_assert!(prof.phi1[i].value <= prof.phi2[i].value + 1e-12);
            prop_assert!((0.0..=1.0).contains(&prof.alpha1[i].value));
            // α(A, B) ≤ φ(A, B) / 2 is not general for φ_{1,Y}; only α ≤ 1/4
            prop_assert!(prof.alpha1[i].value <= 0.25 + 1e-15);
        }
    }

    #[test]
    fn a_n_is_dominated_by_four_b_n(
        lo in -6i64..6,
        coeffs in prop::collection::vec(-2.0f64..2.0, 1..12),
        n in 1usize..40,
    ) {
        let r = an_bn(&CoeffRule::Finite { offset: lo, coeffs }, n).unwrap();
        prop_assert!(r.a_n >= 0.0);
        prop_assert!(r.a_n <= 4.0 * r.b_n * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn a_n_bound_for_infinite_rules(rho in -0.95f64..0.95, decay in 1.2f64..3.0, n in 1usize..200) {
        for rule in [
            CoeffRule::Geometric { rho, scale: 1.0 },
            CoeffRule::Polynomial { decay, scale: 1.0, two_sided: true },
        ] {
            let r = an_bn(&rule, n).unwrap();
            prop_assert!(r.a_n <= 4.0 * r.b_n * (1.0 + 1e-12));
        }
    }

    #[test]
    fn envelope_contraction_on_davydov_chain(
        values in prop::collection::vec(-3.0f64..3.0, 9),
        mix in prop::collection::vec(-1.0f64..1.0, 9),
        p in 2.0f64..3.0,
    ) {
        let chain = DavydovChain::new(&ARule::Schedule { p: 2.5, eps: 0.1 }, 4).unwrap();
        let k = chain.kernel().unwrap();
        let r = envelope_contraction_check(&k, |s, t| values[t] + mix[s] * values[s], p).unwrap();
        prop_assert!(r.ok, "{} > {}", r.lhs, r.rhs);
    }

    #[test]
    fn three_point_monotone_steps_satisfy_covariance_bounds(
        seed in any::<u64>(),
        l1 in 0usize..4,
        l2 in 0usize..4,
    ) {
        let chain = DavydovChain::new(&ARule::Schedule { p: 2.5, eps: 0.1 }, 5).unwrap();
        let k = chain.kernel().unwrap();
        let mut rng = stream(seed, 0, 3, StreamRole::Synthetic);
        let fs: Vec<DeclaredFunctional> = (0..3)
            .map(|_| {
                let start = rng.random_range(-5i64..=0);
                let len = rng.random_range(1usize..=6);
                let mut v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
                v.sort_by(f64::total_cmp);
                DeclaredFunctional { pieces: vec![MonotonePiece { weight: 1.0, start, values: v }] }
            })
            .collect();
        let times = [0, 1 + l1, 2 + l1 + l2];
        let c = check_covariance_inequality(&k, &fs, &times, None).unwrap();
        prop_assert!(c.ok, "lhs {} rhs {:?}", c.lhs, c.rhs_forms);
    }
}

#[test]
fn davydov_f1_pair_covariance_by_matrix_oracle() {
    let chain = DavydovChain::new(&ARule::Schedule { p: 2.5, eps: 0.1 }, 6).unwrap();
    let k = chain.kernel().unwrap();
    let f = chain.functional(&Functional::F1).unwrap();
    let labels = k.states().to_vec();
    let piece = |sign: f64| MonotonePiece { weight: 0.5, start: -1, values: vec![-sign, 0.0, sign] };
    // f₁ = 1{1} − 1{−1}: one increasing piece on {−1, 0, 1} at full weight
    let decl = DeclaredFunctional { pieces: vec![piece(1.0), piece(1.0)] };
    assert_eq!(decl.values_on(&labels), f);
    let c = check_covariance_inequality(&k, &[decl.clone(), decl], &[0, 3], None).unwrap();
    let s = k.len();
    let pi = k.stationary();
    let k3 = power(&k, 3);
    let mean: f64 = pi.iter().zip(&f).map(|(a, b)| a * b).sum();
    let mut want = 0.0;
    for i in 0..s {
        for j in 0..s {
            want += pi[i] * k3[i * s + j] * (f[i] - mean) * (f[j] - mean);
        }
    }
    assert!((c.lhs - want.abs()).abs() < 1e-15);
    assert!(c.ok);
}

#[test]
fn conditional_second_moment_matches_nested_monte_carlo() {
    let k = random_kernel(7, 9);
    let f = [1.0, -0.5, 2.0, 0.0, -1.5, 0.3, 0.8];
    let n = 5;
    let exact = conditional_second_moment(&k, &f, n).unwrap();
    let reps = 200_000u64;
    for s0 in 0..7 {
        let mut rng = stream(77, s0 as u64, n as u64, StreamRole::Transitions);
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..reps {
            let mut s = s0;
            let mut sum = 0.0;
            for _ in 0..n {
                s = k.step(s, &mut rng);
                sum += f[s];
            }
            let v = sum * sum;
            m1 += v;
            m2 += v * v;
        }
        let mean = m1 / reps as f64;
        let se = ((m2 / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!((mean - exact[s0]).abs() < 4.0 * se, "state {s0}: {mean} vs {}", exact[s0]);
    }
}

fn davydov_spec(functional: Functional, cap: usize) -> ProcessSpec {
    ProcessSpec {
        family: ProcessFamily::DavydovChain(DavydovSpec {
            a_rule: ARule::Schedule { p: 2.5, eps: 0.1 },
            state_cap: cap,
            functional,
        }),
        seed: 3,
        p_moment: 2.5,
    }
}

fn linear_spec(rule: CoeffRule, innovation: InnovationLaw, p: f64) -> ProcessSpec {
    ProcessSpec {
        family: ProcessFamily::LinearProcess(LinearSpec { coefficients: rule, innovation, tail_tol: 1e-12 }),
        seed: 3,
        p_moment: p,
    }
}

#[test]
fn martingale_chain_has_vanishing_adapted_series() {
    let pp = PreparedProcess::new(&davydov_spec(Functional::F1, 256)).unwrap();
    let cfg = SeriesConfig::default();
    for which in [ConditionId::Cond1cob, ConditionId::Condcobp3adap] {
        let r = series_projective(&pp, which, 128, &cfg).unwrap();
        assert!(r.terms.iter().all(|t| *t == 0.0));
        assert_eq!(r.verdict, Verdict::Converged);
    }
    let (c1, c2) = series_c1_c2(&pp, 128, &cfg).unwrap();
    for r in [&c1, &c2] {
        r.validate().unwrap();
        assert!(r.terms.iter().all(|t| *t > 0.0));
    }
}

#[test]
fn verdicts_agree_across_term_counts() {
    let pp = PreparedProcess::new(&davydov_spec(Functional::F1, 512)).unwrap();
    let cfg = SeriesConfig::default();
    let short = evaluate_conditions(&pp, 1 << 6, &cfg).unwrap();
    let long = evaluate_conditions(&pp, 1 << 7, &cfg).unwrap();
    for (a, b) in short.iter().zip(&long) {
        assert_eq!(a.id, b.id);
        let clash = matches!(
            (a.verdict, b.verdict),
            (Verdict::Converged, Verdict::Diverging) | (Verdict::Diverging, Verdict::Converged)
        );
        assert!(!clash, "{}: {:?} then {:?}", a.id.label(), a.verdict, b.verdict);
        // the shared terms coincide up to quadrature splitting
        for (x, y) in a.terms.iter().zip(&b.terms) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300), "{}: {x} vs {y}", a.id.label());
        }
    }
}

#[test]
fn iid_baseline_terms_vanish() {
    let spec = ProcessSpec {
        family: ProcessFamily::IidBaseline(IidSpec { law: InnovationLaw::Gaussian }),
        seed: 0,
        p_moment: 3.0,
    };
    let pp = PreparedProcess::new(&spec).unwrap();
    for r in evaluate_conditions(&pp, 64, &SeriesConfig::default()).unwrap() {
        assert_eq!(r.total(), 0.0, "{}", r.id.label());
        assert_eq!(r.verdict, Verdict::Converged);
    }
}

#[test]
fn finite_support_tail_vanishes_beyond_support() {
    let rule = CoeffRule::Finite { offset: 0, coeffs: vec![1.0, 0.5, -0.25, 0.125] };
    let pp = PreparedProcess::new(&linear_spec(rule, InnovationLaw::Gaussian, 3.0)).unwrap();
    let r = series_projective(&pp, ConditionId::Condcobp3adap, 32, &SeriesConfig::default()).unwrap();
    assert!(r.terms[..3].iter().all(|t| *t > 0.0));
    assert!(r.terms[3..].iter().all(|t| *t == 0.0));
    let c = series_projective(&pp, ConditionId::Cond1cob, 32, &SeriesConfig::default()).unwrap();
    assert!(c.terms[4..].iter().all(|t| *t == 0.0));
}

#[test]
fn geometric_linear_cond1cob_ratio_is_rho() {
    let rho = 0.7;
    let pp = PreparedProcess::new(&linear_spec(CoeffRule::Geometric { rho, scale: 1.0 }, InnovationLaw::Gaussian, 2.5))
        .unwrap();
    let r = series_projective(&pp, ConditionId::Cond1cob, 40, &SeriesConfig::default()).unwrap();
    // truncation at the ℓ² tolerance bends the ratio only near the cut
    for w in r.terms[..12].windows(2) {
        assert!((w[1] / w[0] - rho).abs() < 1e-6);
    }
    assert_eq!(r.verdict, Verdict::Converged);
    assert_eq!(r.method, "closed-form");
}

#[test]
fn gaussian_conditional_variance_terms_match_sampling() {
    // ‖E(S_n²/n | F₀) − σ_n²‖_{p/2} with the past weights built directly
    let (rho, p, n) = (0.5f64, 2.5, 4usize);
    let pp = PreparedProcess::new(&linear_spec(CoeffRule::Geometric { rho, scale: 1.0 }, InnovationLaw::Gaussian, p))
        .unwrap();
    let r = series_projective(&pp, ConditionId::Cond2cob, n, &SeriesConfig::default()).unwrap();
    // past innovation ε_{−m}, m ≥ 0, enters S_n with weight Σ_{k=1}^n ρ^{k+m}
    let s2: f64 = (0..200).map(|m| (1..=n).map(|k| rho.powi((k + m) as i32)).sum::<f64>().powi(2)).sum();
    let mut rng = stream(5, 0, 0, StreamRole::Synthetic);
    let draws = 400_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let z: f64 = InnovationLaw::Gaussian.sample(&mut rng);
        acc += (s2 * (z * z - 1.0) / n as f64).abs().powf(p / 2.0);
    }
    let norm = (acc / draws as f64).powf(2.0 / p);
    let want = (n as f64).powf(-2.0 + p / 2.0) * norm;
    assert!((r.terms[n - 1] - want).abs() < 5e-3 * want, "{} vs {want}", r.terms[n - 1]);
}

#[test]
fn non_gaussian_linear_series_carry_standard_errors() {
    let pp = PreparedProcess::new(&linear_spec(
        CoeffRule::Geometric { rho: 0.5, scale: 1.0 },
        InnovationLaw::Rademacher,
        2.5,
    ))
    .unwrap();
    let cfg = SeriesConfig { outer_draws: 2000, seed: 1, gap_cap: 8 };
    let (c1, c2) = series_c1_c2(&pp, 16, &cfg).unwrap();
    for r in [&c1, &c2] {
        assert_eq!(r.method, "monte-carlo");
        let se = r.stderr.as_ref().unwrap();
        assert!(se.iter().zip(&r.terms).all(|(s, t)| *s >= 0.0 && *s < *t));
    }
    let again = series_c1_c2(&pp, 16, &cfg).unwrap();
    assert_eq!(again.0.terms, c1.terms);
}

#[test]
fn heyde_and_an_bound_for_geometric_rule() {
    let rule = CoeffRule::Geometric { rho: 0.5, scale: 1.0 };
    let h = series_heyde(&rule, 2.5, 256).unwrap();
    assert_eq!(h.verdict, Verdict::Converged);
    let (an, values) = series_an_bound(&rule, 2.5, 16).unwrap();
    assert_eq!(an.verdict, Verdict::Converged);
    assert!(values.windows(2).all(|w| w[1].a_n >= w[0].a_n - 1e-12));
    // A_n ↑ 2 Σ_{i≥1} T(i)² = 8/3 with T(i) = 2^{1−i}
    assert!((values[16].a_n - 8.0 / 3.0).abs() < 1e-9);
}

#[test]
fn condphi_geometric_converges() {
    let phi: Vec<f64> = (1..=256).map(|i| 0.8f64.powi(i)).collect();
    let r = series_condphi(&phi, 2.5, 4.0).unwrap();
    assert_eq!(r.verdict, Verdict::Converged);
    let z = series_condphi(&[0.0; 64], 2.5, 4.0).unwrap();
    assert_eq!(z.total(), 0.0);
}

#[test]
fn coboundary_martingale_variance() {
    let spec = LinearSpec {
        coefficients: CoeffRule::Geometric { rho: 0.6, scale: 1.0 },
        innovation: InnovationLaw::Uniform,
        tail_tol: 1e-12,
    };
    let dec = coboundary(&spec, 3.0).unwrap();
    let lin = TruncatedLinear::new(&spec, 3.0).unwrap();
    // D_k = A ε_k with A = Σ_{j ≤ hi} 0.6^j, so Var(M_n)/n = A² for unit-variance ε
    let want = 2.5 * (1.0 - 0.6f64.powi(lin.hi() as i32 + 1));
    assert!((dec.a_sum - want).abs() < 1e-13);
    assert!(dec.truncation_tolerance <= 1e-12);
}
