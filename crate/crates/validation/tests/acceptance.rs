//! The fourteen acceptance criteria, one `PASS`/`FAIL` line each.
//!
//! Rate criteria run with the fixed seed 7; nothing here is tuned to the
//! outcome. Criteria whose curves sit on the Monte Carlo floor fail honestly
//! and say why in their detail line.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use cltlab_core::dependence::*;
use cltlab_core::experiments::*;
use cltlab_core::metrics::*;
use cltlab_core::processes::*;
use cltlab_core::rng::{stream, Stream, StreamRole};
use cltlab_validation::*;
use rand::Rng;

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(case: u64, criterion: u64) -> Stream {
    stream(SEED, case, criterion, StreamRole::Synthetic)
}

fn emp(v: Vec<f64>) -> EmpiricalDistribution {
    EmpiricalDistribution::new(v).unwrap()
}

fn random_kernel(states: usize, case: u64) -> FiniteKernel {
    let mut g = rng(case, 7);
    let mut m = vec![0.0; states * states];
    for i in 0..states {
        let row: Vec<f64> = (0..states).map(|_| g.random::<f64>().powi(3) + 1e-3).collect();
        let total: f64 = row.iter().sum();
        for j in 0..states {
            m[i * states + j] = row[j] / total;
        }
    }
    FiniteKernel::from_dense((0..states as i64).collect(), &m).unwrap()
}

// ---- criteria -----------------------------------------------------------

fn assignment_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let mut g = rng(case, 1);
        let m = 1 + (case as usize % 7);
        let x: Vec<f64> = (0..m).map(|_| g.random::<f64>()).collect();
        let y: Vec<f64> = (0..m).map(|_| g.random::<f64>()).collect();
        let r = [0.5, 1.0, 1.5, 2.0, 2.5][case as usize % 5];
        let got = wasserstein_samples(&emp(x.clone()), &emp(y.clone()), r).unwrap().value;
        worst = worst.max((got - permutation_minimum(&x, &y, r)).abs());
    }
    outcome(worst <= 1e-10, format!("max |W − permutation minimum| = {worst:.2e} over 200 pairs"))
}

fn gaussian_closed_form() -> Outcome {
    let x = EmpiricalDistribution::gaussian_quantile_grid(1_000_000, 2.0).unwrap();
    let g = GaussianLaw::standard();
    // |2 − 1|·(E|Y|^r)^{1/r}: E|Y| = √(2/π), E|Y|² = 1
    let want = [(1.0, (2.0 / PI).sqrt()), (2.0, 1.0)];
    let mut worst = 0.0f64;
    for (r, w) in want {
        worst = worst.max((wasserstein_vs_gaussian(&x, &g, r).unwrap().value - w).abs());
    }
    outcome(worst <= 1e-4, format!("max deviation {worst:.2e} for r ∈ {{1, 2}}"))
}

fn kantorovich_rubinstein() -> Outcome {
    let mut mismatches = 0;
    for case in 0..100u64 {
        let mut g = rng(case, 3);
        let (m1, m2) = (1 + (case as usize * 7) % 40, 1 + (case as usize * 13) % 40);
        let x: Vec<f64> = (0..m1).map(|_| g.random::<f64>() * 6.0 - 3.0).collect();
        let y: Vec<f64> = (0..m2).map(|_| g.random::<f64>() * 6.0 - 3.0).collect();
        let r = 0.1 + 0.9 * g.random::<f64>();
        let r = if case % 10 == 0 { 1.0 } else { r };
        let (a, b) = (emp(x), emp(y));
        let w = wasserstein_samples(&a, &b, r).unwrap();
        let z = zolotarev(&Law::from(a), &Law::from(b), r).unwrap();
        if w != z {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 100 pairs differ"))
}

fn iid_plan(law: InnovationLaw, p: f64, log2: std::ops::RangeInclusive<u32>) -> ExperimentPlan {
    let spec = ProcessSpec { family: ProcessFamily::IidBaseline(IidSpec { law }), seed: SEED, p_moment: p };
    let mut plan = ExperimentPlan::new(spec, vec![1.0], Target::Sigma2, SEED);
    plan.n_grid = log2.map(|k| 1u64 << k).collect();
    plan.replicates = 10_000;
    plan
}

fn curve_line(res: &RateFitResult, r: f64) -> String {
    let c = res.curve(r).unwrap();
    let usable = res.points_for(r).filter(|p| p.usable).count();
    let total = res.points_for(r).count();
    let slope = |f: &Option<PowerFit>| f.as_ref().map(|f| format!("{:+.3}±{:.3}", f.slope, f.slope_se)).unwrap_or("—".into());
    format!(
        "r = {r}: verdict {:?}, usable {usable}/{total}, slope {} (raw {}), predicted {:+.3}",
        c.verdict,
        slope(&c.fit),
        slope(&c.raw_fit),
        c.theory.w_exp
    )
}

fn null_floor() -> Outcome {
    let res = run_experiment(&iid_plan(InnovationLaw::Gaussian, 2.5, 6..=12)).unwrap();
    let outside: Vec<String> = res
        .points
        .iter()
        .filter(|q| !(q.value <= 2.0 * q.floor && q.value >= 0.5 * q.floor))
        .map(|q| format!("n={}: {:.4e} vs floor {:.4e}", q.n, q.value, q.floor))
        .collect();
    let raw = res.curve(1.0).unwrap().raw_fit.as_ref().map(|f| f.slope);
    let flat = raw.map(|s| s.abs() < 0.05).unwrap_or(false);
    let mut detail = format!("{} of {} points outside ×2 of the floor; ", outside.len(), res.points.len());
    detail += &curve_line(&res, 1.0);
    if !flat {
        detail += " — the slope of a floor-level curve is pure Monte Carlo noise (se ≈ 0.1 at M = 10⁴)";
    }
    outcome(outside.is_empty() && flat, detail)
}

fn consistent(res: &RateFitResult, r: f64) -> bool {
    res.curve(r).map(|c| c.verdict == RateVerdict::UpperBoundConsistent).unwrap_or(false)
}

fn floor_note(res: &RateFitResult, r: f64) -> &'static str {
    if res.curve(r).map(|c| c.verdict == RateVerdict::Inconclusive).unwrap_or(false) {
        " — fewer than 4 grid points above 3× the Monte Carlo floor"
    } else {
        ""
    }
}

fn iid_lp_rate() -> Outcome {
    let res = run_experiment(&iid_plan(InnovationLaw::SymmetricPareto { tail_index: None }, 2.5, 6..=14)).unwrap();
    let ok = consistent(&res, 1.0) && (res.curve(1.0).unwrap().theory.w_exp + 0.25).abs() < 1e-12;
    outcome(ok, format!("{}{}", curve_line(&res, 1.0), floor_note(&res, 1.0)))
}

fn davydov_spec() -> ProcessSpec {
    ProcessSpec {
        family: ProcessFamily::DavydovChain(DavydovSpec {
            a_rule: ARule::Schedule { p: 2.5, eps: 0.1 },
            state_cap: 4096,
            functional: Functional::F1,
        }),
        seed: SEED,
        p_moment: 2.5,
    }
}

fn davydov_experiment() -> Outcome {
    let process = PreparedProcess::new(&davydov_spec()).unwrap();
    let (a, b, _) = condalpha1_for_chain(&process, 1024).unwrap();
    let conds_ok = a.verdict == Verdict::Converged && b.verdict == Verdict::Converged;
    let mut plan = ExperimentPlan::new(davydov_spec(), vec![1.0, 2.5], Target::SigmaN2, SEED);
    plan.n_grid = (6..=14).map(|k| 1u64 << k).collect();
    plan.replicates = 10_000;
    let res = run_experiment(&plan).unwrap();
    let exps_ok = (res.curve(2.5).unwrap().theory.w_exp + 0.1).abs() < 1e-12
        && (res.curve(1.0).unwrap().theory.w_exp + 0.25).abs() < 1e-12;
    let ok = conds_ok && exps_ok && consistent(&res, 1.0) && consistent(&res, 2.5);
    outcome(
        ok,
        format!(
            "condalpha1-a {:?}, condalpha1-b {:?}; {}{}; {}{}",
            a.verdict,
            b.verdict,
            curve_line(&res, 1.0),
            floor_note(&res, 1.0),
            curve_line(&res, 2.5),
            floor_note(&res, 2.5)
        ),
    )
}

fn exact_coefficients() -> Outcome {
    let mut worst = 0.0f64;
    let mut inexact = 0;
    for case in 0..50u64 {
        let s = 2 + (case as usize % 8);
        let k = random_kernel(s, case);
        for n in [1, 2, 3] {
            let a = alpha1_exact(&k, None, n).unwrap();
            let p = phi_coeff(&k, None, 1, n, DEFAULT_GAP_CAP).unwrap();
            if a.method != CoefficientMethod::Exact || p.method != CoefficientMethod::Exact {
                inexact += 1;
            }
            worst = worst.max((a.value - alpha_by_subsets(&k, n)).abs());
            worst = worst.max((p.value - phi1_by_definition(&k, n)).abs());
        }
    }
    outcome(worst <= 1e-12 && inexact == 0, format!("max deviation {worst:.2e} over 50 kernels with 2–9 states"))
}

fn random_functional(g: &mut Stream, cap: i64) -> DeclaredFunctional {
    let pieces = 1 + (g.random::<f64>() * 2.0) as usize;
    let weights: Vec<f64> = (0..pieces).map(|_| 0.1 + g.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    DeclaredFunctional {
        pieces: weights
            .iter()
            .map(|w| {
                let start = g.random_range(-cap..=cap);
                let len = g.random_range(1..=(cap - start + 1)) as usize;
                let mut values: Vec<f64> = (0..len).map(|_| g.random::<f64>() * 2.0 - 1.0).collect();
                values.sort_by(f64::total_cmp);
                if g.random::<bool>() {
                    values.reverse();
                }
                MonotonePiece { weight: w / total, start, values }
            })
            .collect(),
    }
}

fn covariance_inequalities() -> Outcome {
    let kernel = DavydovChain::new(&ARule::Schedule { p: 2.5, eps: 0.1 }, 5).unwrap().kernel().unwrap();
    let (mut violations, mut worst_lhs) = (0, 0.0f64);
    for case in 0..500u64 {
        let mut g = rng(case, 8);
        let k = 2 + (case as usize % 2);
        let fs: Vec<DeclaredFunctional> = (0..k).map(|_| random_functional(&mut g, 5)).collect();
        let mut times = vec![0usize];
        for _ in 1..k {
            times.push(times.last().unwrap() + g.random_range(1..=5));
        }
        let c = check_covariance_inequality(&kernel, &fs, &times, None).unwrap();
        let vals: Vec<Vec<f64>> = fs.iter().map(|f| f.values_on(kernel.states())).collect();
        let oracle = centred_product_by_paths(&kernel, &vals, &times).abs();
        worst_lhs = worst_lhs.max((c.lhs - oracle).abs());
        if !c.ok || c.lhs > c.min_rhs() * (1.0 + COVARIANCE_SLACK) + c.roundoff {
            violations += 1;
        }
    }
    outcome(
        violations == 0 && worst_lhs <= 1e-12,
        format!("{violations} violations in 500 configurations; lhs vs path-sum oracle within {worst_lhs:.1e}"),
    )
}

fn coboundary_identity() -> Outcome {
    let spec = LinearSpec {
        coefficients: CoeffRule::Geometric { rho: 0.6, scale: 1.0 },
        innovation: InnovationLaw::Gaussian,
        tail_tol: 1e-12,
    };
    let n = 1024;
    let lin = TruncatedLinear::new(&spec, 3.0).unwrap();
    let dec = coboundary(&spec, 3.0).unwrap();
    let (first, last) = dec.innovation_range(n);
    let mut worst = 0.0f64;
    for path in 0..100u64 {
        let mut g = stream(SEED, path, n as u64, StreamRole::Innovations);
        let eps: Vec<f64> = (first..=last).map(|_| spec.innovation.sample(&mut g)).collect();
        let x: Vec<f64> = (1..=n as i64)
            .map(|k| (lin.lo()..=lin.hi()).map(|j| lin.coefficient(j) * eps[(k - j - first) as usize]).sum())
            .collect();
        worst = worst.max(dec.residuals(&x, &eps, first).into_iter().fold(0.0, f64::max));
    }
    outcome(worst <= 1e-8, format!("max residual {worst:.2e} over 100 paths, n ≤ 2¹⁰"))
}

fn an_bn_bounds() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_direct = 0.0f64;
    for case in 0..100u64 {
        let mut g = rng(case, 10);
        let n = g.random_range(1..=200usize);
        let rule = match case % 3 {
            0 => CoeffRule::Finite {
                offset: g.random_range(-6..=6),
                coeffs: (0..g.random_range(1..=12)).map(|_| g.random::<f64>() * 4.0 - 2.0).collect(),
            },
            1 => CoeffRule::Geometric { rho: g.random::<f64>() * 1.9 - 0.95, scale: 0.1 + g.random::<f64>() * 1.9 },
            _ => CoeffRule::Polynomial { decay: 1.2 + g.random::<f64>() * 1.8, scale: 1.0, two_sided: g.random() },
        };
        let r = an_bn(&rule, n).unwrap();
        if let CoeffRule::Finite { offset, coeffs } = &rule {
            worst_direct = worst_direct.max((r.a_n - a_n_direct(*offset, coeffs, n)).abs() / r.a_n.max(1.0));
            worst_direct = worst_direct.max((r.b_n - b_n_direct(*offset, coeffs, n)).abs() / r.b_n.max(1.0));
        }
        if !(r.a_upper() <= 4.0 * r.b_n * (1.0 + 1e-12)) {
            failures.push(format!("case {case}"));
        }
    }
    // Heyde-type geometric rules: A_n = E(Z_1 − Z_{n+1})² with
    // Z_k = Σ_{i≥1} T(i) ε_{k−i}, T(i) = sρ^i/(1−ρ), so
    // A_n = 2s²ρ²(1 − ρ^n)/((1−ρ)²(1−ρ²)), bounded by twice its limit.
    let mut heyde = Vec::new();
    for (rho, scale) in [(0.5f64, 1.0f64), (-0.7, 1.0), (0.9, 0.3)] {
        let rule = CoeffRule::Geometric { rho, scale };
        let (rep, values) = series_an_bound(&rule, 3.0, 16).unwrap();
        let limit = 2.0 * scale * scale * rho * rho / ((1.0 - rho) * (1.0 - rho) * (1.0 - rho * rho));
        let closed_form = values.iter().all(|v| {
            let want = limit * (1.0 - rho.powi(v.n as i32));
            (v.a_upper() - want).abs() <= 1e-9 * limit
        });
        let bounded = values.iter().all(|v| v.a_upper() <= 2.0 * limit);
        heyde.push(rep.verdict == Verdict::Converged && closed_form && bounded);
    }
    for rule in [CoeffRule::Polynomial { decay: 2.5, scale: 1.0, two_sided: true }] {
        let (rep, values) = series_an_bound(&rule, 3.0, 16).unwrap();
        let sup = values.iter().map(|v| v.a_upper()).fold(0.0, f64::max);
        heyde.push(rep.verdict == Verdict::Converged && sup.is_finite());
    }
    let heyde_ok = heyde.iter().all(|b| *b);
    outcome(
        failures.is_empty() && worst_direct <= 1e-10 && heyde_ok,
        format!(
            "{} of 100 rules violate A_n ≤ 4B_n; finite rules match the direct sums within {worst_direct:.1e}; \
             Heyde configurations bounded: {heyde:?}",
            failures.len()
        ),
    )
}

fn smoothing_lemma() -> Outcome {
    let suite = smoothing_suite();
    let boundary = suite.iter().filter(|c| c.p == c.r).count();
    let mut failed = Vec::new();
    let mut worst = 0.0f64;
    for case in &suite {
        let c = case.check().unwrap();
        worst = worst.max(if c.rhs > 0.0 { c.lhs / c.rhs } else { 0.0 });
        if !c.ok {
            failed.push(format!("{case:?}"));
        }
    }
    outcome(
        failed.is_empty() && suite.len() == 50 && boundary > 0,
        format!("{} of {} cases fail ({boundary} boundary cases, c_{{r,r}} = 1); worst lhs/rhs {worst:.4}", failed.len(), suite.len()),
    )
}

fn envelope_contraction() -> Outcome {
    let kernel = DavydovChain::new(&ARule::Schedule { p: 2.5, eps: 0.1 }, 4).unwrap().kernel().unwrap();
    let s = kernel.len();
    let mut failures = 0;
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let mut g = rng(case, 12);
        let table: Vec<f64> = (0..s * s).map(|_| g.random::<f64>() * 6.0 - 3.0).collect();
        let p = 2.0 + g.random::<f64>();
        let r = envelope_contraction_check(&kernel, |a, b| table[a * s + b], p).unwrap();
        worst = worst.max(if r.rhs > 0.0 { r.lhs / r.rhs } else { 0.0 });
        if r.lhs > r.rhs * (1.0 + 1e-9) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} failures in 100 functionals; worst lhs/rhs {worst:.4}"))
}

fn transfer_duality() -> Outcome {
    let kind = MapKind::Beta { beta: 2.0 };
    let density = invariant_density(&kind).unwrap();
    let mut worst = 0.0f64;
    for i in 0..=5 {
        for j in 0..=5 {
            let h = move |x: f64| x.powi(i);
            let f = move |x: f64| x.powi(j);
            worst = worst.max(duality_residual(&kind, &density, &h, &f).unwrap());
        }
    }
    outcome(worst < 1e-8, format!("max residual {worst:.2e} over degrees ≤ 5"))
}

fn expanding_map_rate() -> Outcome {
    let spec = ProcessSpec {
        family: ProcessFamily::ExpandingMap(MapSpec {
            map: MapKind::Beta { beta: 2.0 },
            observable: Observable::Identity,
            burn_in: 64,
        }),
        seed: SEED,
        p_moment: 3.0,
    };
    let mut plan = ExperimentPlan::new(spec, vec![1.0], Target::Sigma2, SEED);
    plan.n_grid = (6..=13).map(|k| 1u64 << k).collect();
    plan.replicates = 10_000;
    let res = run_experiment(&plan).unwrap();
    let c = res.curve(1.0).unwrap();
    let log_reported = c.theory.log_factor && c.log_fit.is_some();
    let log = c
        .log_fit
        .as_ref()
        .map(|l| format!("log-augmented fit: slope {:+.3}, log power {:+.3}", l.slope, l.log_power))
        .unwrap_or_else(|| "no log-augmented fit".into());
    outcome(consistent(&res, 1.0) && log_reported, format!("{}{}; {log}", curve_line(&res, 1.0), floor_note(&res, 1.0)))
}

#[test]
fn acceptance() {
    type Criterion = (u32, &'static str, fn() -> Outcome, Duration);
    let criteria: [Criterion; 14] = [
        (1, "assignment oracle", assignment_oracle, Duration::from_secs(5)),
        (2, "Gaussian closed form", gaussian_closed_form, Duration::from_secs(10)),
        (3, "Kantorovich–Rubinstein", kantorovich_rubinstein, Duration::MAX),
        (4, "null-model floor", null_floor, Duration::from_secs(120)),
        (5, "IID L^p rate", iid_lp_rate, Duration::from_secs(600)),
        (6, "Davydov MDS experiment", davydov_experiment, Duration::from_secs(900)),
        (7, "exact φ/α oracles", exact_coefficients, Duration::from_secs(60)),
        (8, "covariance inequalities", covariance_inequalities, Duration::from_secs(120)),
        (9, "coboundary identity", coboundary_identity, Duration::from_secs(60)),
        (10, "A_n ≤ 4B_n", an_bn_bounds, Duration::from_secs(60)),
        (11, "smoothing lemma", smoothing_lemma, Duration::from_secs(60)),
        (12, "envelope contraction", envelope_contraction, Duration::MAX),
        (13, "transfer-operator duality", transfer_duality, Duration::MAX),
        (14, "expanding-map rate", expanding_map_rate, Duration::from_secs(600)),
    ];
    let mut failed = Vec::new();
    for (id, name, run, limit) in criteria {
        let t = Instant::now();
        let o = run();
        let elapsed = t.elapsed();
        let in_time = elapsed <= limit;
        let pass = o.pass && in_time;
        let timing = if in_time { String::new() } else { format!(" [over the {limit:?} limit]") };
        println!(
            "criterion {id:>2} {:<4} {name} ({:.1} s): {}{timing}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            o.detail
        );
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
