use cltlab_core::experiments::*;
use cltlab_core::processes::*;
use proptest::prelude::*;

fn plan(family: ProcessFamily, p: f64, r_list: Vec<f64>, target: Target) -> ExperimentPlan {
    let spec = ProcessSpec { family, seed: 3, p_moment: p };
    let mut plan = ExperimentPlan::new(spec, r_list, target, 21);
    plan.n_grid = vec![2, 4, 8, 16, 32, 64];
    plan.replicates = 500;
    plan.bootstrap = 20;
    plan.calibration_reps = 10;
    plan
}

fn pareto_plan() -> ExperimentPlan {
    plan(
        ProcessFamily::IidBaseline(IidSpec { law: InnovationLaw::SymmetricPareto { tail_index: None } }),
        2.5,
        vec![0.5, 1.0, 2.5],
        Target::SigmaN2,
    )
}

#[test]
fn thread_count_does_not_change_results() {
    let p = pareto_plan();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_experiment(&p).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
    assert_eq!(to_json(&a).unwrap(), to_json(&b).unwrap());
    assert_eq!(render_svg(&a), render_svg(&b));
}

#[test]
fn plan_invariants() {
    let mut p = pareto_plan();
    p.validate().unwrap();
    p.target = Target::Sigma2;
    let e = p.validate().unwrap_err().to_string();
    assert!(e.contains("sigma_n2"), "{e}");
    let mut p = pareto_plan();
    p.n_grid = vec![2, 6];
    assert!(p.validate().unwrap_err().to_string().contains("powers of two"));
    let mut p = pareto_plan();
    p.r_list = vec![0.4];
    assert!(p.validate().unwrap_err().to_string().contains("[p−2, p]"));
    let mut p = pareto_plan();
    p.p = 3.0;
    assert!(p.validate().is_err());
}

#[test]
fn plan_round_trips_and_rejects_unknown_keys() {
    let p = pareto_plan();
    let json = serde_json::to_string(&p).unwrap();
    let back: ExperimentPlan = serde_json::from_str(&json).unwrap();
    assert_eq!(back, p);
    let extra = json.replacen('{', "{\"bogus\":1,", 1);
    assert!(serde_json::from_str::<ExperimentPlan>(&extra).is_err());
}

#[test]
fn floor_scales_with_sigma() {
    let f = calibration_floor(1000, 1.0, 20, 4).unwrap();
    let (v, s) = f.scaled(3.0);
    assert!((v - 3.0 * f.mean).abs() < 1e-15 && (s - 3.0 * f.stderr).abs() < 1e-15);
    let h = calibration_floor(1000, 0.5, 20, 4).unwrap();
    assert!((h.scaled(4.0).0 - 2.0 * h.mean).abs() < 1e-15);
}

#[test]
fn rademacher_curve_decays_at_lattice_rate() {
    // W₁ of a normalized Rademacher walk is ≈ c n^{-1/2}; with M = 2·10⁴ the
    // small-n points stay well above the floor.
    let mut p = plan(ProcessFamily::IidBaseline(IidSpec { law: InnovationLaw::Rademacher }), 3.0, vec![1.0], Target::Sigma2);
    p.n_grid = vec![1, 2, 4, 8, 16];
    p.replicates = 20_000;
    let res = run_experiment(&p).unwrap();
    let c = res.curve(1.0).unwrap();
    let f = c.fit.as_ref().expect("enough usable points");
    assert!((f.slope + 0.5).abs() < 0.1, "{f:?}");
    assert_ne!(c.verdict, RateVerdict::Inconclusive);
    assert!(c.miscalibration_ok);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slope_is_scale_invariant(c in 0.01f64..100.0, b in -1.0f64..0.5, noise in prop::collection::vec(-0.2f64..0.2, 6)) {
        let n: Vec<f64> = (3..9).map(|k| 2f64.powi(k)).collect();
        let v: Vec<f64> = n.iter().zip(&noise).map(|(x, e)| x.powf(b) * e.exp()).collect();
        let se: Vec<f64> = v.iter().map(|x| 0.1 * x).collect();
        let f = fit_power(&n, &v, &se).unwrap();
        let v2: Vec<f64> = v.iter().map(|x| c * x).collect();
        let se2: Vec<f64> = se.iter().map(|x| c * x).collect();
        let g = fit_power(&n, &v2, &se2).unwrap();
        prop_assert!((f.slope - g.slope).abs() < 1e-9);
        prop_assert!((g.intercept - f.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn spearman_is_bounded_and_rank_based(x in prop::collection::vec(-10.0f64..10.0, 2..30)) {
        let idx: Vec<f64> = (0..x.len()).map(|i| i as f64).collect();
        let rho = spearman(&idx, &x);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v + 5.0).collect();
        prop_assert!((spearman(&idx, &cubed) - rho).abs() < 1e-12);
    }

    #[test]
    fn faster_decay_is_consistent(extra in 0.0f64..0.5, c in 0.1f64..10.0) {
        let curve: Vec<(f64, f64)> = (6..14).map(|k| 2f64.powi(k)).map(|n| (n, c * n.powf(-0.25 - extra - 0.01))).collect();
        let res = upper_bound_consistency(&curve, -0.25, false);
        prop_assert_eq!(res.verdict, ConsistencyVerdict::Pass);
        prop_assert!((res.c_star.unwrap() - res.ratios[0]).abs() < 1e-12);
    }
}
