use inexact_pep::algorithms::{run_igfgm, run_igfo, run_igogm};
use inexact_pep::bounds::{bound_evaluate, measure, pair_coefficients, u_igogm, BoundMethod};
use inexact_pep::certificate::{build_s, interpolation_check, schur_from_r, verify_certificate, InterpolationPoint};
use inexact_pep::oracles::{
    builtin_problem, ErrorPolicy, ExactOracle, InexactGradientOracle, Point, RecordedErrors, BUILTIN_PROBLEMS,
};
use inexact_pep::scheduler::{constant_b_baseline, optimal_b, EffortModel};
use inexact_pep::schedules::{theta_fgm, theta_ogm, InexactnessSchedule, StepsizeSchedule};
use inexact_pep::sdpa::{export_sdp, SdpTarget, SdpaProblem};
use inexact_pep::verify::schedule_by_bisection;
use proptest::prelude::*;

fn lambdas(max_k: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..=hi, 1..=max_k)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lambda_recursion_holds(lambda in lambdas(40, 0.0, 1.0)) {
        let k = lambda.len();
        let s = StepsizeSchedule::from_lambda(&lambda, k).unwrap();
        let (a, acc) = (s.alpha(), s.cumulative());
        for i in 1..=k {
            prop_assert!((a[i] * a[i] - lambda[i - 1] * acc[i]).abs() <= 1e-12 * acc[i]);
            prop_assert!((acc[i] - acc[i - 1] - a[i]).abs() <= 1e-12 * acc[i]);
        }
        let strict = lambda.iter().all(|l| *l < 1.0);
        if strict {
            prop_assert!((1..=k).all(|i| s.gap(i) > 0.0));
        }
        let (to, tf) = (theta_ogm(&s), theta_fgm(&s));
        prop_assert!(to.is_finite() && tf.is_finite());
        for row in 0..=k {
            for col in row..=k + 1 {
                prop_assert_eq!(to.get(row, col), 0.0);
                prop_assert_eq!(tf.get(row, col), 0.0);
            }
        }
    }

    #[test]
    fn oracle_errors_respect_levels(
        seed in 0u64..1000,
        level in 0.0f64..0.5,
        policy in 0usize..4,
        problem in 0usize..4,
    ) {
        let p = builtin_problem(BUILTIN_PROBLEMS[problem], 6, seed).unwrap();
        let o = InexactGradientOracle::new(
            p, ErrorPolicy::ALL[policy], InexactnessSchedule::constant(5, level).unwrap(), seed);
        for k in 0..=6 {
            let x = Point::from_fn(6, |i, _| ((i + k) as f64 + seed as f64).cos());
            let sample = o.query(&x, k).unwrap();
            let want = if k < 5 { level } else { 0.0 };
            prop_assert!(sample.error.norm() <= want + 1e-12);
        }
    }

    #[test]
    fn explicit_form_reproduces_both_methods(
        lambda in lambdas(20, 0.01, 1.0),
        seed in 0u64..100,
        policy in 0usize..4,
    ) {
        let k = lambda.len();
        let s = StepsizeSchedule::from_lambda(&lambda, k).unwrap();
        let p = builtin_problem(BUILTIN_PROBLEMS[(seed % 4) as usize], 5, seed).unwrap();
        let x0 = Point::from_element(5, 1.0);
        let mut o = InexactGradientOracle::new(
            p.clone(), ErrorPolicy::ALL[policy], InexactnessSchedule::constant(k, 0.05).unwrap(), seed);
        for (theta, run) in [
            (theta_ogm(&s), run_igogm(&mut o, &s, &x0).unwrap()),
            (theta_fgm(&s), run_igfgm(&mut o, &s, &x0).unwrap()),
        ] {
            let t = run_igfo(&mut RecordedErrors::new(p.clone(), run.errors.clone()), &theta, &x0).unwrap();
            for (a, b) in t.x.iter().zip(&run.x) {
                prop_assert!((a - b).norm() <= 1e-8 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn exact_oracle_meets_the_rate(lambda in lambdas(25, 0.05, 0.95), seed in 0u64..200) {
        let k = lambda.len();
        let s = StepsizeSchedule::from_lambda(&lambda, k).unwrap();
        let p = builtin_problem(BUILTIN_PROBLEMS[(seed % 4) as usize], 8, seed).unwrap();
        let xs = p.minimizer().unwrap().clone();
        let x0 = &xs + Point::from_fn(8, |i, _| ((i as f64 + 1.0) * (seed as f64 + 0.5)).sin());
        let radius = (&x0 - &xs).norm();
        let lip = p.lipschitz();
        let exact = InexactnessSchedule::exact(k);
        for method in [BoundMethod::Igogm, BoundMethod::Igfgm] {
            let t = match method {
                BoundMethod::Igogm => run_igogm(&mut ExactOracle::new(p.clone()), &s, &x0).unwrap(),
                BoundMethod::Igfgm => run_igfgm(&mut ExactOracle::new(p.clone()), &s, &x0).unwrap(),
            };
            let bound = bound_evaluate(method, &s, &exact, lip, radius).unwrap().total;
            let got = measure(p.as_ref(), t.last_x()).unwrap();
            prop_assert!(got <= bound + 1e-9 * lip * radius * radius);
        }
    }

    #[test]
    fn seeds_reproduce_bits(seed in 0u64..1000) {
        let p = builtin_problem("log-sum-exp", 4, seed).unwrap();
        let s = StepsizeSchedule::ogm_a(4.0, 6).unwrap();
        let run = || {
            let mut o = InexactGradientOracle::new(
                p.clone(), ErrorPolicy::RandomUnitSphere, InexactnessSchedule::constant(6, 0.1).unwrap(), seed);
            run_igogm(&mut o, &s, &Point::from_element(4, 0.3)).unwrap()
        };
        let (a, b) = (run(), run());
        for (x, y) in a.x.iter().zip(&b.x) {
            prop_assert!(x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn coefficients_scale_inversely_with_l(lambda in lambdas(30, 0.05, 0.95), c in 0.1f64..20.0) {
        let k = lambda.len();
        let s = StepsizeSchedule::from_lambda(&lambda, k).unwrap();
        let base = bound_evaluate(BoundMethod::Igogm, &s, &InexactnessSchedule::exact(k), 1.0, 1.0).unwrap();
        let scaled = bound_evaluate(BoundMethod::Igogm, &s, &InexactnessSchedule::exact(k), c, 1.0).unwrap();
        prop_assert!(rel(scaled.tau, c * base.tau) <= 1e-14);
        for (a, b) in scaled.u.iter().zip(&base.u) {
            prop_assert!(rel(*a, b / c) <= 1e-13);
        }
    }

    #[test]
    fn pair_identity_random(lambda in lambdas(30, 0.05, 0.95)) {
        let k = lambda.len();
        let s = StepsizeSchedule::from_lambda(&lambda, k).unwrap();
        let u = u_igogm(&s, 1.0).unwrap();
        let p = pair_coefficients(&s, 1.0).unwrap();
        for i in 0..k {
            let below: f64 = (0..i).map(|j| p[(i, j)]).sum();
            let above: f64 = (i + 1..k).map(|j| p[(j, i)]).sum();
            prop_assert!(rel(u[i], (p[(i, i)] + 0.5 * below + 0.5 * above) / s.final_weight()) <= 1e-12);
        }
    }

    #[test]
    fn certificate_holds_and_is_monotone(
        lambda in lambdas(25, 0.05, 0.95),
        extra in prop::collection::vec(0.0f64..3.0, 25),
    ) {
        let k = lambda.len();
        let s = StepsizeSchedule::from_lambda(&lambda, k).unwrap();
        let u = u_igogm(&s, 1.0).unwrap();
        let report = verify_certificate(&s, 1.0, &u).unwrap();
        prop_assert!(report.min_eig_m >= -1e-8 * report.frobenius_m);
        prop_assert!(report.min_row_sum_s.unwrap() >= -1e-10);
        prop_assert!(report.passed());
        let bigger: Vec<f64> = u.iter().zip(&extra).map(|(u, e)| u + e).collect();
        prop_assert!(verify_certificate(&s, 1.0, &bigger).unwrap().passed());
        let closed = build_s(&s, 1.0, &u).unwrap();
        let schur = schur_from_r(&s, 1.0, &u).unwrap();
        prop_assert!((&closed - &schur).amax() <= 1e-12 * closed.amax().max(1.0));
    }

    #[test]
    fn sampled_points_interpolate(seed in 0u64..500, problem in 0usize..4) {
        let p = builtin_problem(BUILTIN_PROBLEMS[problem], 5, seed).unwrap();
        let pts: Vec<InterpolationPoint> = (0..6)
            .map(|j| {
                let x = Point::from_fn(5, |i, _| ((i * 7 + j * 3) as f64 + seed as f64 * 0.1).sin() * 2.0);
                InterpolationPoint { g: p.gradient(&x), f: p.value(&x), x }
            })
            .collect();
        let scale = pts.iter().map(|q| q.f.abs()).fold(1.0, f64::max);
        prop_assert!(interpolation_check(&pts, p.lipschitz()) <= 1e-9 * scale);
    }

    #[test]
    fn scheduler_optimality(
        u in prop::collection::vec(0.05f64..5.0, 2..30),
        budget in 1e-4f64..1.0,
        c2 in 0.2f64..5.0,
        q2 in 1.1f64..10.0,
    ) {
        for model in [EffortModel::PowerLaw { c1: 1.0, c2 }, EffortModel::Exponential { q1: 1.0, q2 }] {
            let opt = optimal_b(&u, budget, &model).unwrap();
            let constant = constant_b_baseline(&u, budget, &model).unwrap();
            if !opt.clamped.iter().any(|c| *c) {
                prop_assert!(rel(opt.spent(&u), budget) <= 1e-10);
            }
            prop_assert!(opt.spent(&u) <= budget * (1.0 + 1e-10));
            prop_assert!(opt.stationarity_residual(&u, &model) <= 1e-8);
            prop_assert!(opt.eta_total <= constant.eta_total + 1e-12 * constant.eta_total.max(1.0));
            let (_, b) = schedule_by_bisection(&u, budget, &model);
            for (x, y) in opt.b.iter().zip(&b) {
                prop_assert!(rel(*x, *y) <= 1e-8);
            }
            for i in 0..u.len() {
                for j in 0..u.len() {
                    if u[i] < u[j] && !opt.clamped[i] {
                        prop_assert!(opt.b[i] > opt.b[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn sdpa_text_round_trips(k in 1usize..8, seed in 0u64..100, dual in any::<bool>()) {
        let s = StepsizeSchedule::ogm_a(3.0 + seed as f64 / 10.0, k).unwrap();
        let b = InexactnessSchedule::new((0..k).map(|i| 0.001 * (i as f64 + seed as f64)).collect()).unwrap();
        let target = if dual { SdpTarget::DualD } else { SdpTarget::PrimalP };
        let p = export_sdp(&s, 1.5, 2.0, &b, target).unwrap();
        prop_assert_eq!(p.constraint_count(), 3 * k + 2);
        let back = SdpaProblem::parse(&p.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), p.to_text());
    }
}
