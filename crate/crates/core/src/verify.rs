//! Reproducibility checks shared by the acceptance test target and the CLI.
//!
//! Each check returns a [`CheckResult`]; nothing here panics on a failed
//! comparison, so callers can report every outcome.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{run_ifgm, run_igfgm, run_igfo, run_igogm, run_istm, FeasibleSet};
use crate::bounds::{
    bound_evaluate, measure, ogm4_simplified_total, pair_coefficients, u_igogm, u_ogm4_simplified, BoundMethod,
};
use crate::certificate::{
    build_certificate, build_m, build_r, build_s, check_dual_equality, interpolation_check, min_eigenvalue, reduced_r,
    schur_from_r, trajectory_points, verify_certificate, InterpolationPoint,
};
use crate::error::{Error, Result};
use crate::numeric::{rel_err, sum};
use crate::oracles::{
    builtin_problem, forward_fd_error_bound, forward_fd_gradient, gaussian_smoothing_bias_bound,
    gaussian_smoothing_gradient, ErrorPolicy, ExactOracle, InexactGradientOracle, Point, Quadratic, RecordedErrors,
    SmoothConvex, ValueNoise, BUILTIN_PROBLEMS,
};
use crate::scheduler::{effort_budget, EffortModel, ScheduleComparison, ScheduleSolution};
use crate::schedules::{theta_fgm, theta_ogm, InexactnessSchedule, StepsizeSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{:>2}] {}: {}", self.id, self.name, self.detail)
    }
}

pub const CHECKS: [(usize, &str); 12] = [
    (1, "constant-step coefficients"),
    (2, "OGM-4 closed form"),
    (3, "pair-coefficient identity"),
    (4, "certificate feasibility"),
    (5, "degenerate stepsizes"),
    (6, "dual equality residual"),
    (7, "empirical bound validity"),
    (8, "trajectory equivalences"),
    (9, "inexactness scheduling"),
    (10, "rate/error tradeoff"),
    (11, "zero-order oracles"),
    (12, "interpolation checker"),
];

/// Collects failed comparisons; the first few end up in the detail line.
#[derive(Default)]
struct Findings {
    failures: Vec<String>,
    count: usize,
}

impl Findings {
    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.count += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn finish(self, summary: String) -> (bool, String) {
        if self.failures.is_empty() {
            (true, format!("{summary} ({} checks)", self.count))
        } else {
            let shown: Vec<&str> = self.failures.iter().take(3).map(String::as_str).collect();
            (
                false,
                format!(
                    "{} of {} checks failed: {}",
                    self.failures.len(),
                    self.count,
                    shown.join("; ")
                ),
            )
        }
    }
}

pub fn run_check(id: usize) -> Result<CheckResult> {
    let name = CHECKS
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .ok_or_else(|| Error::OutOfRange(format!("no check numbered {id}")))?;
    let outcome = match id {
        1 => constant_step(),
        2 => ogm4_closed_form(),
        3 => pair_identity(),
        4 => certificate_feasibility(),
        5 => degenerate_regime(),
        6 => dual_equality(),
        7 => empirical_bounds(),
        8 => equivalences(),
        9 => scheduling(),
        10 => tradeoff(),
        11 => zero_order(),
        _ => interpolation(),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Ok(CheckResult {
        id,
        name,
        passed,
        detail,
    })
}

pub fn run_all() -> Vec<CheckResult> {
    CHECKS.iter().map(|(id, _)| run_check(*id).expect("known id")).collect()
}

/// `lambda_k` uniform in `[lo, hi]`.
pub fn random_lambda_schedule(horizon: usize, lo: f64, hi: f64, seed: u64) -> Result<StepsizeSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda: Vec<f64> = (0..horizon).map(|_| rng.random_range(lo..=hi)).collect();
    StepsizeSchedule::from_lambda(&lambda, horizon)
}

fn constant_step() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let mut worst = 0.0_f64;
    let level = 0.1;
    for lip in [0.5, 1.0, 10.0] {
        for horizon in 1..=100 {
            let u = u_igogm(&StepsizeSchedule::constant(horizon)?, lip)?;
            let kf = horizon as f64;
            for (k, &uk) in u.iter().enumerate() {
                let want = 3.0 * (2.0 * kf - k as f64 + 1.0) / (4.0 * lip * (kf + 1.0));
                let e = rel_err(uk, want);
                worst = worst.max(e);
                f.require(e <= 1e-12, || format!("K={horizon} L={lip} k={k}: {uk} vs {want}"));
            }
            let spent = sum(u.iter().map(|u| u * level * level));
            let want = 9.0 * kf * level * level / (8.0 * lip);
            f.require(rel_err(spent, want) <= 1e-12, || {
                format!("K={horizon} L={lip}: accumulated {spent} vs {want}")
            });
        }
    }
    Ok(f.finish(format!("max rel err {worst:.1e}")))
}

fn ogm4_closed_form() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let mut worst = 0.0_f64;
    for lip in [1.0, 3.0] {
        for horizon in 1..=200 {
            let kf = horizon as f64;
            let want = kf * (12.0 * kf.powi(3) + 303.0 * kf * kf + 2687.0 * kf + 8758.0) / (480.0 * lip * (kf + 8.0));
            let simplified = u_ogm4_simplified(horizon, lip);
            for got in [ogm4_simplified_total(horizon, lip), sum(simplified.iter().copied())] {
                let e = rel_err(got, want);
                worst = worst.max(e);
                f.require(e <= 1e-9, || format!("K={horizon}: sum {got} vs {want}"));
            }
            if horizon <= 100 {
                let general = u_igogm(&StepsizeSchedule::ogm_a(4.0, horizon)?, lip)?;
                for (k, (t, s)) in general.iter().zip(&simplified).enumerate() {
                    f.require(*t <= s * (1.0 + 1e-12), || {
                        format!("K={horizon} k={k}: general u {t} exceeds simplified {s}")
                    });
                }
            }
        }
    }
    let spot = ogm4_simplified_total(10, 1.0);
    f.require(rel_err(spot, 779280.0 / 8640.0) <= 1e-12, || {
        format!("K=10 spot value {spot}")
    });
    Ok(f.finish(format!("K=10 total {spot:.5}, max rel err {worst:.1e}")))
}

fn pair_identity() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let mut worst = 0.0_f64;
    for seed in 0..50u64 {
        let horizon = 1 + (seed as usize * 7) % 30;
        let s = random_lambda_schedule(horizon, 0.05, 0.95, 1000 + seed)?;
        let lip = 0.5 + seed as f64 / 10.0;
        let u = u_igogm(&s, lip)?;
        let p = pair_coefficients(&s, lip)?;
        let ak = s.final_weight();
        for k in 0..horizon {
            let below = sum((0..k).map(|i| p[(k, i)]));
            let above = sum((k + 1..horizon).map(|i| p[(i, k)]));
            let want = (p[(k, k)] + 0.5 * below + 0.5 * above) / ak;
            let e = rel_err(u[k], want);
            worst = worst.max(e);
            f.require(e <= 1e-12, || {
                format!("seed {seed} K={horizon} k={k}: {} vs {want}", u[k])
            });
        }
    }
    Ok(f.finish(format!("50 random schedules, max rel err {worst:.1e}")))
}

fn certificate_schedules() -> Result<Vec<(String, StepsizeSchedule)>> {
    let mut out = Vec::new();
    for a in [3.0, 4.0, 10.0, 100.0] {
        for horizon in 1..=25 {
            out.push((format!("OGM-{a} K={horizon}"), StepsizeSchedule::ogm_a(a, horizon)?));
        }
    }
    for seed in 0..50u64 {
        let horizon = 1 + (seed as usize * 11) % 25;
        out.push((
            format!("random seed {seed} K={horizon}"),
            random_lambda_schedule(horizon, 0.05, 0.95, 2000 + seed)?,
        ));
    }
    Ok(out)
}

/// The displayed K = 3 matrices, written out entry by entry; `x0 | e0 e1 e2 | g0 .. g3`.
fn displayed_m(a: &[f64], acc: &[f64], lip: f64, u: &[f64]) -> DMatrix<f64> {
    let a3 = acc[3];
    let la = lip * a3;
    let mut m = DMatrix::zeros(8, 8);
    let mut put = |r: usize, c: usize, v: f64| {
        m[(r, c)] = v;
        m[(c, r)] = v;
    };
    put(0, 0, lip / (4.0 * a3));
    put(0, 4, -1.0 / (2.0 * a3));
    put(0, 5, -a[1] / (2.0 * a3));
    put(0, 6, -a[2] / (2.0 * a3));
    put(0, 7, -a[3] / (2.0 * a3));
    put(1, 1, u[0]);
    put(1, 5, (1.0 + 2.0 * a[1]) / (2.0 * la));
    put(1, 6, a[2] / la);
    put(1, 7, a[3] / la);
    put(2, 2, u[1]);
    put(2, 6, (2.0 * a[1] * a[2] + acc[1]) / (2.0 * la));
    put(2, 7, a[1] * a[3] / la);
    put(3, 3, u[2]);
    put(3, 7, (2.0 * a[2] * a[3] + acc[2]) / (2.0 * la));
    put(4, 4, 1.0 / la);
    put(4, 5, a[1] / la);
    put(4, 6, a[2] / la);
    put(4, 7, a[3] / la);
    put(5, 5, acc[1] / la);
    put(5, 6, a[1] * a[2] / la);
    put(5, 7, a[1] * a[3] / la);
    put(6, 6, acc[2] / la);
    put(6, 7, a[2] * a[3] / la);
    put(7, 7, 1.0 / lip);
    m
}

fn displayed_r(a: &[f64], acc: &[f64], lip: f64, u: &[f64]) -> DMatrix<f64> {
    let la = lip * acc[3];
    let mut r = displayed_m(a, acc, lip, u);
    for i in 0..8 {
        r[(0, i)] = 0.0;
        r[(i, 0)] = 0.0;
    }
    for i in 4..8 {
        for j in 4..8 {
            r[(i, j)] = 0.0;
        }
    }
    for k in 1..=3 {
        r[(4 + k, 4 + k)] = (acc[k] - a[k] * a[k]) / la;
    }
    r
}

fn displayed_reduced_r(a: &[f64], acc: &[f64], lip: f64, u: &[f64]) -> DMatrix<f64> {
    let r = displayed_r(a, acc, lip, u);
    DMatrix::from_fn(6, 6, |i, j| {
        let pick = |k: usize| if k < 3 { k + 1 } else { k + 2 };
        r[(pick(i), pick(j))]
    })
}

/// K = 3 Schur complement; `half` is the denominator factor of the
/// off-diagonal leading terms (2 reproduces the Schur complement).
fn displayed_s(a: &[f64], acc: &[f64], lip: f64, u: &[f64], half: f64) -> DMatrix<f64> {
    let la = lip * acc[3];
    let g = |k: usize| acc[k] - a[k] * a[k];
    let l1 = 1.0 + 2.0 * a[1];
    let l2 = acc[1] + 2.0 * a[1] * a[2];
    let l3 = acc[2] + 2.0 * a[2] * a[3];
    let mut s = DMatrix::zeros(3, 3);
    s[(0, 0)] = u[0] - l1 * l1 / (4.0 * la * g(1)) - a[2] * a[2] / (la * g(2)) - a[3] * a[3] / (la * g(3));
    s[(1, 1)] = u[1] - l2 * l2 / (4.0 * la * g(2)) - a[1] * a[1] * a[3] * a[3] / (la * g(3));
    s[(2, 2)] = u[2] - l3 * l3 / (4.0 * la * g(3));
    let s01 = -l2 * a[2] / (half * la * g(2)) - a[1] * a[3] * a[3] / (la * g(3));
    let s02 = -l3 * a[3] / (half * la * g(3));
    let s12 = -l3 * a[1] * a[3] / (half * la * g(3));
    for (i, j, v) in [(0, 1, s01), (0, 2, s02), (1, 2, s12)] {
        s[(i, j)] = v;
        s[(j, i)] = v;
    }
    s
}

fn entrywise(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    let scale = want.amax().max(1.0);
    (got - want).amax() / scale
}

fn certificate_feasibility() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let mut worst_eig = f64::INFINITY;
    let mut worst_row = f64::INFINITY;
    for (label, s) in certificate_schedules()? {
        for lip in [1.0, 2.5] {
            let u = u_igogm(&s, lip)?;
            let report = verify_certificate(&s, lip, &u)?;
            let eig_ratio = report.min_eig_m / report.frobenius_m;
            worst_eig = worst_eig.min(eig_ratio);
            f.require(eig_ratio >= -1e-8, || {
                format!("{label}: min eig / |M|_F = {eig_ratio:e}")
            });
            let row = report.min_row_sum_s.unwrap_or(f64::NEG_INFINITY);
            worst_row = worst_row.min(row);
            f.require(row >= -1e-10, || format!("{label}: S row sum {row:e}"));
            f.require(report.nonnegative, || format!("{label}: negative multiplier"));
            let s_closed = build_s(&s, lip, &u)?;
            let s_schur = schur_from_r(&s, lip, &u)?;
            f.require(entrywise(&s_closed, &s_schur) <= 1e-12, || {
                format!("{label}: closed-form S differs from the Schur complement of R")
            });
        }
    }
    // displayed K = 3 matrices
    let u = [0.7, 1.1, 1.9];
    let mut printed_s_gap = 0.0_f64;
    for (label, s) in [
        ("OGM", StepsizeSchedule::from_lambda(&[1.0; 3], 3)?),
        ("OGM-4", StepsizeSchedule::ogm_a(4.0, 3)?),
        ("random", random_lambda_schedule(3, 0.05, 0.95, 77)?),
    ] {
        for lip in [1.0, 3.0] {
            let (a, acc) = (s.alpha(), s.cumulative());
            let pairs = [
                ("M", build_m(&s, lip, &u)?, displayed_m(a, acc, lip, &u)),
                ("R", build_r(&s, lip, &u)?, displayed_r(a, acc, lip, &u)),
                (
                    "reduced R",
                    reduced_r(&s, lip, &u)?,
                    displayed_reduced_r(a, acc, lip, &u),
                ),
            ];
            for (name, got, want) in pairs {
                let e = entrywise(&got, &want);
                f.require(e <= 1e-12, || format!("{label} K=3 {name}: deviation {e:e}"));
            }
            if s.is_strict() {
                let want = displayed_s(a, acc, lip, &u, 2.0);
                for (route, got) in [
                    ("closed form", build_s(&s, lip, &u)?),
                    ("Schur", schur_from_r(&s, lip, &u)?),
                ] {
                    let e = entrywise(&got, &want);
                    f.require(e <= 1e-12, || format!("{label} K=3 S ({route}): deviation {e:e}"));
                }
                let printed = displayed_s(a, acc, lip, &u, 4.0);
                printed_s_gap = printed_s_gap.max(entrywise(&printed, &want));
            }
        }
    }
    Ok(f.finish(format!(
        "worst min-eig/|M|_F {worst_eig:.1e}, worst S row sum {worst_row:.1e}; \
         K=3 off-diagonal S terms need 2L (a 4L denominator is off by {printed_s_gap:.1e})"
    )))
}

fn degenerate_regime() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let mut largest = f64::NEG_INFINITY;
    for horizon in 2..=10 {
        let s = StepsizeSchedule::from_lambda(&vec![1.0; horizon], horizon)?;
        for level in [1.0, 1e2, 1e4] {
            let m = build_m(&s, 1.0, &vec![level; horizon])?;
            let eig = min_eigenvalue(&m);
            largest = largest.max(eig);
            f.require(eig < 0.0, || format!("K={horizon} u={level}: min eig {eig:e}"));
        }
        let err = u_igogm(&s, 1.0);
        f.require(matches!(err, Err(Error::DegenerateStepsize { .. })), || {
            format!("K={horizon}: coefficients did not report a degenerate stepsize")
        });
        f.require(build_certificate(&s, 1.0).is_err(), || {
            format!("K={horizon}: certificate built")
        });
    }
    Ok(f.finish(format!("largest min eig {largest:.2e}")))
}

fn dual_equality() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let mut worst = 0.0_f64;
    for (label, s) in certificate_schedules()? {
        let cert = build_certificate(&s, 1.0)?;
        let r = check_dual_equality(&cert).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        worst = worst.max(r);
        f.require(r <= 1e-14, || format!("{label}: residual {r:e}"));
    }
    Ok(f.finish(format!("max residual {worst:.1e}")))
}

fn start_point(problem: &dyn SmoothConvex, rng: &mut ChaCha8Rng) -> Result<(Point, f64)> {
    let center = problem.minimizer().ok_or(Error::UnknownOptimum)?.clone();
    let d = problem.dimension();
    let dir = Point::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    let radius = rng.random_range(0.5..2.0);
    let offset = &dir * (radius / dir.norm().max(f64::MIN_POSITIVE));
    Ok((&center + &offset, offset.norm()))
}

fn empirical_bounds() -> Result<(bool, String)> {
    let levels = [0.0, 0.001, 0.01, 0.1];
    let mut f = Findings::default();
    let mut tightest = f64::INFINITY;
    for instance in 0..200u64 {
        let i = instance as usize;
        let name = BUILTIN_PROBLEMS[i % 4];
        let policy = ErrorPolicy::ALL[(i / 4) % 4];
        let level = levels[(i / 16) % 4];
        let dimension = 2 + (i * 7) % 49;
        let horizon = 3 + (i * 5) % 28;
        let problem = builtin_problem(name, dimension, instance)?;
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + instance);
        let (x0, radius) = start_point(problem.as_ref(), &mut rng)?;
        let schedule = random_lambda_schedule(horizon, 0.1, 0.9, 9000 + instance)?;
        let inexactness = InexactnessSchedule::constant(horizon, level)?;
        let lip = problem.lipschitz();
        let gap0 = (problem.value(&x0) - problem.optimal_value().ok_or(Error::UnknownOptimum)?).abs();
        for method in [BoundMethod::Igogm, BoundMethod::Igfgm] {
            let mut oracle = InexactGradientOracle::new(problem.clone(), policy, inexactness.clone(), instance);
            let t = match method {
                BoundMethod::Igogm => run_igogm(&mut oracle, &schedule, &x0)?,
                BoundMethod::Igfgm => run_igfgm(&mut oracle, &schedule, &x0)?,
            };
            let report = bound_evaluate(method, &schedule, &inexactness, lip, radius)?;
            let bound = report.realized_total(radius, &t.error_norms());
            let got = measure(problem.as_ref(), t.last_x())?;
            let scale = 1.0_f64.max(gap0).max(bound);
            tightest = tightest.min(bound - got);
            f.require(got <= bound + 1e-9 * scale, || {
                format!(
                    "{} on {name} d={dimension} K={horizon} {policy:?} b={level}: {got:e} > {bound:e}",
                    method.label()
                )
            });
        }
    }
    Ok(f.finish(format!("400 runs, smallest margin {tightest:.2e}")))
}

fn deviation(a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm() / q.norm().max(1.0))
        .fold(0.0, f64::max)
}

fn equivalences() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let (mut worst_fo, mut worst_stm) = (0.0_f64, 0.0_f64);
    for seed in 0..20u64 {
        let i = seed as usize;
        let horizon = 1 + (i * 13) % 50;
        let dimension = 1 + (i * 17) % 50;
        let problem = builtin_problem(BUILTIN_PROBLEMS[i % 4], dimension, seed)?;
        let x0 = Point::from_fn(dimension, |j, _| ((j + i) as f64 * 0.37).sin());
        let schedule = random_lambda_schedule(horizon, 0.05, 1.0, 300 + seed)?;
        let inexactness = InexactnessSchedule::constant(horizon, 0.01 * (1 + i % 5) as f64)?;
        let mut oracle = InexactGradientOracle::new(problem.clone(), ErrorPolicy::ALL[i % 4], inexactness, seed);
        for (label, theta, run) in [
            (
                "optimized",
                theta_ogm(&schedule),
                run_igogm(&mut oracle, &schedule, &x0)?,
            ),
            ("fast", theta_fgm(&schedule), run_igfgm(&mut oracle, &schedule, &x0)?),
        ] {
            let replay = run_igfo(
                &mut RecordedErrors::new(problem.clone(), run.errors.clone()),
                &theta,
                &x0,
            )?;
            let dev = deviation(&replay.x, &run.x);
            worst_fo = worst_fo.max(dev);
            f.require(dev <= 1e-8, || {
                format!("{label} K={horizon} seed {seed}: deviation {dev:e}")
            });
        }
        // alpha_k^2 = A_k: the similar-triangles y_k is the fast-gradient y_{k+1}
        let tight = StepsizeSchedule::from_lambda(&vec![1.0; horizon], horizon)?;
        let fg = run_ifgm(
            &mut ExactOracle::new(problem.clone()),
            &tight,
            &x0,
            &FeasibleSet::WholeSpace,
        )?;
        let st = run_istm(
            &mut ExactOracle::new(problem.clone()),
            &tight,
            &x0,
            &FeasibleSet::WholeSpace,
        )?;
        let dev = deviation(&st.y, &fg.y[1..]).max(deviation(&st.x, &fg.x));
        worst_stm = worst_stm.max(dev);
        f.require(dev <= 1e-10, || {
            format!("similar triangles K={horizon} seed {seed}: deviation {dev:e}")
        });
    }
    Ok(f.finish(format!(
        "explicit form max deviation {worst_fo:.1e}, similar-triangles max deviation {worst_stm:.1e}"
    )))
}

/// Bisection on the budget multiplier with each level solved from
/// stationarity by its own bisection.
pub fn schedule_by_bisection(u: &[f64], budget: f64, model: &EffortModel) -> (f64, Vec<f64>) {
    let cap = model.max_level().min(1e12);
    let level_at = |lambda: f64, uk: f64| {
        let residual = |b: f64| model.h_inv_slope(b) + 2.0 * lambda * b * uk;
        if residual(cap) <= 0.0 {
            return cap;
        }
        let (mut lo, mut hi) = (1e-300_f64, cap);
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let spent = |lambda: f64| sum(u.iter().map(|&uk| uk * level_at(lambda, uk).powi(2)));
    let (mut lo, mut hi) = (1e-30_f64, 1e30_f64);
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if spent(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = (lo * hi).sqrt();
    (lambda, u.iter().map(|&uk| level_at(lambda, uk)).collect())
}

fn check_solution(f: &mut Findings, tag: &str, sol: &ScheduleSolution, u: &[f64], model: &EffortModel) {
    let binding = rel_err(sol.spent(u), sol.budget);
    f.require(binding <= 1e-10, || format!("{tag}: budget off by {binding:e}"));
    let stationarity = sol.stationarity_residual(u, model);
    f.require(stationarity <= 1e-8, || {
        format!("{tag}: stationarity residual {stationarity:e}")
    });
    f.require(
        sol.b.iter().all(|b| *b > 0.0) && sol.eta.iter().all(|e| *e >= 0.0),
        || format!("{tag}: nonpositive level or negative effort"),
    );
}

fn scheduling() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let powers = [0.5, 1.0, 2.0, 4.0];
    let exponential = EffortModel::Exponential {
        q1: 1.0,
        q2: std::f64::consts::E,
    };
    let mut prev_ratio = [0.0_f64; 4];
    let mut ratios = (0.0, 0.0);
    for horizon in (10..=100).step_by(10) {
        let s = StepsizeSchedule::ogm_a(4.0, horizon)?;
        let u = u_igogm(&s, 1.0)?;
        let budget = effort_budget(1.0, 1.0, s.final_weight());
        let mut totals = Vec::new();
        for (j, &c2) in powers.iter().enumerate() {
            let model = EffortModel::PowerLaw { c1: 1.0, c2 };
            let cmp = ScheduleComparison::new(&u, budget, model)?;
            let tag = format!("power-law c2={c2} K={horizon}");
            check_solution(&mut f, &tag, &cmp.optimal, &u, &model);
            let spent = cmp.constant.spent(&u);
            f.require(rel_err(spent, budget) <= 1e-10, || {
                format!("{tag}: constant level off budget")
            });
            let (lambda, b) = schedule_by_bisection(&u, budget, &model);
            let lambda_err = rel_err(cmp.optimal.lambda_dual.unwrap_or(f64::NAN), lambda);
            let b_err = cmp
                .optimal
                .b
                .iter()
                .zip(&b)
                .map(|(x, y)| rel_err(*x, *y))
                .fold(0.0, f64::max);
            f.require(lambda_err <= 1e-8 && b_err <= 1e-8, || {
                format!("{tag}: bisection disagrees (multiplier {lambda_err:e}, levels {b_err:e})")
            });
            let ratio = cmp.improvement_ratio();
            f.require(cmp.optimal.eta_total <= cmp.constant.eta_total + 1e-12, || {
                format!("{tag}: optimized effort above constant")
            });
            f.require(ratio > 1.0, || format!("{tag}: no improvement"));
            f.require(ratio >= prev_ratio[j], || {
                format!("{tag}: improvement ratio fell to {ratio}")
            });
            prev_ratio[j] = ratio;
            totals.push(cmp.optimal.eta_total);
            if c2 == 1.0 {
                ratios.0 = ratio;
            }
        }
        f.require(totals.windows(2).all(|w| w[1] < w[0]), || {
            format!("K={horizon}: effort not decreasing in c2: {totals:?}")
        });
        let cmp = ScheduleComparison::new(&u, budget, exponential)?;
        let tag = format!("exponential K={horizon}");
        check_solution(&mut f, &tag, &cmp.optimal, &u, &exponential);
        let (_, b) = schedule_by_bisection(&u, budget, &exponential);
        let b_err = cmp
            .optimal
            .b
            .iter()
            .zip(&b)
            .map(|(x, y)| rel_err(*x, *y))
            .fold(0.0, f64::max);
        f.require(b_err <= 1e-8, || format!("{tag}: bisection disagrees ({b_err:e})"));
        ratios.1 = cmp.improvement_ratio();
        f.require(ratios.1 >= 1.0 && ratios.1 < ratios.0, || {
            format!("{tag}: ratio {} vs power-law {}", ratios.1, ratios.0)
        });
    }
    Ok(f.finish(format!(
        "K=100 improvement: power-law c2=1 {:.4}, exponential {:.4}",
        ratios.0, ratios.1
    )))
}

fn tradeoff() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let shapes = [3.0, 4.0, 10.0, 100.0, 1e6];
    for horizon in [5, 20, 50, 100] {
        let mut prev: Option<(Vec<f64>, f64)> = None;
        for &a in &shapes {
            let s = StepsizeSchedule::ogm_a(a, horizon)?;
            let u = u_igogm(&s, 1.0)?;
            let tau = 1.0 / (4.0 * s.final_weight());
            if let Some((pu, ptau)) = &prev {
                let shrinking = u.iter().zip(pu).all(|(x, y)| x < y);
                f.require(shrinking, || format!("K={horizon} a={a}: some u_k grew with a"));
                f.require(tau > *ptau, || format!("K={horizon} a={a}: tau did not grow"));
            }
            prev = Some((u, tau));
        }
    }
    let per_step: Vec<f64> = (10..=100)
        .step_by(10)
        .map(|k| -> Result<f64> {
            let u = u_igogm(&StepsizeSchedule::ogm_a(1e6, k)?, 1.0)?;
            Ok(sum(u.iter().copied()) / k as f64)
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = per_step
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(l, h), v| (l.min(*v), h.max(*v)));
    f.require(hi / lo <= 2.0, || format!("a=1e6: sum u / K spans factor {}", hi / lo));
    Ok(f.finish(format!("a=1e6 sum u / K in [{lo:.4}, {hi:.4}]")))
}

fn zero_order() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_exact = 0.0_f64;
    for (d, lip, step) in [(1, 1.0, 0.1), (4, 3.0, 0.25), (10, 0.5, 0.01), (50, 2.0, 1e-3)] {
        let p = Quadratic::isotropic(d, lip);
        for _ in 0..5 {
            let x = Point::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let g = forward_fd_gradient(&p, &x, step, &ValueNoise::None)?;
            let err = (&g - p.gradient(&x)).norm();
            let want = forward_fd_error_bound(d, lip, step, 0.0);
            let direct = (d as f64).sqrt() * lip * step / 2.0;
            f.require(rel_err(want, direct) <= 1e-15, || "exact-value bound formula".into());
            worst_exact = worst_exact.max((err - want).abs());
            f.require((err - want).abs() <= 1e-10, || format!("d={d}: error {err} vs {want}"));
            for noise in [
                ValueNoise::Sinusoidal { amplitude: 1e-3 },
                ValueNoise::Uniform {
                    amplitude: 1e-3,
                    seed: 5,
                },
            ] {
                let g = forward_fd_gradient(&p, &x, step.max(0.05), &noise)?;
                let err = (&g - p.gradient(&x)).norm();
                let bound = forward_fd_error_bound(d, lip, step.max(0.05), 1e-3);
                f.require(err <= bound, || format!("d={d} noisy: {err} > {bound}"));
            }
        }
    }
    let mut worst_bias = 0.0_f64;
    for (d, lip, step, amp) in [(3, 1.0, 0.1, 0.0), (5, 2.0, 0.05, 1e-3)] {
        let p = Quadratic::isotropic(d, lip);
        let x = Point::from_fn(d, |i, _| 0.5 - 0.2 * i as f64);
        let noise = if amp > 0.0 {
            ValueNoise::Sinusoidal { amplitude: amp }
        } else {
            ValueNoise::None
        };
        let mut mean = Point::zeros(d);
        for seed in 0..200u64 {
            mean += gaussian_smoothing_gradient(&p, &x, step, 50, &noise, seed)?;
        }
        mean /= 200.0;
        let bias = (&mean - p.gradient(&x)).norm();
        let bound = gaussian_smoothing_bias_bound(d, lip, step, amp);
        worst_bias = worst_bias.max(bias / bound);
        f.require(bias <= bound, || format!("d={d}: smoothing bias {bias} > {bound}"));
    }
    Ok(f.finish(format!(
        "exact-case error gap {worst_exact:.1e}, smoothing bias at most {:.0}% of its bound",
        100.0 * worst_bias
    )))
}

fn interpolation() -> Result<(bool, String)> {
    let mut f = Findings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (d, lip) in [(2, 1.0), (5, 4.0), (20, 0.3)] {
        let p = Quadratic::isotropic(d, lip);
        let pts: Vec<InterpolationPoint> = (0..8)
            .map(|_| {
                let x = Point::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
                InterpolationPoint {
                    g: p.gradient(&x),
                    f: p.value(&x),
                    x,
                }
            })
            .collect();
        let v = interpolation_check(&pts, lip);
        let scale = pts.iter().map(|q| q.f.abs()).fold(1.0, f64::max);
        f.require(v <= 1e-14 * scale, || format!("isotropic d={d}: violation {v:e}"));
    }
    let mut worst = 0.0_f64;
    for (i, name) in BUILTIN_PROBLEMS.iter().enumerate() {
        for policy in ErrorPolicy::ALL {
            let problem = builtin_problem(name, 6 + i, 40 + i as u64)?;
            let (x0, _) = start_point(problem.as_ref(), &mut rng)?;
            let schedule = random_lambda_schedule(12, 0.1, 0.9, 60 + i as u64)?;
            let mut oracle = InexactGradientOracle::new(
                problem.clone(),
                policy,
                InexactnessSchedule::constant(12, 0.01)?,
                i as u64,
            );
            let t = run_igogm(&mut oracle, &schedule, &x0)?;
            let mut pts = trajectory_points(&t);
            let scale = pts.iter().map(|q| q.f.abs()).fold(1.0, f64::max);
            let v = interpolation_check(&pts, problem.lipschitz());
            worst = worst.max(v / scale);
            f.require(v <= 1e-9 * scale, || format!("{name} {policy:?}: violation {v:e}"));
            pts[1].f -= 1.0;
            let corrupted = interpolation_check(&pts, problem.lipschitz());
            f.require(corrupted > 0.0, || {
                format!("{name} {policy:?}: corruption not detected")
            });
        }
    }
    Ok(f.finish(format!(
        "worst scaled trajectory violation {worst:.1e}; corruption flagged"
    )))
}
