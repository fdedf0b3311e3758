//! The iterations themselves, each returning a full [`Trajectory`].
//!
//! Every runner pulls gradients from a [`GradientSource`] with the iteration
//! index, so the same recorded error stream can drive two different methods.
//! The gradient at the last iterate `x_K` is queried with index `K`, where the
//! inexactness schedule reads zero; it only feeds the closing step `y_{K+1}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::fmt_f64;
use crate::oracles::{ExactOracle, GradientSource, OracleSample, Point, SharedProblem};
use crate::schedules::{StepsizeSchedule, ThetaTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Igogm,
    Igfgm,
    Ifgm,
    Istm,
    Igfo,
    Ogm,
    #[serde(rename = "gd-baseline")]
    GradientDescent,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Igogm => "igogm",
            Method::Igfgm => "igfgm",
            Method::Ifgm => "ifgm",
            Method::Istm => "istm",
            Method::Igfo => "igfo",
            Method::Ogm => "ogm",
            Method::GradientDescent => "gd-baseline",
        }
    }
}

/// Iterates and oracle answers of one run.
///
/// `g_true`, `g_tilde` and `errors` are indexed like `x`. Methods without an
/// auxiliary sequence leave `z` empty.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub method: Method,
    pub lipschitz: f64,
    pub x: Vec<Point>,
    pub y: Vec<Point>,
    pub z: Vec<Point>,
    pub g_true: Vec<Point>,
    pub g_tilde: Vec<Point>,
    pub errors: Vec<Point>,
    /// `f(x_k)`.
    pub values: Vec<f64>,
    pub optimal_value: Option<f64>,
    pub minimizer: Option<Point>,
}

impl Trajectory {
    fn start(method: Method, source: &(impl GradientSource + ?Sized), x0: &Point) -> Result<Self> {
        let problem = source.problem();
        if x0.len() != problem.dimension() {
            return Err(Error::DimensionMismatch {
                expected: problem.dimension(),
                got: x0.len(),
            });
        }
        Ok(Self {
            method,
            lipschitz: problem.lipschitz(),
            x: Vec::new(),
            y: Vec::new(),
            z: Vec::new(),
            g_true: Vec::new(),
            g_tilde: Vec::new(),
            errors: Vec::new(),
            values: Vec::new(),
            optimal_value: problem.optimal_value(),
            minimizer: problem.minimizer().cloned(),
        })
    }

    /// Appends `x_k` together with the oracle answer at it.
    fn visit(&mut self, source: &mut (impl GradientSource + ?Sized), x: Point, k: usize) -> Result<Point> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure { iteration: k });
        }
        let OracleSample { g_true, g_tilde, error } = source.sample(&x, k)?;
        if g_tilde.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure { iteration: k });
        }
        self.values.push(source.problem().value(&x));
        self.x.push(x);
        self.g_true.push(g_true);
        self.errors.push(error);
        self.g_tilde.push(g_tilde.clone());
        Ok(g_tilde)
    }

    pub fn horizon(&self) -> usize {
        self.x.len() - 1
    }

    pub fn last_x(&self) -> &Point {
        self.x.last().expect("trajectory has x_0")
    }

    /// `f(x_k) - f*`.
    pub fn f_gap(&self, k: usize) -> Result<f64> {
        let fs = self.optimal_value.ok_or(Error::UnknownOptimum)?;
        Ok(self.values[k] - fs)
    }

    /// `f(x_k) - f* - |grad f(x_k)|^2 / (2L)`.
    pub fn measure(&self, k: usize) -> Result<f64> {
        Ok(self.f_gap(k)? - self.g_true[k].norm_squared() / (2.0 * self.lipschitz))
    }

    pub fn final_measure(&self) -> Result<f64> {
        self.measure(self.horizon())
    }

    /// `|e_0|, ..., |e_K|`.
    pub fn error_norms(&self) -> Vec<f64> {
        self.errors.iter().map(|e| e.norm()).collect()
    }

    /// `|x_0 - x*|` when the minimizer is known.
    pub fn initial_distance(&self) -> Option<f64> {
        self.minimizer.as_ref().map(|xs| (&self.x[0] - xs).norm())
    }

    /// Columns `k, f_gap, measure, grad_norm, err_norm, x_norm_dist_to_opt`;
    /// quantities needing an unknown optimum are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "f_gap", "measure", "grad_norm", "err_norm", "x_norm_dist_to_opt"])?;
        let opt = |r: Result<f64>| r.map(fmt_f64).unwrap_or_default();
        for k in 0..=self.horizon() {
            let dist = self
                .minimizer
                .as_ref()
                .map(|xs| fmt_f64((&self.x[k] - xs).norm()))
                .unwrap_or_default();
            w.write_record([
                k.to_string(),
                opt(self.f_gap(k)),
                opt(self.measure(k)),
                fmt_f64(self.g_true[k].norm()),
                fmt_f64(self.errors[k].norm()),
                dist,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    WholeSpace,
    Ball { center: Point, radius: f64 },
}

impl FeasibleSet {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(invalid(format!("ball radius {radius} must be finite and >= 0")));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn project(&self, x: &Point) -> Point {
        match self {
            FeasibleSet::WholeSpace => x.clone(),
            FeasibleSet::Ball { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center + d * (*radius / n)
                }
            }
        }
    }
}

fn check_horizon(schedule: &StepsizeSchedule) -> Result<usize> {
    let k = schedule.horizon();
    if k < 1 {
        return Err(invalid("horizon K must be at least 1"));
    }
    Ok(k)
}

/// Shared body of the generalized methods; only the dual step differs.
fn run_generalized(
    method: Method,
    source: &mut (impl GradientSource + ?Sized),
    schedule: &StepsizeSchedule,
    x0: &Point,
    dual_factor: f64,
) -> Result<Trajectory> {
    let horizon = check_horizon(schedule)?;
    let (alpha, acc) = (schedule.alpha(), schedule.cumulative());
    let lip = source.problem().lipschitz();
    let mut t = Trajectory::start(method, source, x0)?;
    t.y.push(x0.clone());
    t.z.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..horizon {
        let g = t.visit(source, x, k)?;
        let y_next = &t.x[k] - &g / lip;
        let z_next = &t.z[k] - &g * (dual_factor * alpha[k] / lip);
        let w = alpha[k + 1] / acc[k + 1];
        x = &y_next * (1.0 - w) + &z_next * w;
        t.y.push(y_next);
        t.z.push(z_next);
    }
    let g = t.visit(source, x, horizon)?;
    t.y.push(&t.x[horizon] - &g / lip);
    Ok(t)
}

/// Generalized optimized gradient method with inexact gradients.
pub fn run_igogm(
    source: &mut (impl GradientSource + ?Sized),
    schedule: &StepsizeSchedule,
    x0: &Point,
) -> Result<Trajectory> {
    run_generalized(Method::Igogm, source, schedule, x0, 2.0)
}

/// Generalized fast gradient method with inexact gradients.
pub fn run_igfgm(
    source: &mut (impl GradientSource + ?Sized),
    schedule: &StepsizeSchedule,
    x0: &Point,
) -> Result<Trajectory> {
    run_generalized(Method::Igfgm, source, schedule, x0, 1.0)
}

fn check_stepsize_condition(schedule: &StepsizeSchedule) -> Result<()> {
    let (alpha, acc) = (schedule.alpha(), schedule.cumulative());
    if !(alpha[0] > 0.0 && alpha[0] <= 1.0) || (alpha[0] - acc[0]).abs() > 0.0 {
        return Err(invalid("need 0 < alpha_0 <= 1 and A_0 = alpha_0"));
    }
    for k in 1..alpha.len() {
        if alpha[k] * alpha[k] > acc[k] * (1.0 + 1e-12) {
            return Err(invalid(format!("stepsize condition alpha_{k}^2 <= A_{k} violated")));
        }
    }
    Ok(())
}

/// Fast gradient method with projections onto `set`.
///
/// Loops `k = 0..K-1`, then closes with `y_{K+1}` from the exact gradient at
/// `x_K`. `y_0` is stored as `x_0`.
pub fn run_ifgm(
    source: &mut (impl GradientSource + ?Sized),
    schedule: &StepsizeSchedule,
    x0: &Point,
    set: &FeasibleSet,
) -> Result<Trajectory> {
    let horizon = check_horizon(schedule)?;
    check_stepsize_condition(schedule)?;
    let (alpha, acc) = (schedule.alpha(), schedule.cumulative());
    let lip = source.problem().lipschitz();
    let mut t = Trajectory::start(Method::Ifgm, source, x0)?;
    t.y.push(x0.clone());
    t.z.push(x0.clone());
    let mut dual_sum = Point::zeros(x0.len());
    let mut x = x0.clone();
    for k in 0..horizon {
        let g = t.visit(source, x, k)?;
        dual_sum.axpy(alpha[k] / lip, &g, 1.0);
        let y_next = set.project(&(&t.x[k] - &g / lip));
        let z_next = set.project(&(x0 - &dual_sum));
        let w = alpha[k + 1] / acc[k + 1];
        x = &y_next * (1.0 - w) + &z_next * w;
        t.y.push(y_next);
        t.z.push(z_next);
    }
    let g = t.visit(source, x, horizon)?;
    t.y.push(set.project(&(&t.x[horizon] - &g / lip)));
    Ok(t)
}

/// Similar-triangles method: one projection per iteration, loop `k = 0..K`.
///
/// With `alpha_k^2 = A_k` and no constraint, `y_k` and `z_k` here equal
/// `y_{k+1}` and `z_{k+1}` of [`run_ifgm`] while `x_k` shares its index.
pub fn run_istm(
    source: &mut (impl GradientSource + ?Sized),
    schedule: &StepsizeSchedule,
    x0: &Point,
    set: &FeasibleSet,
) -> Result<Trajectory> {
    let horizon = check_horizon(schedule)?;
    check_stepsize_condition(schedule)?;
    let (alpha, acc) = (schedule.alpha(), schedule.cumulative());
    let lip = source.problem().lipschitz();
    let mut t = Trajectory::start(Method::Istm, source, x0)?;
    let mut dual_sum = Point::zeros(x0.len());
    let (mut y_prev, mut z_prev) = (Point::zeros(x0.len()), x0.clone());
    let mut acc_prev = 0.0;
    for k in 0..=horizon {
        let x = (&y_prev * acc_prev + &z_prev * alpha[k]) / acc[k];
        let g = t.visit(source, x, k)?;
        dual_sum.axpy(alpha[k] / lip, &g, 1.0);
        let z = set.project(&(x0 - &dual_sum));
        let y = (&y_prev * acc_prev + &z * alpha[k]) / acc[k];
        t.y.push(y.clone());
        t.z.push(z.clone());
        (y_prev, z_prev, acc_prev) = (y, z, acc[k]);
    }
    Ok(t)
}

/// Explicit first-order form `x_k = x_0 - (1/L) sum_{i<k} theta_{k,i} g~_i`.
pub fn run_igfo(source: &mut (impl GradientSource + ?Sized), theta: &ThetaTable, x0: &Point) -> Result<Trajectory> {
    let horizon = theta.horizon();
    if horizon < 1 {
        return Err(invalid("horizon K must be at least 1"));
    }
    let lip = source.problem().lipschitz();
    let mut t = Trajectory::start(Method::Igfo, source, x0)?;
    t.y.push(x0.clone());
    for k in 0..=horizon {
        let mut x = x0.clone();
        for (i, &c) in theta.row(k.max(1)).iter().enumerate().take(k) {
            x.axpy(-c / lip, &t.g_tilde[i], 1.0);
        }
        let g = t.visit(source, x, k)?;
        t.y.push(&t.x[k] - &g / lip);
    }
    Ok(t)
}

/// `alpha_0 = 1`, `alpha_{k+1} = (1 + sqrt(1 + 4 alpha_k^2)) / 2`; with the
/// last adjustment the final step uses `8 alpha^2` instead.
pub fn ogm_alphas(horizon: usize, last_adjustment: bool) -> Vec<f64> {
    let mut alpha: Vec<f64> = vec![1.0];
    for k in 0..horizon {
        let a = alpha[k];
        let factor = if last_adjustment && k + 1 == horizon { 8.0 } else { 4.0 };
        alpha.push((1.0 + (1.0 + factor * a * a).sqrt()) / 2.0);
    }
    alpha
}

/// Optimized gradient method with exact gradients.
pub fn run_ogm(problem: SharedProblem, x0: &Point, horizon: usize, last_adjustment: bool) -> Result<Trajectory> {
    if horizon < 1 {
        return Err(invalid("horizon K must be at least 1"));
    }
    let mut source = ExactOracle::new(problem);
    let alpha = ogm_alphas(horizon, last_adjustment);
    let lip = source.problem().lipschitz();
    let mut t = Trajectory::start(Method::Ogm, &source, x0)?;
    t.y.push(x0.clone());
    t.z.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..horizon {
        let g = t.visit(&mut source, x, k)?;
        let y_next = &t.x[k] - &g / lip;
        let z_next = &t.z[k] - &g * (2.0 * alpha[k] / lip);
        let w = 1.0 / alpha[k + 1];
        x = &y_next * (1.0 - w) + &z_next * w;
        t.y.push(y_next);
        t.z.push(z_next);
    }
    let g = t.visit(&mut source, x, horizon)?;
    t.y.push(&t.x[horizon] - &g / lip);
    Ok(t)
}

/// Plain gradient steps `x_{k+1} = x_k - g~_k / L`; `y_{k+1} = x_{k+1}`.
pub fn run_gradient_descent(
    source: &mut (impl GradientSource + ?Sized),
    horizon: usize,
    x0: &Point,
) -> Result<Trajectory> {
    if horizon < 1 {
        return Err(invalid("horizon K must be at least 1"));
    }
    let lip = source.problem().lipschitz();
    let mut t = Trajectory::start(Method::GradientDescent, source, x0)?;
    t.y.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..=horizon {
        let g = t.visit(source, x, k)?;
        x = &t.x[k] - &g / lip;
        t.y.push(x.clone());
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{builtin_problem, ErrorPolicy, InexactGradientOracle, Quadratic, RecordedErrors};
    use crate::schedules::{theta_fgm, theta_ogm, InexactnessSchedule};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn scalar_quadratic() -> SharedProblem {
        Arc::new(Quadratic::isotropic(1, 1.0))
    }

    fn recorded(problem: &SharedProblem, errors: Vec<f64>) -> RecordedErrors {
        RecordedErrors::new(
            problem.clone(),
            errors.into_iter().map(|e| Point::from_element(1, e)).collect(),
        )
    }

    #[test]
    fn igogm_hand_execution_k1() {
        let p = scalar_quadratic();
        let s = StepsizeSchedule::from_lambda(&[1.0], 1).unwrap();
        let t = run_igogm(&mut ExactOracle::new(p), &s, &Point::from_element(1, 1.0)).unwrap();
        let a1 = (1.0 + 5f64.sqrt()) / 2.0;
        assert_eq!(t.y[1][0], 0.0);
        assert_eq!(t.z[1][0], -1.0);
        assert_relative_eq!(t.x[1][0], -a1 / (1.0 + a1), max_relative = 1e-15);
        // alpha_1^2 = A_1, so alpha_1 / A_1 = 1 / alpha_1
        assert_relative_eq!(t.x[1][0], -0.618_033_988_749_894_9, max_relative = 1e-14);
    }

    #[test]
    fn igogm_first_step_is_linear_in_the_error() {
        // x_1 moves by -(1/L)((1 - w) + 2 w alpha_0) e_0 with w = alpha_1 / A_1
        let p = scalar_quadratic();
        let s = StepsizeSchedule::from_lambda(&[1.0], 1).unwrap();
        let x0 = Point::from_element(1, 1.0);
        let exact = run_igogm(&mut recorded(&p, vec![0.0]), &s, &x0).unwrap();
        let noisy = run_igogm(&mut recorded(&p, vec![0.1]), &s, &x0).unwrap();
        let w = s.alpha()[1] / s.cumulative()[1];
        let shift = -((1.0 - w) + 2.0 * w) * 0.1;
        assert_relative_eq!(noisy.x[1][0] - exact.x[1][0], shift, max_relative = 1e-13);
        assert_relative_eq!(noisy.y[1][0], -0.1, epsilon = 1e-15);
    }

    #[test]
    fn igfgm_hand_execution_k1() {
        let p = scalar_quadratic();
        let s = StepsizeSchedule::from_lambda(&[1.0], 1).unwrap();
        let t = run_igfgm(&mut ExactOracle::new(p), &s, &Point::from_element(1, 1.0)).unwrap();
        let a1 = (1.0 + 5f64.sqrt()) / 2.0;
        assert_eq!(t.z[1][0], 0.0);
        assert_eq!(t.x[1][0], 0.0);
        assert_relative_eq!(t.x[1][0], (1.0 - a1 / (1.0 + a1)) * 0.0, epsilon = 0.0);
    }

    #[test]
    fn dual_step_ratio_between_methods() {
        let p = builtin_problem("least-squares", 4, 1).unwrap();
        let s = StepsizeSchedule::from_lambda(&[0.6; 5], 5).unwrap();
        let x0 = Point::from_element(4, 1.0);
        let errs: Vec<Point> = (0..5).map(|k| Point::from_element(4, 0.01 * k as f64)).collect();
        let og = run_igogm(&mut RecordedErrors::new(p.clone(), errs.clone()), &s, &x0).unwrap();
        let fg = run_igfgm(&mut RecordedErrors::new(p, errs), &s, &x0).unwrap();
        // first dual step starts from the same point and gradient
        let d_og = &og.z[1] - &og.z[0];
        let d_fg = &fg.z[1] - &fg.z[0];
        assert_relative_eq!(d_og, d_fg * 2.0, max_relative = 1e-15);
    }

    #[test]
    fn trajectory_invariants_hold() {
        let p = builtin_problem("log-sum-exp", 5, 2).unwrap();
        let s = StepsizeSchedule::ogm_a(4.0, 8).unwrap();
        let mut o = InexactGradientOracle::new(
            p.clone(),
            ErrorPolicy::RandomUnitSphere,
            InexactnessSchedule::constant(8, 0.05).unwrap(),
            3,
        );
        let t = run_igogm(&mut o, &s, &Point::from_element(5, 0.5)).unwrap();
        assert_eq!(t.x.len(), 9);
        assert_eq!(t.y.len(), 10);
        assert_eq!(t.z.len(), 9);
        let lip = p.lipschitz();
        for k in 0..=8 {
            let y = &t.x[k] - &t.g_tilde[k] / lip;
            assert!((&y - &t.y[k + 1]).norm() <= 1e-12 * (1.0 + y.norm()));
            assert_eq!(&t.g_tilde[k] - &t.g_true[k], t.errors[k]);
        }
        assert_eq!(t.errors[8].norm(), 0.0);
    }

    #[test]
    fn igogm_with_lambda_one_matches_ogm() {
        let p = builtin_problem("quadratic-random", 6, 4).unwrap();
        let x0 = Point::from_element(6, 1.0);
        let s = StepsizeSchedule::from_lambda(&[1.0; 12], 12).unwrap();
        let a = run_igogm(&mut ExactOracle::new(p.clone()), &s, &x0).unwrap();
        let b = run_ogm(p, &x0, 12, false).unwrap();
        for k in 0..=12 {
            assert!((&a.x[k] - &b.x[k]).norm() <= 1e-12 * (1.0 + b.x[k].norm()));
        }
    }

    #[test]
    fn ogm_alpha_recursion() {
        let a = ogm_alphas(3, false);
        let mut want = vec![1.0];
        for k in 0..3 {
            let prev: f64 = want[k];
            want.push(0.5 + (0.25 + prev * prev).sqrt());
        }
        for k in 0..=3 {
            assert_relative_eq!(a[k], want[k], max_relative = 1e-15);
        }
        assert_relative_eq!(a[1], 1.618_033_988_749_895, max_relative = 1e-15);
        let adj = ogm_alphas(3, true);
        assert_eq!(&adj[..3], &a[..3]);
        assert_ne!(adj[3], a[3]);
        assert_relative_eq!(adj[3], (1.0 + (1.0 + 8.0 * a[2] * a[2]).sqrt()) / 2.0);
    }

    #[test]
    fn ogm_adjustment_changes_only_last_iterate() {
        let p = builtin_problem("least-squares", 5, 9).unwrap();
        let x0 = Point::from_element(5, -1.0);
        let a = run_ogm(p.clone(), &x0, 6, false).unwrap();
        let b = run_ogm(p, &x0, 6, true).unwrap();
        for k in 0..6 {
            assert_eq!(a.x[k], b.x[k]);
        }
        assert_ne!(a.x[6], b.x[6]);
    }

    #[test]
    fn ifgm_matches_igfgm_with_lambda_one() {
        let p = builtin_problem("log-sum-exp", 4, 8).unwrap();
        let s = StepsizeSchedule::from_lambda(&[1.0; 10], 10).unwrap();
        let x0 = Point::from_element(4, 0.7);
        let errs: Vec<Point> = (0..10)
            .map(|k| Point::from_fn(4, |i, _| 0.01 * ((k * 4 + i) as f64).sin()))
            .collect();
        let a = run_ifgm(
            &mut RecordedErrors::new(p.clone(), errs.clone()),
            &s,
            &x0,
            &FeasibleSet::WholeSpace,
        )
        .unwrap();
        let b = run_igfgm(&mut RecordedErrors::new(p, errs), &s, &x0).unwrap();
        for k in 0..=10 {
            assert!((&a.x[k] - &b.x[k]).norm() <= 1e-10 * (1.0 + b.x[k].norm()));
            assert!((&a.y[k + 1] - &b.y[k + 1]).norm() <= 1e-10 * (1.0 + b.y[k + 1].norm()));
        }
    }

    #[test]
    fn zero_ball_pins_everything_to_its_center() {
        let p = builtin_problem("quadratic-random", 3, 2).unwrap();
        let xs = p.minimizer().unwrap().clone();
        let set = FeasibleSet::ball(xs.clone(), 0.0).unwrap();
        let s = StepsizeSchedule::from_alpha(vec![1.0; 6]).unwrap();
        for t in [
            run_ifgm(&mut ExactOracle::new(p.clone()), &s, &xs, &set).unwrap(),
            run_istm(&mut ExactOracle::new(p.clone()), &s, &xs, &set).unwrap(),
        ] {
            for v in t.x.iter().chain(&t.y).chain(&t.z) {
                assert!((v - &xs).norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn ifgm_exact_rate_on_quadratic() {
        let p = builtin_problem("quadratic-random", 8, 5).unwrap();
        let xs = p.minimizer().unwrap();
        let x0 = Point::zeros(8);
        let s = StepsizeSchedule::from_lambda(&[1.0; 20], 20).unwrap();
        let t = run_ifgm(&mut ExactOracle::new(p.clone()), &s, &x0, &FeasibleSet::WholeSpace).unwrap();
        let gap = p.value(&t.y[21]) - p.optimal_value().unwrap();
        let bound = p.lipschitz() * (&x0 - xs).norm_squared() / s.final_weight();
        assert!(gap <= bound, "{gap} > {bound}");
    }

    #[test]
    fn istm_single_pass() {
        // K = 0 in loop terms: y_0 = z_0 = x_0 - alpha_0 g~_0 / L, x_0 unchanged
        let p = scalar_quadratic();
        let s = StepsizeSchedule::from_alpha(vec![1.0, 1.0]).unwrap();
        let t = run_istm(
            &mut ExactOracle::new(p),
            &s,
            &Point::from_element(1, 2.0),
            &FeasibleSet::WholeSpace,
        )
        .unwrap();
        assert_eq!(t.x[0][0], 2.0);
        assert_eq!(t.z[0][0], 0.0);
        assert_eq!(t.y[0][0], 0.0);
    }

    #[test]
    fn istm_respects_ball() {
        let p = builtin_problem("least-squares", 4, 3).unwrap();
        let set = FeasibleSet::ball(Point::zeros(4), 0.5).unwrap();
        let s = StepsizeSchedule::from_lambda(&[1.0; 8], 8).unwrap();
        let s = StepsizeSchedule::from_alpha(s.alpha().to_vec()).unwrap();
        let t = run_istm(&mut ExactOracle::new(p), &s, &Point::zeros(4), &set).unwrap();
        for z in &t.z {
            assert!(z.norm() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn stepsize_condition_is_enforced() {
        let p = scalar_quadratic();
        let s = StepsizeSchedule::ogm_a(4.0, 3).unwrap();
        let ok = run_ifgm(
            &mut ExactOracle::new(p.clone()),
            &s,
            &Point::zeros(1),
            &FeasibleSet::WholeSpace,
        );
        assert!(ok.is_ok());
        let bad = StepsizeSchedule::from_lambda(&[1.0], 1).unwrap();
        assert!(run_istm(
            &mut ExactOracle::new(p),
            &bad,
            &Point::zeros(1),
            &FeasibleSet::WholeSpace
        )
        .is_ok());
    }

    #[test]
    fn igfo_matches_recursive_forms() {
        let p = builtin_problem("least-squares", 5, 6).unwrap();
        let s = StepsizeSchedule::from_lambda(&[0.3, 0.8, 0.5, 0.9, 0.2, 0.6], 6).unwrap();
        let x0 = Point::from_element(5, 1.5);
        let mut o = InexactGradientOracle::new(
            p.clone(),
            ErrorPolicy::GradientOpposed,
            InexactnessSchedule::constant(6, 0.02).unwrap(),
            1,
        );
        for (theta, run) in [
            (theta_ogm(&s), run_igogm(&mut o, &s, &x0).unwrap()),
            (theta_fgm(&s), run_igfgm(&mut o, &s, &x0).unwrap()),
        ] {
            let mut replay = RecordedErrors::new(p.clone(), run.errors.clone());
            let t = run_igfo(&mut replay, &theta, &x0).unwrap();
            for k in 0..=6 {
                let dev = (&t.x[k] - &run.x[k]).norm() / run.x[k].norm().max(1.0);
                assert!(dev <= 1e-12, "k={k} dev={dev}");
            }
        }
    }

    #[test]
    fn igfo_with_zero_theta_stays_put() {
        let p = scalar_quadratic();
        let t = run_igfo(
            &mut ExactOracle::new(p),
            &ThetaTable::zeros(4),
            &Point::from_element(1, 3.0),
        )
        .unwrap();
        assert!(t.x.iter().all(|x| x[0] == 3.0));
    }

    #[test]
    fn dimension_mismatch_and_nan_detection() {
        let p = builtin_problem("quadratic-random", 3, 0).unwrap();
        let s = StepsizeSchedule::constant(2).unwrap();
        assert!(matches!(
            run_igogm(&mut ExactOracle::new(p.clone()), &s, &Point::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut x0 = Point::zeros(3);
        x0[1] = f64::NAN;
        assert!(matches!(
            run_igogm(&mut ExactOracle::new(p), &s, &x0),
            Err(Error::NumericalFailure { iteration: 0 })
        ));
    }

    #[test]
    fn identical_seeds_give_identical_bits() {
        let p = builtin_problem("log-sum-exp", 6, 1).unwrap();
        let s = StepsizeSchedule::ogm_a(4.0, 10).unwrap();
        let run = || {
            let mut o = InexactGradientOracle::new(
                p.clone(),
                ErrorPolicy::RandomUnitSphere,
                InexactnessSchedule::constant(10, 0.1).unwrap(),
                77,
            );
            run_igogm(&mut o, &s, &Point::from_element(6, 1.0)).unwrap()
        };
        let (a, b) = (run(), run());
        for k in 0..=10 {
            let bits = |v: &Point| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.x[k]), bits(&b.x[k]));
        }
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        let set = FeasibleSet::ball(Point::from_vec(vec![1.0, -1.0]), 0.7).unwrap();
        let pts: Vec<Point> = (0..20)
            .map(|i| Point::from_vec(vec![(i as f64).sin() * 3.0, (i as f64 * 0.7).cos() * 2.0]))
            .collect();
        for a in &pts {
            let pa = set.project(a);
            assert!((set.project(&pa) - &pa).norm() <= 1e-15);
            for b in &pts {
                assert!((&pa - set.project(b)).norm() <= (a - b).norm() + 1e-12);
            }
        }
        assert!(FeasibleSet::ball(Point::zeros(2), -1.0).is_err());
    }

    #[test]
    fn trajectory_csv_shape() {
        let p = builtin_problem("quadratic-random", 3, 0).unwrap();
        let s = StepsizeSchedule::constant(3).unwrap();
        let t = run_igogm(&mut ExactOracle::new(p), &s, &Point::zeros(3)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,f_gap,measure,grad_norm,err_norm,x_norm_dist_to_opt");
        assert_eq!(lines.len(), 5);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
    }

    #[test]
    fn gradient_descent_baseline_decreases() {
        let p = builtin_problem("least-squares", 4, 2).unwrap();
        let t = run_gradient_descent(&mut ExactOracle::new(p), 20, &Point::from_element(4, 2.0)).unwrap();
        for k in 0..20 {
            assert!(t.values[k + 1] <= t.values[k] + 1e-14);
        }
    }
}
