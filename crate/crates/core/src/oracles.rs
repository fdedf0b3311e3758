//! Smooth convex test problems and gradient oracles with bounded absolute error.
//!
//! An inexact oracle returns `g~ = grad f(x) + e` with `|e| <= b_k`. Errors are
//! drawn deterministically from `(seed, k, x)`, so an oracle is immutable and
//! two runs with the same seed see bit-identical errors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::schedules::InexactnessSchedule;

pub type Point = DVector<f64>;

/// A convex function with `L`-Lipschitz gradient.
pub trait SmoothConvex: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn lipschitz(&self) -> f64;

    fn minimizer(&self) -> Option<&Point> {
        None
    }

    fn optimal_value(&self) -> Option<f64> {
        None
    }
}

pub type SharedProblem = Arc<dyn SmoothConvex>;

fn check_dim(expected: usize, x: &Point) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

fn largest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> Point {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `f(x) = 1/2 (x - x*)' H (x - x*) + f*` with `H` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Quadratic {
    name: String,
    hessian: DMatrix<f64>,
    center: Point,
    offset: f64,
    lipschitz: f64,
}

impl Quadratic {
    pub fn new(name: impl Into<String>, hessian: DMatrix<f64>, center: Point, offset: f64) -> Result<Self> {
        if !hessian.is_square() || hessian.nrows() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                got: hessian.nrows(),
            });
        }
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        let lipschitz = largest_eigenvalue(&hessian);
        if !(lipschitz > 0.0) {
            return Err(invalid("quadratic needs a nonzero Hessian"));
        }
        Ok(Self {
            name: name.into(),
            hessian,
            center,
            offset,
            lipschitz,
        })
    }

    /// `(L/2) |x|^2`, the equality case of most inequalities in this crate.
    pub fn isotropic(dimension: usize, lipschitz: f64) -> Self {
        Self {
            name: "quadratic-isotropic".into(),
            hessian: DMatrix::identity(dimension, dimension) * lipschitz,
            center: DVector::zeros(dimension),
            offset: 0.0,
            lipschitz,
        }
    }

    /// Random Wishart-like Hessian with a small ridge; the minimizer comes from
    /// a Cholesky solve of `H x = c`.
    pub fn random(dimension: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = gaussian_matrix(&mut rng, dimension, dimension);
        let hessian = b.transpose() * &b / dimension as f64 + DMatrix::identity(dimension, dimension) * 0.01;
        let linear = gaussian_vector(&mut rng, dimension);
        let center = hessian
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("random Hessian is not positive definite"))?
            .solve(&linear);
        Self::new("quadratic-random", hessian, center, 0.0)
    }

    /// Diagonal Hessian with eigenvalues spread geometrically over six decades.
    pub fn ill_conditioned(dimension: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spread = dimension.saturating_sub(1).max(1) as f64;
        let diag = DVector::from_fn(dimension, |i, _| 10f64.powf(-6.0 * i as f64 / spread));
        let center = gaussian_vector(&mut rng, dimension);
        Self::new("quadratic-worstcase-ill", DMatrix::from_diagonal(&diag), center, 0.0)
    }
}

impl SmoothConvex for Quadratic {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Point) -> f64 {
        let d = x - &self.center;
        0.5 * d.dot(&(&self.hessian * &d)) + self.offset
    }

    fn gradient(&self, x: &Point) -> Point {
        &self.hessian * (x - &self.center)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn minimizer(&self) -> Option<&Point> {
        Some(&self.center)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.offset)
    }
}

/// `f(x) = 1/2 |A x - y|^2` with a consistent target `y = A x_true`, so `f* = 0`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    design: DMatrix<f64>,
    target: Point,
    solution: Point,
    lipschitz: f64,
}

impl LeastSquares {
    pub fn new(design: DMatrix<f64>, solution: Point) -> Result<Self> {
        if design.ncols() != solution.len() {
            return Err(Error::DimensionMismatch {
                expected: design.ncols(),
                got: solution.len(),
            });
        }
        let lipschitz = largest_eigenvalue(&(design.transpose() * &design));
        if !(lipschitz > 0.0) {
            return Err(invalid("least-squares design matrix is zero"));
        }
        let target = &design * &solution;
        Ok(Self {
            design,
            target,
            solution,
            lipschitz,
        })
    }

    /// `2d x d` Gaussian design, random planted solution.
    pub fn random(dimension: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let design = gaussian_matrix(&mut rng, 2 * dimension, dimension) / (dimension as f64).sqrt();
        let solution = gaussian_vector(&mut rng, dimension);
        Self::new(design, solution)
    }
}

impl SmoothConvex for LeastSquares {
    fn name(&self) -> &str {
        "least-squares"
    }

    fn dimension(&self) -> usize {
        self.solution.len()
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * (&self.design * x - &self.target).norm_squared()
    }

    fn gradient(&self, x: &Point) -> Point {
        self.design.transpose() * (&self.design * x - &self.target)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn minimizer(&self) -> Option<&Point> {
        Some(&self.solution)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `f(x) = sigma * log sum_j exp(+-a_j'(x - c) / sigma)` over the rows of `A`
/// and their negations.
///
/// The symmetric row set puts the minimizer at `c` with
/// `f* = sigma * log(2m)`. The Hessian is bounded by `A'A / sigma`.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    rows: DMatrix<f64>,
    center: Point,
    sigma: f64,
    lipschitz: f64,
}

impl LogSumExp {
    pub fn new(rows: DMatrix<f64>, center: Point, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(invalid(format!("log-sum-exp needs sigma > 0, got {sigma}")));
        }
        if rows.ncols() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.ncols(),
                got: center.len(),
            });
        }
        let lipschitz = largest_eigenvalue(&(rows.transpose() * &rows)) / sigma;
        Ok(Self {
            rows,
            center,
            sigma,
            lipschitz,
        })
    }

    pub fn random(dimension: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = gaussian_matrix(&mut rng, 2 * dimension, dimension) / (dimension as f64).sqrt();
        let center = gaussian_vector(&mut rng, dimension);
        Self::new(rows, center, 1.0)
    }

    /// Scaled activations `a_j'(x - c) / sigma` and their log-sum-exp over `+-`.
    fn activations(&self, x: &Point) -> (Point, f64) {
        let s = &self.rows * (x - &self.center) / self.sigma;
        let peak = s.amax();
        let total: f64 = s.iter().map(|&t| (t - peak).exp() + (-t - peak).exp()).sum();
        (s, peak + total.ln())
    }
}

impl SmoothConvex for LogSumExp {
    fn name(&self) -> &str {
        "log-sum-exp"
    }

    fn dimension(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Point) -> f64 {
        self.sigma * self.activations(x).1
    }

    fn gradient(&self, x: &Point) -> Point {
        let (s, lse) = self.activations(x);
        // weight of +a_j minus weight of -a_j
        let w = s.map(|t| (t - lse).exp() - (-t - lse).exp());
        self.rows.transpose() * w
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn minimizer(&self) -> Option<&Point> {
        Some(&self.center)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.sigma * ((2 * self.rows.nrows()) as f64).ln())
    }
}

/// `f(x) = c'x`; belongs to every smoothness class, no minimizer.
#[derive(Debug, Clone)]
pub struct Linear {
    slope: Point,
}

impl Linear {
    pub fn new(slope: Point) -> Self {
        Self { slope }
    }
}

impl SmoothConvex for Linear {
    fn name(&self) -> &str {
        "linear"
    }

    fn dimension(&self) -> usize {
        self.slope.len()
    }

    fn value(&self, x: &Point) -> f64 {
        self.slope.dot(x)
    }

    fn gradient(&self, _x: &Point) -> Point {
        self.slope.clone()
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// Reports a larger smoothness constant than the wrapped problem's own.
pub struct LipschitzOverride {
    inner: SharedProblem,
    lipschitz: f64,
}

impl LipschitzOverride {
    pub fn new(inner: SharedProblem, lipschitz: f64) -> Result<Self> {
        let own = inner.lipschitz();
        if !(lipschitz >= own * (1.0 - 1e-12)) {
            return Err(invalid(format!(
                "L override {lipschitz} is below the problem's constant {own}"
            )));
        }
        Ok(Self { inner, lipschitz })
    }
}

impl SmoothConvex for LipschitzOverride {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    fn value(&self, x: &Point) -> f64 {
        self.inner.value(x)
    }
    fn gradient(&self, x: &Point) -> Point {
        self.inner.gradient(x)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn minimizer(&self) -> Option<&Point> {
        self.inner.minimizer()
    }
    fn optimal_value(&self) -> Option<f64> {
        self.inner.optimal_value()
    }
}

pub const BUILTIN_PROBLEMS: [&str; 4] = [
    "quadratic-random",
    "least-squares",
    "log-sum-exp",
    "quadratic-worstcase-ill",
];

pub fn builtin_problem(name: &str, dimension: usize, seed: u64) -> Result<SharedProblem> {
    if dimension == 0 {
        return Err(invalid("dimension must be positive"));
    }
    Ok(match name {
        "quadratic-random" => Arc::new(Quadratic::random(dimension, seed)?),
        "least-squares" => Arc::new(LeastSquares::random(dimension, seed)?),
        "log-sum-exp" => Arc::new(LogSumExp::random(dimension, seed)?),
        "quadratic-worstcase-ill" => Arc::new(Quadratic::ill_conditioned(dimension, seed)?),
        other => return Err(Error::UnknownProblem(other.to_string())),
    })
}

/// Config-file description of a builtin problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<SharedProblem> {
        builtin_problem(&self.name, self.dimension, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorPolicy {
    RandomUnitSphere,
    FixedDirection,
    GradientAligned,
    GradientOpposed,
}

impl ErrorPolicy {
    pub const ALL: [ErrorPolicy; 4] = [
        ErrorPolicy::RandomUnitSphere,
        ErrorPolicy::FixedDirection,
        ErrorPolicy::GradientAligned,
        ErrorPolicy::GradientOpposed,
    ];
}

/// One oracle answer.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub g_true: Point,
    pub g_tilde: Point,
    pub error: Point,
}

impl OracleSample {
    /// Stores the realized error `g~ - g` so that the identity holds bit for bit.
    fn from_error(g_true: Point, error: Point) -> Self {
        let g_tilde = &g_true + &error;
        let error = &g_tilde - &g_true;
        Self { g_tilde, g_true, error }
    }
}

/// Seeded direction on the unit sphere, for placing starting points.
pub fn random_unit_vector(dimension: usize, seed: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unit_gaussian_direction(&mut rng, dimension)
}

fn unit_gaussian_direction(rng: &mut ChaCha8Rng, dimension: usize) -> Point {
    loop {
        let v = gaussian_vector(rng, dimension);
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

/// Absolute-error oracle: every error has norm exactly `b_k`.
///
/// Randomness comes from a ChaCha8 stream keyed by the seed: stream 0 yields
/// the fixed direction, stream `k + 1` the draw at iteration `k`.
#[derive(Clone)]
pub struct InexactGradientOracle {
    problem: SharedProblem,
    policy: ErrorPolicy,
    schedule: InexactnessSchedule,
    seed: u64,
    fixed: Point,
}

impl InexactGradientOracle {
    pub fn new(problem: SharedProblem, policy: ErrorPolicy, schedule: InexactnessSchedule, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let fixed = unit_gaussian_direction(&mut rng, problem.dimension());
        Self {
            problem,
            policy,
            schedule,
            seed,
            fixed,
        }
    }

    pub fn problem(&self) -> &SharedProblem {
        &self.problem
    }

    pub fn schedule(&self) -> &InexactnessSchedule {
        &self.schedule
    }

    pub fn query(&self, x: &Point, k: usize) -> Result<OracleSample> {
        check_dim(self.problem.dimension(), x)?;
        let g = self.problem.gradient(x);
        let level = self.schedule.level(k);
        if level == 0.0 {
            let zero = Point::zeros(g.len());
            return Ok(OracleSample::from_error(g, zero));
        }
        let direction = match self.policy {
            ErrorPolicy::RandomUnitSphere => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(k as u64 + 1);
                unit_gaussian_direction(&mut rng, g.len())
            }
            ErrorPolicy::FixedDirection => self.fixed.clone(),
            ErrorPolicy::GradientAligned | ErrorPolicy::GradientOpposed => {
                let n = g.norm();
                let base = if n > 0.0 { &g / n } else { self.fixed.clone() };
                if self.policy == ErrorPolicy::GradientAligned {
                    base
                } else {
                    -base
                }
            }
        };
        Ok(OracleSample::from_error(g, direction * level))
    }
}

/// Where an algorithm gets its gradients from.
pub trait GradientSource {
    fn problem(&self) -> &dyn SmoothConvex;
    fn sample(&mut self, x: &Point, k: usize) -> Result<OracleSample>;
}

impl GradientSource for InexactGradientOracle {
    fn problem(&self) -> &dyn SmoothConvex {
        self.problem.as_ref()
    }

    fn sample(&mut self, x: &Point, k: usize) -> Result<OracleSample> {
        self.query(x, k)
    }
}

pub struct ExactOracle {
    problem: SharedProblem,
}

impl ExactOracle {
    pub fn new(problem: SharedProblem) -> Self {
        Self { problem }
    }
}

impl GradientSource for ExactOracle {
    fn problem(&self) -> &dyn SmoothConvex {
        self.problem.as_ref()
    }

    fn sample(&mut self, x: &Point, _k: usize) -> Result<OracleSample> {
        check_dim(self.problem.dimension(), x)?;
        let g = self.problem.gradient(x);
        let zero = Point::zeros(g.len());
        Ok(OracleSample::from_error(g, zero))
    }
}

/// Replays a fixed error stream `e_0, e_1, ...`; zero past its end.
pub struct RecordedErrors {
    problem: SharedProblem,
    errors: Vec<Point>,
}

impl RecordedErrors {
    pub fn new(problem: SharedProblem, errors: Vec<Point>) -> Self {
        Self { problem, errors }
    }
}

impl GradientSource for RecordedErrors {
    fn problem(&self) -> &dyn SmoothConvex {
        self.problem.as_ref()
    }

    fn sample(&mut self, x: &Point, k: usize) -> Result<OracleSample> {
        check_dim(self.problem.dimension(), x)?;
        let g = self.problem.gradient(x);
        let e = match self.errors.get(k) {
            Some(e) => {
                check_dim(g.len(), e)?;
                e.clone()
            }
            None => Point::zeros(g.len()),
        };
        Ok(OracleSample::from_error(g, e))
    }
}

/// Bounded perturbation `delta(x)` with `|delta| <= amplitude`, added to
/// function values seen by the zero-order estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValueNoise {
    None,
    /// `amplitude * sin(37.1 * sum_i x_i)`.
    Sinusoidal {
        amplitude: f64,
    },
    /// Uniform on `[-amplitude, amplitude]`, a pure function of `x` and the seed.
    Uniform {
        amplitude: f64,
        seed: u64,
    },
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl ValueNoise {
    pub fn amplitude(&self) -> f64 {
        match *self {
            ValueNoise::None => 0.0,
            ValueNoise::Sinusoidal { amplitude } | ValueNoise::Uniform { amplitude, .. } => amplitude,
        }
    }

    pub fn delta(&self, x: &Point) -> f64 {
        match *self {
            ValueNoise::None => 0.0,
            ValueNoise::Sinusoidal { amplitude } => amplitude * (x.sum() * 37.1).sin(),
            ValueNoise::Uniform { amplitude, seed } => {
                let h = x.iter().fold(splitmix64(seed), |h, v| splitmix64(h ^ v.to_bits()));
                let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
                amplitude * (2.0 * unit - 1.0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let a = self.amplitude();
        if !(a >= 0.0) || !a.is_finite() {
            return Err(invalid(format!("value-noise amplitude {a} must be >= 0")));
        }
        Ok(())
    }
}

fn noisy_value(problem: &dyn SmoothConvex, noise: &ValueNoise, x: &Point) -> f64 {
    problem.value(x) + noise.delta(x)
}

/// Forward differences along the coordinate axes, `d + 1` evaluations.
///
/// Error bound: `sqrt(d) L l / 2 + 2 sqrt(d) b_f / l`.
pub fn forward_fd_gradient(problem: &dyn SmoothConvex, x: &Point, step: f64, noise: &ValueNoise) -> Result<Point> {
    if !(step > 0.0) {
        return Err(invalid(format!("finite-difference step must be > 0, got {step}")));
    }
    noise.validate()?;
    check_dim(problem.dimension(), x)?;
    let base = noisy_value(problem, noise, x);
    let mut probe = x.clone();
    let mut out = Point::zeros(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        out[i] = (noisy_value(problem, noise, &probe) - base) / step;
        probe[i] = x[i];
    }
    Ok(out)
}

pub fn forward_fd_error_bound(dimension: usize, lipschitz: f64, step: f64, noise_amplitude: f64) -> f64 {
    let rd = (dimension as f64).sqrt();
    rd * lipschitz * step / 2.0 + 2.0 * rd * noise_amplitude / step
}

/// Average of `samples` Gaussian directional differences.
///
/// Bias bound of the expectation: `sqrt(d) L l + sqrt(d) b_f / l`.
pub fn gaussian_smoothing_gradient(
    problem: &dyn SmoothConvex,
    x: &Point,
    step: f64,
    samples: usize,
    noise: &ValueNoise,
    seed: u64,
) -> Result<Point> {
    if !(step > 0.0) {
        return Err(invalid(format!("smoothing step must be > 0, got {step}")));
    }
    if samples < 1 {
        return Err(invalid("sample count must be at least 1"));
    }
    noise.validate()?;
    check_dim(problem.dimension(), x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = noisy_value(problem, noise, x);
    let mut acc = Point::zeros(x.len());
    for _ in 0..samples {
        let v = gaussian_vector(&mut rng, x.len());
        let shifted = x + &v * step;
        let slope = (noisy_value(problem, noise, &shifted) - base) / step;
        acc.axpy(slope, &v, 1.0);
    }
    Ok(acc / samples as f64)
}

pub fn gaussian_smoothing_bias_bound(dimension: usize, lipschitz: f64, step: f64, noise_amplitude: f64) -> f64 {
    let rd = (dimension as f64).sqrt();
    rd * lipschitz * step + rd * noise_amplitude / step
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Point {
        gaussian_vector(rng, d)
    }

    fn central_difference(p: &dyn SmoothConvex, x: &Point, h: f64) -> Point {
        let mut out = Point::zeros(x.len());
        let mut probe = x.clone();
        for i in 0..x.len() {
            probe[i] = x[i] + h;
            let up = p.value(&probe);
            probe[i] = x[i] - h;
            let down = p.value(&probe);
            probe[i] = x[i];
            out[i] = (up - down) / (2.0 * h);
        }
        out
    }

    #[test]
    fn builtin_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for name in BUILTIN_PROBLEMS {
            let p = builtin_problem(name, 6, 3).unwrap();
            for _ in 0..20 {
                let x = random_point(&mut rng, 6);
                let g = p.gradient(&x);
                let fd = central_difference(p.as_ref(), &x, 1e-5);
                let rel = (&g - &fd).norm() / g.norm().max(1e-8);
                assert!(rel <= 1e-6, "{name}: rel err {rel}");
            }
        }
    }

    #[test]
    fn builtin_minimizers_are_stationary() {
        for name in BUILTIN_PROBLEMS {
            let p = builtin_problem(name, 8, 11).unwrap();
            let xs = p.minimizer().unwrap();
            assert!(p.gradient(xs).norm() <= 1e-10, "{name}");
            assert_relative_eq!(
                p.value(xs),
                p.optimal_value().unwrap(),
                epsilon = 1e-12,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn builtin_lipschitz_and_convexity_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for name in BUILTIN_PROBLEMS {
            let p = builtin_problem(name, 7, 1).unwrap();
            let lip = p.lipschitz();
            for _ in 0..30 {
                let x = random_point(&mut rng, 7);
                let y = random_point(&mut rng, 7);
                let (gx, gy) = (p.gradient(&x), p.gradient(&y));
                assert!((&gx - &gy).norm() <= lip * (&x - &y).norm() * (1.0 + 1e-12), "{name}");
                assert!(p.value(&y) >= p.value(&x) + gx.dot(&(&y - &x)) - 1e-12, "{name}");
            }
        }
    }

    #[test]
    fn quadratic_random_lipschitz_is_top_eigenvalue() {
        let p = Quadratic::random(10, 7).unwrap();
        let eig = p.hessian.clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| e > 0.0));
        assert_eq!(p.lipschitz(), eig.max());
    }

    #[test]
    fn zero_target_least_squares() {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 1.0, 1.0]);
        let p = LeastSquares::new(design, Point::zeros(2)).unwrap();
        assert_eq!(p.optimal_value(), Some(0.0));
        assert_eq!(p.value(&Point::zeros(2)), 0.0);
    }

    #[test]
    fn unknown_problem_is_an_error() {
        assert!(matches!(
            builtin_problem("rosenbrock", 3, 0),
            Err(Error::UnknownProblem(_))
        ));
    }

    #[test]
    fn lipschitz_override_must_not_shrink() {
        let p: SharedProblem = Arc::new(Quadratic::isotropic(2, 3.0));
        assert!(LipschitzOverride::new(p.clone(), 2.0).is_err());
        assert_eq!(LipschitzOverride::new(p, 5.0).unwrap().lipschitz(), 5.0);
    }

    fn oracle(policy: ErrorPolicy, b: f64, seed: u64) -> InexactGradientOracle {
        let p = builtin_problem("log-sum-exp", 5, 2).unwrap();
        let sched = InexactnessSchedule::constant(4, b).unwrap();
        InexactGradientOracle::new(p, policy, sched, seed)
    }

    #[test]
    fn exact_level_returns_true_gradient() {
        let o = oracle(ErrorPolicy::RandomUnitSphere, 0.0, 1);
        let x = Point::from_element(5, 0.3);
        let s = o.query(&x, 0).unwrap();
        assert_eq!(s.g_tilde, s.g_true);
        assert_eq!(s.error.norm(), 0.0);
        // b_K reads as zero
        let o = oracle(ErrorPolicy::RandomUnitSphere, 0.5, 1);
        assert_eq!(o.query(&x, 4).unwrap().error.norm(), 0.0);
    }

    #[test]
    fn gradient_aligned_scales_gradient() {
        let p: SharedProblem = Arc::new(Linear::new(Point::from_vec(vec![0.6, 0.8])));
        let o = InexactGradientOracle::new(
            p,
            ErrorPolicy::GradientAligned,
            InexactnessSchedule::constant(1, 0.1).unwrap(),
            0,
        );
        let s = o.query(&Point::zeros(2), 0).unwrap();
        assert_relative_eq!(s.g_tilde, s.g_true * 1.1, max_relative = 1e-15);
        assert_relative_eq!(s.error.norm(), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn every_policy_saturates_the_level() {
        let x = Point::from_element(5, -0.2);
        for policy in ErrorPolicy::ALL {
            let o = oracle(policy, 0.01, 42);
            for k in 0..4 {
                let s = o.query(&x, k).unwrap();
                assert!((s.error.norm() - 0.01).abs() <= 1e-12, "{policy:?}");
                assert_eq!(&s.g_tilde - &s.g_true, s.error);
            }
        }
    }

    #[test]
    fn random_policy_is_reproducible() {
        let x = Point::from_element(5, 1.0);
        let a = oracle(ErrorPolicy::RandomUnitSphere, 0.1, 9);
        let b = oracle(ErrorPolicy::RandomUnitSphere, 0.1, 9);
        for k in 0..4 {
            let (ea, eb) = (a.query(&x, k).unwrap().error, b.query(&x, k).unwrap().error);
            let bits = |e: &Point| e.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&ea), bits(&eb));
        }
        let c = oracle(ErrorPolicy::RandomUnitSphere, 0.1, 10);
        assert_ne!(a.query(&x, 0).unwrap().error, c.query(&x, 0).unwrap().error);
        assert_ne!(a.query(&x, 0).unwrap().error, a.query(&x, 1).unwrap().error);
    }

    #[test]
    fn query_checks_dimension() {
        let o = oracle(ErrorPolicy::FixedDirection, 0.1, 0);
        assert!(matches!(
            o.query(&Point::zeros(3), 0),
            Err(Error::DimensionMismatch { expected: 5, got: 3 })
        ));
    }

    #[test]
    fn forward_fd_on_isotropic_quadratic() {
        // (f(x + l e_i) - f(x)) / l = L x_i + L l / 2 for f = (L/2)|x|^2
        let lip = 3.0;
        let step = 0.25;
        let p = Quadratic::isotropic(4, lip);
        let x = Point::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
        let g = forward_fd_gradient(&p, &x, step, &ValueNoise::None).unwrap();
        for i in 0..4 {
            assert_relative_eq!(g[i], lip * x[i] + lip * step / 2.0, epsilon = 1e-12);
        }
        let err = (&g - p.gradient(&x)).norm();
        assert_relative_eq!(err, forward_fd_error_bound(4, lip, step, 0.0), max_relative = 1e-12);
    }

    #[test]
    fn forward_fd_is_exact_on_linear() {
        let p = Linear::new(Point::from_vec(vec![2.0, -1.0, 0.5]));
        let g = forward_fd_gradient(&p, &Point::from_element(3, 0.7), 1e-3, &ValueNoise::None).unwrap();
        assert_relative_eq!(g, p.gradient(&Point::zeros(3)), epsilon = 1e-10);
    }

    #[test]
    fn forward_fd_noisy_within_bound() {
        let p = Quadratic::isotropic(2, 1.0);
        let bound = forward_fd_error_bound(2, 1.0, 0.1, 0.001);
        assert_relative_eq!(
            bound,
            2f64.sqrt() * 0.05 + 2.0 * 2f64.sqrt() * 0.01,
            max_relative = 1e-15
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for noise in [
            ValueNoise::Sinusoidal { amplitude: 0.001 },
            ValueNoise::Uniform {
                amplitude: 0.001,
                seed: 4,
            },
        ] {
            for _ in 0..50 {
                let x = random_point(&mut rng, 2);
                let g = forward_fd_gradient(&p, &x, 0.1, &noise).unwrap();
                assert!((&g - p.gradient(&x)).norm() <= bound);
            }
        }
    }

    #[test]
    fn zero_order_rejects_bad_parameters() {
        let p = Quadratic::isotropic(2, 1.0);
        let x = Point::zeros(2);
        assert!(forward_fd_gradient(&p, &x, 0.0, &ValueNoise::None).is_err());
        assert!(gaussian_smoothing_gradient(&p, &x, -1.0, 5, &ValueNoise::None, 0).is_err());
        assert!(gaussian_smoothing_gradient(&p, &x, 0.1, 0, &ValueNoise::None, 0).is_err());
    }

    #[test]
    fn uniform_value_noise_is_bounded_and_pure() {
        let n = ValueNoise::Uniform {
            amplitude: 0.5,
            seed: 8,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let x = random_point(&mut rng, 3);
            let d = n.delta(&x);
            assert!(d.abs() <= 0.5);
            assert_eq!(d.to_bits(), n.delta(&x).to_bits());
        }
    }

    #[test]
    fn gaussian_smoothing_is_unbiased_on_linear() {
        let p = Linear::new(Point::from_vec(vec![1.0, -2.0]));
        let x = Point::from_vec(vec![0.3, 0.1]);
        let seeds = 200;
        let mut mean = Point::zeros(2);
        for s in 0..seeds {
            mean += gaussian_smoothing_gradient(&p, &x, 0.1, 200, &ValueNoise::None, s).unwrap();
        }
        mean /= seeds as f64;
        assert!((&mean - p.gradient(&x)).norm() < 0.05);
    }

    #[test]
    fn gaussian_smoothing_variance_decays_with_samples() {
        // Monte-Carlo variance over 100 seeds, n = 1 against n = 10^4
        let p = Quadratic::isotropic(3, 1.0);
        let x = Point::from_vec(vec![1.0, 0.5, -0.5]);
        let g = p.gradient(&x);
        let spread = |n: usize| {
            (0..100u64)
                .map(|s| {
                    let est = gaussian_smoothing_gradient(&p, &x, 0.01, n, &ValueNoise::None, 1000 + s).unwrap();
                    (est - &g).norm_squared()
                })
                .sum::<f64>()
                / 100.0
        };
        let ratio = spread(1) / spread(10_000);
        assert!(ratio > 2e3 && ratio < 5e4, "variance ratio {ratio}");
    }
}
