//! Dual certificates for the optimized-gradient bound.
//!
//! Matrices live on the basis `[x_0 | e_0 .. e_{K-1} | g_0 .. g_K]` of order
//! `2K + 2`, 0-based: `x_0 -> 0`, `e_i -> 1 + i`, `g_i -> K + 1 + i`. Displays
//! written 1-based map index `n` to `n - 1`.
//!
//! A certificate `(tau, v, v*, u)` is feasible when the function-value
//! coefficients cancel and the matrix
//! `tau x0 x0' + sum u_i e_i e_i' + sum v_{i,i+1} A^{i,i+1} + sum v*_i A^{*,i} + g_K g_K' / (2L)`
//! is positive semidefinite. That matrix is [`build_m`].

use nalgebra::{DMatrix, DVector};

use crate::algorithms::Trajectory;
use crate::bounds::u_igogm;
use crate::error::{invalid, Error, Result};
use crate::numeric::sum;
use crate::oracles::Point;
use crate::schedules::{theta_ogm, StepsizeSchedule, ThetaTable, DEGENERACY_TOL};

/// Relative PSD tolerance against the Frobenius norm.
pub const PSD_TOL: f64 = 1e-8;
/// Absolute tolerance on Schur-complement row sums.
pub const ROW_SUM_TOL: f64 = 1e-10;
/// Absolute tolerance on the function-value cancellation.
pub const EQUALITY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub horizon: usize,
    pub lipschitz: f64,
    pub tau: f64,
    /// `v_{i,i+1}`, `i = 0..K-1`.
    pub v: Vec<f64>,
    /// `v*_i`, `i = 0..=K`.
    pub v_star: Vec<f64>,
    pub u: Vec<f64>,
}

impl DualCertificate {
    /// `tau = L / (4 A_K)`, `v_{i,i+1} = A_i / A_K`, `v*` closing the
    /// telescope, and caller-supplied `u`.
    pub fn with_u(schedule: &StepsizeSchedule, lipschitz: f64, u: Vec<f64>) -> Result<Self> {
        let horizon = schedule.horizon();
        if u.len() != horizon {
            return Err(Error::DimensionMismatch {
                expected: horizon,
                got: u.len(),
            });
        }
        if !(lipschitz > 0.0) {
            return Err(invalid(format!("L must be positive, got {lipschitz}")));
        }
        let acc = schedule.cumulative();
        let ak = schedule.final_weight();
        let v: Vec<f64> = (0..horizon).map(|i| acc[i] / ak).collect();
        let mut v_star = Vec::with_capacity(horizon + 1);
        v_star.push(v[0]);
        for i in 1..horizon {
            v_star.push(v[i] - v[i - 1]);
        }
        v_star.push(1.0 - v[horizon - 1]);
        Ok(Self {
            horizon,
            lipschitz,
            tau: lipschitz / (4.0 * ak),
            v,
            v_star,
            u,
        })
    }

    pub fn is_nonnegative(&self) -> bool {
        std::iter::once(&self.tau)
            .chain(&self.v)
            .chain(&self.v_star)
            .chain(&self.u)
            .all(|&x| x >= 0.0)
    }
}

/// The certificate with the closed-form `u` of [`u_igogm`].
pub fn build_certificate(schedule: &StepsizeSchedule, lipschitz: f64) -> Result<DualCertificate> {
    let u = u_igogm(schedule, lipschitz)?;
    DualCertificate::with_u(schedule, lipschitz, u)
}

/// Coefficient of `f_j` in `f_K + sum v_{i,i+1}(f_i - f_{i+1}) + sum v*_i (f_* - f_i)`,
/// `j = 0..=K`. All zero for a valid certificate.
pub fn check_dual_equality(cert: &DualCertificate) -> Vec<f64> {
    let kk = cert.horizon;
    (0..=kk)
        .map(|j| {
            let mut c = if j == kk { 1.0 } else { 0.0 };
            if j < kk {
                c += cert.v[j];
            }
            if j > 0 {
                c -= cert.v[j - 1];
            }
            c - cert.v_star[j]
        })
        .collect()
}

/// Basis bookkeeping for the Gram lifting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GramIndexing {
    pub horizon: usize,
}

impl GramIndexing {
    pub fn new(horizon: usize) -> Self {
        Self { horizon }
    }

    pub fn dim(&self) -> usize {
        2 * self.horizon + 2
    }

    pub fn x0(&self) -> usize {
        0
    }

    pub fn e(&self, i: usize) -> usize {
        assert!(i < self.horizon);
        1 + i
    }

    pub fn g(&self, i: usize) -> usize {
        assert!(i <= self.horizon);
        self.horizon + 1 + i
    }

    fn unit(&self, index: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v[index] = 1.0;
        v
    }

    pub fn gradient_vector(&self, i: usize) -> DVector<f64> {
        self.unit(self.g(i))
    }

    pub fn error_vector(&self, i: usize) -> DVector<f64> {
        self.unit(self.e(i))
    }

    /// `x_k - x* = x_0 - x* - (1/L) sum_{i<k} theta_{k,i} (g_i + e_i)`.
    ///
    /// `e_K` is not a basis element; `theta` never references it.
    pub fn iterate_vector(&self, theta: &ThetaTable, k: usize, lipschitz: f64) -> DVector<f64> {
        let mut v = self.unit(self.x0());
        for i in 0..k {
            let c = theta.get(k, i) / lipschitz;
            v[self.g(i)] -= c;
            v[self.e(i)] -= c;
        }
        v
    }

    /// `A^{ij} = 1/2 ((x_i - x_j) g_j' + g_j (x_i - x_j)') + (g_i - g_j)(g_i - g_j)' / (2L)`
    /// for points `i, j` given by their iterate and gradient vectors.
    pub fn interpolation_matrix(
        x_i: &DVector<f64>,
        g_i: &DVector<f64>,
        x_j: &DVector<f64>,
        g_j: &DVector<f64>,
        lipschitz: f64,
    ) -> DMatrix<f64> {
        let dx = x_i - x_j;
        let dg = g_i - g_j;
        (&dx * g_j.transpose() + g_j * dx.transpose()) * 0.5 + &dg * dg.transpose() / (2.0 * lipschitz)
    }

    /// `A^{i,i+1}` along the iterates of `theta`.
    pub fn consecutive_matrix(&self, theta: &ThetaTable, i: usize, lipschitz: f64) -> DMatrix<f64> {
        Self::interpolation_matrix(
            &self.iterate_vector(theta, i, lipschitz),
            &self.gradient_vector(i),
            &self.iterate_vector(theta, i + 1, lipschitz),
            &self.gradient_vector(i + 1),
            lipschitz,
        )
    }

    /// `A^{*,i}` with `x* = 0`, `g* = 0`.
    pub fn optimality_matrix(&self, theta: &ThetaTable, i: usize, lipschitz: f64) -> DMatrix<f64> {
        let zero = DVector::zeros(self.dim());
        Self::interpolation_matrix(
            &zero,
            &zero,
            &self.iterate_vector(theta, i, lipschitz),
            &self.gradient_vector(i),
            lipschitz,
        )
    }
}

/// The PSD side of the dual assembled term by term from the `A^{ij}`.
/// Agrees with [`build_m`] for certificates from [`DualCertificate::with_u`].
pub fn gram_form_matrix(schedule: &StepsizeSchedule, cert: &DualCertificate) -> DMatrix<f64> {
    let idx = GramIndexing::new(cert.horizon);
    let theta = theta_ogm(schedule);
    let lip = cert.lipschitz;
    let x0 = idx.unit(idx.x0());
    let gk = idx.gradient_vector(cert.horizon);
    let mut m = &x0 * x0.transpose() * cert.tau + &gk * gk.transpose() / (2.0 * lip);
    for (i, &u) in cert.u.iter().enumerate() {
        m[(idx.e(i), idx.e(i))] += u;
    }
    for (i, &v) in cert.v.iter().enumerate() {
        m += idx.consecutive_matrix(&theta, i, lip) * v;
    }
    for (i, &v) in cert.v_star.iter().enumerate() {
        m += idx.optimality_matrix(&theta, i, lip) * v;
    }
    m
}

fn check_u(schedule: &StepsizeSchedule, u: &[f64]) -> Result<usize> {
    let horizon = schedule.horizon();
    if u.len() != horizon {
        return Err(Error::DimensionMismatch {
            expected: horizon,
            got: u.len(),
        });
    }
    Ok(horizon)
}

/// Closed-form block matrix
///
/// ```text
/// [ tau  0   p ]
/// [ 0    U   B ]
/// [ p'   B'  C ]
/// ```
///
/// with `p_j = -alpha_j / (2 A_K)`, `U = diag(u)`,
/// `B[e_i, g_{i+1}] = (2 a_i a_{i+1} + A_i) / (2 L A_K)`,
/// `B[e_i, g_j] = a_i a_j / (L A_K)` for `j >= i + 2`,
/// `C[g_i, g_i] = A_i / (L A_K)`, `C[g_i, g_j] = a_i a_j / (L A_K)`.
pub fn build_m(schedule: &StepsizeSchedule, lipschitz: f64, u: &[f64]) -> Result<DMatrix<f64>> {
    let horizon = check_u(schedule, u)?;
    let idx = GramIndexing::new(horizon);
    let (a, acc) = (schedule.alpha(), schedule.cumulative());
    let ak = schedule.final_weight();
    let la = lipschitz * ak;
    let mut m = DMatrix::zeros(idx.dim(), idx.dim());
    m[(0, 0)] = lipschitz / (4.0 * ak);
    for j in 0..=horizon {
        let p = -a[j] / (2.0 * ak);
        m[(0, idx.g(j))] = p;
        m[(idx.g(j), 0)] = p;
    }
    for i in 0..horizon {
        m[(idx.e(i), idx.e(i))] = u[i];
        for j in i + 1..=horizon {
            let b = if j == i + 1 {
                (2.0 * a[i] * a[i + 1] + acc[i]) / (2.0 * la)
            } else {
                a[i] * a[j] / la
            };
            m[(idx.e(i), idx.g(j))] = b;
            m[(idx.g(j), idx.e(i))] = b;
        }
    }
    for i in 0..=horizon {
        for j in 0..=horizon {
            m[(idx.g(i), idx.g(j))] = if i == j { acc[i] / la } else { a[i] * a[j] / la };
        }
    }
    Ok(m)
}

/// `R = M - w w' / tau` with `w` the first column of `M`: first row and
/// column vanish, and the gradient block becomes `diag(0, (A_i - a_i^2) / (L A_K))`.
pub fn build_r(schedule: &StepsizeSchedule, lipschitz: f64, u: &[f64]) -> Result<DMatrix<f64>> {
    let m = build_m(schedule, lipschitz, u)?;
    let tau = m[(0, 0)];
    let w = m.column(0).into_owned();
    Ok(&m - &w * w.transpose() / tau)
}

/// `R` without the rows and columns of `x_0` and `g_0` (both identically zero).
pub fn reduced_r(schedule: &StepsizeSchedule, lipschitz: f64, u: &[f64]) -> Result<DMatrix<f64>> {
    let r = build_r(schedule, lipschitz, u)?;
    let horizon = schedule.horizon();
    let g0 = GramIndexing::new(horizon).g(0);
    Ok(r.remove_row(g0).remove_column(g0).remove_row(0).remove_column(0))
}

fn strict_gaps(schedule: &StepsizeSchedule) -> Result<Vec<f64>> {
    (0..=schedule.horizon())
        .map(|k| {
            if k == 0 {
                return Ok(f64::NAN);
            }
            let gap = schedule.gap(k);
            if gap <= DEGENERACY_TOL * schedule.cumulative()[k] {
                Err(Error::DegenerateStepsize { index: k, gap })
            } else {
                Ok(gap)
            }
        })
        .collect()
}

/// Schur complement of the diagonal gradient block in the reduced `R`,
/// from its closed form (1-based `i, j` over the error block):
///
/// `S_ii = u_{i-1} - (A_{i-1} + 2a_{i-1}a_i)^2 / (4 L A_K g_i) - sum_{k=i}^{K-1} a_{i-1}^2 a_{k+1}^2 / (L A_K g_{k+1})`,
/// `S_ij = -a_i a_{j-1} (A_{i-1} + 2a_{i-1}a_i) / (2 L A_K g_i) - sum_{k=i}^{K-1} a_{i-1} a_{j-1} a_{k+1}^2 / (L A_K g_{k+1})`
/// for `i > j`, where `g_i = A_i - a_i^2`.
pub fn build_s(schedule: &StepsizeSchedule, lipschitz: f64, u: &[f64]) -> Result<DMatrix<f64>> {
    let horizon = check_u(schedule, u)?;
    let gaps = strict_gaps(schedule)?;
    let (a, acc) = (schedule.alpha(), schedule.cumulative());
    let la = lipschitz * schedule.final_weight();
    let mut s = DMatrix::zeros(horizon, horizon);
    for i in 1..=horizon {
        let tail = sum((i..horizon).map(|k| a[k + 1] * a[k + 1] / (la * gaps[k + 1])));
        let lead = acc[i - 1] + 2.0 * a[i - 1] * a[i];
        s[(i - 1, i - 1)] = u[i - 1] - lead * lead / (4.0 * la * gaps[i]) - a[i - 1] * a[i - 1] * tail;
        for j in 1..i {
            let v = -a[i] * a[j - 1] * lead / (2.0 * la * gaps[i]) - a[i - 1] * a[j - 1] * tail;
            s[(i - 1, j - 1)] = v;
            s[(j - 1, i - 1)] = v;
        }
    }
    Ok(s)
}

/// `U - B' D^{-1} B'^T` computed numerically from [`reduced_r`].
pub fn schur_from_r(schedule: &StepsizeSchedule, lipschitz: f64, u: &[f64]) -> Result<DMatrix<f64>> {
    strict_gaps(schedule)?;
    let r = reduced_r(schedule, lipschitz, u)?;
    let kk = schedule.horizon();
    let upper = r.view((0, 0), (kk, kk)).into_owned();
    let coupling = r.view((0, kk), (kk, kk)).into_owned();
    let block = r.view((kk, kk), (kk, kk)).into_owned();
    let inv = block
        .try_inverse()
        .ok_or_else(|| invalid("gradient block of R is singular"))?;
    Ok(upper - &coupling * inv * coupling.transpose())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Cheap PSD test: Cholesky of `m + tol |m|_F I`.
pub fn psd_by_cholesky(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let shift = rel_tol * m.norm();
    let n = m.nrows();
    (m + DMatrix::identity(n, n) * shift).cholesky().is_some()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub psd_m: bool,
    pub min_eig_m: f64,
    pub frobenius_m: f64,
    pub diag_dominant_s: bool,
    /// `min_i sum_j S_ij`; `None` when `S` is undefined (degenerate schedule).
    pub min_row_sum_s: Option<f64>,
    pub max_offdiag_s: Option<f64>,
    pub equality_residual: f64,
    pub nonnegative: bool,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.psd_m && self.diag_dominant_s && self.equality_residual <= EQUALITY_TOL && self.nonnegative
    }
}

/// PSD of `M`, diagonal dominance of `S` and the equality residual for the
/// certificate carrying `u`.
pub fn verify_certificate(schedule: &StepsizeSchedule, lipschitz: f64, u: &[f64]) -> Result<CertificateReport> {
    let cert = DualCertificate::with_u(schedule, lipschitz, u.to_vec())?;
    let m = build_m(schedule, lipschitz, u)?;
    let frobenius_m = m.norm();
    let min_eig_m = min_eigenvalue(&m);
    let (min_row_sum_s, max_offdiag_s, diag_dominant_s) = match build_s(schedule, lipschitz, u) {
        Ok(s) => {
            let n = s.nrows();
            let mut min_row = f64::INFINITY;
            let mut min_margin = f64::INFINITY;
            let mut max_off = f64::NEG_INFINITY;
            for i in 0..n {
                let off: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| s[(i, j)]).collect();
                max_off = off.iter().copied().fold(max_off, f64::max);
                min_row = min_row.min(s[(i, i)] + sum(off.iter().copied()));
                min_margin = min_margin.min(s[(i, i)] - sum(off.iter().map(|v| v.abs())));
            }
            (Some(min_row), Some(max_off), min_margin >= -ROW_SUM_TOL)
        }
        Err(Error::DegenerateStepsize { .. }) => (None, None, false),
        Err(e) => return Err(e),
    };
    let equality_residual = check_dual_equality(&cert)
        .iter()
        .fold(0.0_f64, |acc, r| acc.max(r.abs()));
    Ok(CertificateReport {
        psd_m: min_eig_m >= -PSD_TOL * frobenius_m,
        min_eig_m,
        frobenius_m,
        diag_dominant_s,
        min_row_sum_s,
        max_offdiag_s,
        equality_residual,
        nonnegative: cert.is_nonnegative(),
    })
}

/// One sample `(x, grad f(x), f(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPoint {
    pub x: Point,
    pub g: Point,
    pub f: f64,
}

/// `max_{i != j} [ |g_i - g_j|^2 / (2L) - (f_i - f_j - g_j'(x_i - x_j)) ]`,
/// clipped below at zero. Genuine smooth convex data gives zero up to rounding.
pub fn interpolation_check(points: &[InterpolationPoint], lipschitz: f64) -> f64 {
    let mut worst = 0.0_f64;
    for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let lhs = p.f - q.f - q.g.dot(&(&p.x - &q.x));
            let rhs = (&p.g - &q.g).norm_squared() / (2.0 * lipschitz);
            worst = worst.max(rhs - lhs);
        }
    }
    worst
}

/// Iterates of a run with their exact gradients and values, plus the
/// optimum when known.
pub fn trajectory_points(t: &Trajectory) -> Vec<InterpolationPoint> {
    let mut pts: Vec<InterpolationPoint> =
        t.x.iter()
            .zip(&t.g_true)
            .zip(&t.values)
            .map(|((x, g), &f)| InterpolationPoint {
                x: x.clone(),
                g: g.clone(),
                f,
            })
            .collect();
    if let (Some(xs), Some(fs)) = (&t.minimizer, t.optimal_value) {
        pts.push(InterpolationPoint {
            x: xs.clone(),
            g: Point::zeros(xs.len()),
            f: fs,
        });
    }
    pts
}
