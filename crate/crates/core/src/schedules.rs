//! Stepsize and inexactness sequences.
//!
//! A [`StepsizeSchedule`] holds `alpha_0..alpha_K` and the running sums
//! `A_k = alpha_0 + ... + alpha_k`. Every algorithm, bound and certificate in
//! the crate is parameterized by one of these. The generalized methods pick
//! `alpha_{k+1}` from a ratio `lambda_{k+1} in [0, 1]` through
//! `alpha_{k+1}^2 = lambda_{k+1} * A_{k+1}`; `lambda_{k+1} < 1` keeps
//! `A_{k+1} - alpha_{k+1}^2` strictly positive, which is what makes the error
//! coefficients finite.

use std::io::Write;

use crate::error::{invalid, Result};
use crate::numeric::fmt_f64;

/// Relative slack below which `A_k - alpha_k^2` counts as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// Built from a list of `lambda` ratios.
    Lambda,
    /// `alpha_k = (k + a) / a`.
    OgmA(f64),
    /// `alpha_k = 1`.
    Constant,
    /// Raw `alpha` sequence (possibly with `alpha_0 < 1`).
    Alpha,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepsizeSchedule {
    kind: ScheduleKind,
    /// `lambda[k - 1]` is `lambda_k`; there is no lambda_0.
    lambda: Vec<f64>,
    alpha: Vec<f64>,
    /// `A_k`, the running sum of `alpha`.
    cumulative: Vec<f64>,
}

impl StepsizeSchedule {
    /// `alpha_0 = A_0 = 1`, then
    /// `alpha_{k+1} = (lambda_{k+1} + sqrt(4 lambda_{k+1} A_k + lambda_{k+1}^2)) / 2`.
    ///
    /// Only the first `horizon` ratios are used.
    pub fn from_lambda(lambda: &[f64], horizon: usize) -> Result<Self> {
        if horizon < 1 {
            return Err(invalid("horizon K must be at least 1"));
        }
        if lambda.len() < horizon {
            return Err(invalid(format!("need {horizon} lambda values, got {}", lambda.len())));
        }
        let lambda = lambda[..horizon].to_vec();
        if let Some((i, l)) = lambda.iter().enumerate().find(|(_, l)| !(0.0..=1.0).contains(*l)) {
            return Err(invalid(format!("lambda_{} = {l} is outside [0, 1]", i + 1)));
        }
        let mut alpha = Vec::with_capacity(horizon + 1);
        let mut cumulative = Vec::with_capacity(horizon + 1);
        alpha.push(1.0);
        cumulative.push(1.0);
        for &l in &lambda {
            let prev = *cumulative.last().unwrap();
            let a = (l + (4.0 * l * prev + l * l).sqrt()) / 2.0;
            alpha.push(a);
            cumulative.push(prev + a);
        }
        Ok(Self {
            kind: ScheduleKind::Lambda,
            lambda,
            alpha,
            cumulative,
        })
    }

    /// OGM-a: `alpha_k = (k + a) / a`, `A_k = (k + 2a)(k + 1) / (2a)`.
    pub fn ogm_a(a: f64, horizon: usize) -> Result<Self> {
        if !(a > 2.0) || !a.is_finite() {
            return Err(invalid(format!(
                "OGM-a needs a > 2 (got {a}); degenerate: bound coefficients unbounded"
            )));
        }
        if horizon < 1 {
            return Err(invalid("horizon K must be at least 1"));
        }
        let alpha: Vec<f64> = (0..=horizon).map(|k| (k as f64 + a) / a).collect();
        let cumulative: Vec<f64> = (0..=horizon)
            .map(|k| {
                let k = k as f64;
                (k + 2.0 * a) * (k + 1.0) / (2.0 * a)
            })
            .collect();
        Ok(Self::with_derived_lambda(ScheduleKind::OgmA(a), alpha, cumulative))
    }

    /// `alpha_k = 1`, `A_k = k + 1`.
    pub fn constant(horizon: usize) -> Result<Self> {
        if horizon < 1 {
            return Err(invalid("horizon K must be at least 1"));
        }
        let alpha = vec![1.0; horizon + 1];
        let cumulative = (0..=horizon).map(|k| (k + 1) as f64).collect();
        Ok(Self::with_derived_lambda(ScheduleKind::Constant, alpha, cumulative))
    }

    /// Raw sequence `alpha_0..alpha_K` with `0 < alpha_0 <= 1`, `A_0 = alpha_0`
    /// and `alpha_k^2 <= A_k`. This is the parameterization of the classic
    /// fast-gradient and similar-triangles methods.
    pub fn from_alpha(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(invalid("need alpha_0..alpha_K with K >= 1"));
        }
        if !(alpha[0] > 0.0 && alpha[0] <= 1.0) {
            return Err(invalid(format!("alpha_0 = {} must be in (0, 1]", alpha[0])));
        }
        let mut cumulative = Vec::with_capacity(alpha.len());
        let mut acc = 0.0;
        for (k, &a) in alpha.iter().enumerate() {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(invalid(format!("alpha_{k} = {a} must be finite and >= 0")));
            }
            acc += a;
            if a * a > acc * (1.0 + DEGENERACY_TOL) {
                return Err(invalid(format!(
                    "stepsize condition alpha_{k}^2 <= A_{k} violated ({} > {acc})",
                    a * a
                )));
            }
            cumulative.push(acc);
        }
        Ok(Self::with_derived_lambda(ScheduleKind::Alpha, alpha, cumulative))
    }

    fn with_derived_lambda(kind: ScheduleKind, alpha: Vec<f64>, cumulative: Vec<f64>) -> Self {
        let lambda = (1..alpha.len()).map(|k| alpha[k] * alpha[k] / cumulative[k]).collect();
        Self {
            kind,
            lambda,
            alpha,
            cumulative,
        }
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `A_0..A_K`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// `A_K`.
    pub fn final_weight(&self) -> f64 {
        self.cumulative[self.horizon()]
    }

    /// `lambda_k` for `1 <= k <= K`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.lambda[k - 1]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    /// `A_k - alpha_k^2`.
    pub fn gap(&self, k: usize) -> f64 {
        self.cumulative[k] - self.alpha[k] * self.alpha[k]
    }

    /// First `k >= 1` where `A_k - alpha_k^2` is zero up to [`DEGENERACY_TOL`].
    pub fn first_degenerate_index(&self) -> Option<usize> {
        (1..=self.horizon()).find(|&k| self.gap(k) <= DEGENERACY_TOL * self.cumulative[k])
    }

    /// True when `A_k > alpha_k^2` for every `k >= 1`.
    pub fn is_strict(&self) -> bool {
        self.first_degenerate_index().is_none()
    }

    /// CSV with columns `k, lambda_k, alpha_k, A_k`; `lambda_0` is left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> crate::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "lambda_k", "alpha_k", "A_k"])?;
        for k in 0..=self.horizon() {
            let lambda = if k == 0 { String::new() } else { fmt_f64(self.lambda(k)) };
            w.write_record([
                k.to_string(),
                lambda,
                fmt_f64(self.alpha[k]),
                fmt_f64(self.cumulative[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-iteration error budgets `b_0..b_{K-1}`; `b_K` reads as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InexactnessSchedule {
    levels: Vec<f64>,
}

impl InexactnessSchedule {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if let Some((k, b)) = levels.iter().enumerate().find(|(_, b)| !(**b >= 0.0) || !b.is_finite()) {
            return Err(invalid(format!("b_{k} = {b} must be finite and >= 0")));
        }
        Ok(Self { levels })
    }

    pub fn constant(horizon: usize, level: f64) -> Result<Self> {
        Self::new(vec![level; horizon])
    }

    pub fn exact(horizon: usize) -> Self {
        Self {
            levels: vec![0.0; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    /// `b_k`, zero past the end.
    pub fn level(&self, k: usize) -> f64 {
        self.levels.get(k).copied().unwrap_or(0.0)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// Dense lower-triangular table `theta_{k,i}`, `1 <= k <= K`, `0 <= i < k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    horizon: usize,
    packed: Vec<f64>,
}

impl ThetaTable {
    pub fn zeros(horizon: usize) -> Self {
        Self {
            horizon,
            packed: vec![0.0; horizon * (horizon + 1) / 2],
        }
    }

    pub fn from_fn(horizon: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(horizon);
        for k in 1..=horizon {
            for i in 0..k {
                let v = f(k, i);
                t.set(k, i, v);
            }
        }
        t
    }

    fn offset(k: usize) -> usize {
        k * (k - 1) / 2
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `theta_{k,i}`; zero on and above the diagonal.
    pub fn get(&self, k: usize, i: usize) -> f64 {
        if k == 0 || i >= k || k > self.horizon {
            0.0
        } else {
            self.packed[Self::offset(k) + i]
        }
    }

    pub fn set(&mut self, k: usize, i: usize, value: f64) {
        assert!(i < k && k <= self.horizon, "theta index ({k},{i}) out of range");
        self.packed[Self::offset(k) + i] = value;
    }

    /// `theta_{k,0..k}`.
    pub fn row(&self, k: usize) -> &[f64] {
        let start = Self::offset(k);
        &self.packed[start..start + k]
    }

    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|v| v.is_finite())
    }
}

/// Coefficients turning the optimized-gradient recursion into explicit
/// first-order form: `theta_{k,k-1} = (2 alpha_{k-1} alpha_k + A_{k-1}) / A_k`
/// and `theta_{k,i} = 2 alpha_k alpha_i / A_k + (A_{k-1}/A_k) theta_{k-1,i}`.
pub fn theta_ogm(schedule: &StepsizeSchedule) -> ThetaTable {
    let alpha = schedule.alpha();
    let acc = schedule.cumulative();
    let horizon = schedule.horizon();
    let mut t = ThetaTable::zeros(horizon);
    for k in 1..=horizon {
        t.set(k, k - 1, (2.0 * alpha[k - 1] * alpha[k] + acc[k - 1]) / acc[k]);
        for i in 0..k.saturating_sub(1) {
            let v = 2.0 * alpha[k] * alpha[i] / acc[k] + acc[k - 1] / acc[k] * t.get(k - 1, i);
            t.set(k, i, v);
        }
    }
    t
}

/// `theta_{k,i} = (alpha_i (A_k - A_i) + A_i) / A_k`, the explicit form of the
/// generalized fast gradient method.
pub fn theta_fgm(schedule: &StepsizeSchedule) -> ThetaTable {
    let alpha = schedule.alpha();
    let acc = schedule.cumulative();
    ThetaTable::from_fn(schedule.horizon(), |k, i| {
        (alpha[i] * (acc[k] - acc[i]) + acc[i]) / acc[k]
    })
}
