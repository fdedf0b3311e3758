//! Worst-case bounds `measure(x_K) <= tau R^2 + sum_k u_k |e_k|^2`.
//!
//! `u_k` is the amplification of the squared error injected at iteration `k`.
//! All inner sums run over suffixes `i > k`, so each coefficient vector is
//! built in one backward sweep with a compensated accumulator.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{fmt_f64, sum, CompensatedSum};
use crate::oracles::{Point, SmoothConvex};
use crate::schedules::{InexactnessSchedule, StepsizeSchedule, DEGENERACY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    Igogm,
    Igfgm,
}

impl BoundMethod {
    pub fn label(self) -> &'static str {
        match self {
            BoundMethod::Igogm => "igogm",
            BoundMethod::Igfgm => "igfgm",
        }
    }
}

fn check_lipschitz(lipschitz: f64) -> Result<()> {
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(crate::error::invalid(format!("L must be positive, got {lipschitz}")));
    }
    Ok(())
}

/// Strictly positive `A_k - alpha_k^2` for `k = 1..=K`, or the first index
/// where it vanishes.
fn strict_gaps(schedule: &StepsizeSchedule) -> Result<Vec<f64>> {
    let mut gaps = vec![f64::NAN];
    for k in 1..=schedule.horizon() {
        let gap = schedule.gap(k);
        if gap <= DEGENERACY_TOL * schedule.cumulative()[k] {
            return Err(Error::DegenerateStepsize { index: k, gap });
        }
        gaps.push(gap);
    }
    Ok(gaps)
}

/// Error coefficients of the generalized optimized gradient method:
///
/// `u_k = A_k (1 + 2a_{k+1})(A_k + 2a_k a_{k+1}) / (4 L A_K g_{k+1})
///      + sum_{i=k+1}^{K-1} A_i (1 + 2a_{i+1}) a_k a_{i+1} / (2 L A_K g_{i+1})`
///
/// with `g_j = A_j - a_j^2`. Fails when some `g_j` vanishes: then no finite
/// coefficient certifies the bound.
pub fn u_igogm(schedule: &StepsizeSchedule, lipschitz: f64) -> Result<Vec<f64>> {
    check_lipschitz(lipschitz)?;
    let gaps = strict_gaps(schedule)?;
    let (a, acc) = (schedule.alpha(), schedule.cumulative());
    let horizon = schedule.horizon();
    let scale = lipschitz * schedule.final_weight();
    let mut u = vec![0.0; horizon];
    // tail = sum_{i=k+1}^{K-1} A_i (1 + 2a_{i+1}) a_{i+1} / (2 L A_K g_{i+1})
    let mut tail = CompensatedSum::new();
    for k in (0..horizon).rev() {
        let head = acc[k] * (1.0 + 2.0 * a[k + 1]) * (acc[k] + 2.0 * a[k] * a[k + 1]) / (4.0 * scale * gaps[k + 1]);
        u[k] = head + a[k] * tail.value();
        tail.add(acc[k] * (1.0 + 2.0 * a[k + 1]) * a[k + 1] / (2.0 * scale * gaps[k + 1]));
    }
    Ok(u)
}

/// Error coefficients of the generalized fast gradient method:
///
/// `u_k = A_k^2 (1 + a_{k+1}) / (2 L A_K (2A_{k+1} - a_{k+1}^2))
///      + sum_{i=k+1}^{K} a_k A_{i-1} a_i (1 + a_i) / (2 L A_K (2A_i - a_i^2))`.
///
/// Finite whenever `alpha_k^2 <= A_k`, including `lambda = 1`.
pub fn u_igfgm(schedule: &StepsizeSchedule, lipschitz: f64) -> Result<Vec<f64>> {
    check_lipschitz(lipschitz)?;
    let (a, acc) = (schedule.alpha(), schedule.cumulative());
    let horizon = schedule.horizon();
    let scale = lipschitz * schedule.final_weight();
    let wide_gap = |j: usize| 2.0 * acc[j] - a[j] * a[j];
    if let Some(j) = (1..=horizon).find(|&j| !(wide_gap(j) > 0.0)) {
        return Err(Error::DegenerateStepsize {
            index: j,
            gap: wide_gap(j),
        });
    }
    let mut u = vec![0.0; horizon];
    // tail = sum_{i=k+1}^{K} A_{i-1} a_i (1 + a_i) / (2 L A_K (2A_i - a_i^2))
    let mut tail = CompensatedSum::new();
    for k in (0..horizon).rev() {
        tail.add(acc[k] * a[k + 1] * (1.0 + a[k + 1]) / (2.0 * scale * wide_gap(k + 1)));
        let head = acc[k] * acc[k] * (1.0 + a[k + 1]) / (2.0 * scale * wide_gap(k + 1));
        u[k] = head + a[k] * tail.value();
    }
    Ok(u)
}

/// Enlarged closed-form coefficients for OGM-4 (`alpha_k = (k + 4) / 4`).
pub fn u_ogm4_simplified(horizon: usize, lipschitz: f64) -> Vec<f64> {
    let kk = horizon as f64;
    let denom = lipschitz * (kk + 8.0) * (kk + 1.0);
    (0..horizon)
        .map(|k| {
            let k = k as f64;
            (k + 7.0).powi(2) * (k + 2.0) / (2.0 * denom)
                + (k + 4.0)
                    * (kk - k - 1.0)
                    * (2.0 * kk * kk + 2.0 * kk * k + 35.0 * kk + 2.0 * k * k + 37.0 * k + 210.0)
                    / (24.0 * denom)
        })
        .collect()
}

/// `sum_k u_k` of [`u_ogm4_simplified`] in closed form,
/// `K (12K^3 + 303K^2 + 2687K + 8758) / (480 L (K + 8))`.
pub fn ogm4_simplified_total(horizon: usize, lipschitz: f64) -> f64 {
    let k = horizon as f64;
    k * (((12.0 * k + 303.0) * k + 2687.0) * k + 8758.0) / (480.0 * lipschitz * (k + 8.0))
}

/// `u_k = 3 (2K - k + 1) / (4 L (K + 1))` for `alpha_k = 1`.
pub fn u_constant_step(horizon: usize, lipschitz: f64) -> Vec<f64> {
    let kk = horizon as f64;
    (0..horizon)
        .map(|k| 3.0 * (2.0 * kk - k as f64 + 1.0) / (4.0 * lipschitz * (kk + 1.0)))
        .collect()
}

/// Pairwise coefficients `P_{k,i}` (`0 <= i <= k < K`) of the error cross
/// terms in the optimized-gradient analysis, without the `1/A_K` factor:
///
/// `P_{k,k} = (2a_{k+1}a_k + A_k)^2 / (4L g_{k+1}) + sum_{j>k} a_k^2 a_{j+1}^2 / (L g_{j+1})`,
/// `P_{k,i} = a_{k+1} a_i (A_k + 2a_{k+1}a_k) / (L g_{k+1}) + sum_{j>k} 2 a_{j+1}^2 a_k a_i / (L g_{j+1})`.
///
/// `A_K u_k = P_{k,k} + 1/2 sum_{i<k} P_{k,i} + 1/2 sum_{i>k} P_{i,k}`; this
/// gives an independent route to [`u_igogm`].
pub fn pair_coefficients(schedule: &StepsizeSchedule, lipschitz: f64) -> Result<DMatrix<f64>> {
    check_lipschitz(lipschitz)?;
    let gaps = strict_gaps(schedule)?;
    let (a, acc) = (schedule.alpha(), schedule.cumulative());
    let horizon = schedule.horizon();
    let mut p = DMatrix::zeros(horizon, horizon);
    for k in 0..horizon {
        let tail = sum((k + 1..horizon).map(|j| a[j + 1] * a[j + 1] / (lipschitz * gaps[j + 1])));
        let lead = acc[k] + 2.0 * a[k + 1] * a[k];
        p[(k, k)] = lead * lead / (4.0 * lipschitz * gaps[k + 1]) + a[k] * a[k] * tail;
        for i in 0..k {
            p[(k, i)] = a[k + 1] * a[i] * lead / (lipschitz * gaps[k + 1]) + 2.0 * a[k] * a[i] * tail;
        }
    }
    Ok(p)
}

/// Breakdown of the bound for given error levels.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub method: BoundMethod,
    pub tau: f64,
    pub u: Vec<f64>,
    pub levels: Vec<f64>,
    pub alpha: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub rate_term: f64,
    pub error_term: f64,
    pub total: f64,
}

impl BoundReport {
    /// `tau R^2 + sum_k u_k |e_k|^2` for realized error norms.
    pub fn realized_total(&self, radius: f64, error_norms: &[f64]) -> f64 {
        let err = sum(self.u.iter().zip(error_norms).map(|(u, e)| u * e * e));
        self.tau * radius * radius + err
    }

    /// Columns `k, alpha_k, A_k, u_k, b_k, contribution`, then one
    /// `name,value` row each for `tau`, `rate_term`, `error_term`, `total`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["k", "alpha_k", "A_k", "u_k", "b_k", "contribution"])?;
        for (k, (&u, &b)) in self.u.iter().zip(&self.levels).enumerate() {
            w.write_record([
                k.to_string(),
                fmt_f64(self.alpha[k]),
                fmt_f64(self.cumulative[k]),
                fmt_f64(u),
                fmt_f64(b),
                fmt_f64(u * b * b),
            ])?;
        }
        for (name, v) in [
            ("tau", self.tau),
            ("rate_term", self.rate_term),
            ("error_term", self.error_term),
            ("total", self.total),
        ] {
            w.write_record([name.to_string(), fmt_f64(v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `tau = L / (4 A_K)` for the optimized method and `L / (2 A_K)` for the fast one.
pub fn rate_coefficient(method: BoundMethod, schedule: &StepsizeSchedule, lipschitz: f64) -> f64 {
    let factor = match method {
        BoundMethod::Igogm => 4.0,
        BoundMethod::Igfgm => 2.0,
    };
    lipschitz / (factor * schedule.final_weight())
}

pub fn bound_evaluate(
    method: BoundMethod,
    schedule: &StepsizeSchedule,
    inexactness: &InexactnessSchedule,
    lipschitz: f64,
    radius: f64,
) -> Result<BoundReport> {
    let horizon = schedule.horizon();
    if inexactness.horizon() != horizon {
        return Err(Error::DimensionMismatch {
            expected: horizon,
            got: inexactness.horizon(),
        });
    }
    if !(radius >= 0.0) {
        return Err(crate::error::invalid(format!("R must be >= 0, got {radius}")));
    }
    let u = match method {
        BoundMethod::Igogm => u_igogm(schedule, lipschitz)?,
        BoundMethod::Igfgm => u_igfgm(schedule, lipschitz)?,
    };
    let tau = rate_coefficient(method, schedule, lipschitz);
    let levels = inexactness.levels().to_vec();
    let rate_term = tau * radius * radius;
    let error_term = sum(u.iter().zip(&levels).map(|(u, b)| u * b * b));
    Ok(BoundReport {
        method,
        tau,
        u,
        levels,
        alpha: schedule.alpha().to_vec(),
        cumulative: schedule.cumulative().to_vec(),
        rate_term,
        error_term,
        total: rate_term + error_term,
    })
}

/// `f(x) - f* - |grad f(x)|^2 / (2L)`.
pub fn measure(problem: &dyn SmoothConvex, x: &Point) -> Result<f64> {
    let fs = problem.optimal_value().ok_or(Error::UnknownOptimum)?;
    Ok(problem.value(x) - fs - problem.gradient(x).norm_squared() / (2.0 * problem.lipschitz()))
}
