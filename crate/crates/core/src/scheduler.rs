//! Per-iteration accuracy allocation.
//!
//! With effort `eta_k` buying accuracy `b_k = h(eta_k)`, minimize
//! `sum h^{-1}(b_k)` subject to `sum u_k b_k^2 <= L R^2 / (4 A_K)`. Stationarity
//! reads `d/db h^{-1}(b_k) + 2 lambda b_k u_k = 0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{fmt_f64, rel_err, sum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EffortModel {
    /// `h(eta) = c1 eta^{-c2}`.
    PowerLaw { c1: f64, c2: f64 },
    /// `h(eta) = q1 q2^{-eta}`.
    Exponential { q1: f64, q2: f64 },
}

impl EffortModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EffortModel::PowerLaw { c1, c2 } => {
                if !(c1 > 0.0 && c1.is_finite() && c2 > 0.0 && c2.is_finite()) {
                    return Err(invalid(format!("power-law model needs c1, c2 > 0, got {c1}, {c2}")));
                }
            }
            EffortModel::Exponential { q1, q2 } => {
                if !(q1 > 0.0 && q1.is_finite() && q2 > 1.0 && q2.is_finite()) {
                    return Err(invalid(format!(
                        "exponential model needs q1 > 0 and q2 > 1, got {q1}, {q2}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        match self {
            EffortModel::PowerLaw { .. } => "power-law",
            EffortModel::Exponential { .. } => "exponential",
        }
    }

    pub fn h(&self, eta: f64) -> f64 {
        match *self {
            EffortModel::PowerLaw { c1, c2 } => c1 * eta.powf(-c2),
            EffortModel::Exponential { q1, q2 } => q1 * q2.powf(-eta),
        }
    }

    pub fn h_inv(&self, b: f64) -> f64 {
        match *self {
            EffortModel::PowerLaw { c1, c2 } => (c1 / b).powf(1.0 / c2),
            EffortModel::Exponential { q1, q2 } => (q1 / b).ln() / q2.ln(),
        }
    }

    /// Derivative of `h^{-1}` at `b`.
    pub fn h_inv_slope(&self, b: f64) -> f64 {
        match *self {
            EffortModel::PowerLaw { c1, c2 } => -(c1.powf(1.0 / c2) / c2) * b.powf(-1.0 / c2 - 1.0),
            EffortModel::Exponential { q2, .. } => -1.0 / (b * q2.ln()),
        }
    }

    /// Largest accuracy level with nonnegative effort.
    pub fn max_level(&self) -> f64 {
        match *self {
            EffortModel::PowerLaw { .. } => f64::INFINITY,
            EffortModel::Exponential { q1, .. } => q1,
        }
    }
}

/// `L R^2 / (4 A_K)`.
pub fn effort_budget(lipschitz: f64, radius: f64, final_weight: f64) -> f64 {
    lipschitz * radius * radius / (4.0 * final_weight)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleSolution {
    pub b: Vec<f64>,
    /// Multiplier of the budget constraint; `None` for the constant baseline.
    pub lambda_dual: Option<f64>,
    pub eta: Vec<f64>,
    pub eta_total: f64,
    pub budget: f64,
    /// Levels held at the model's `max_level` (zero effort).
    pub clamped: Vec<bool>,
}

impl ScheduleSolution {
    fn assemble(
        b: Vec<f64>,
        lambda_dual: Option<f64>,
        budget: f64,
        clamped: Vec<bool>,
        model: &EffortModel,
    ) -> Result<Self> {
        let eta = b
            .iter()
            .zip(&clamped)
            .map(|(&bk, &c)| if c { Ok(0.0) } else { effort(model, bk) })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            eta_total: sum(eta.iter().copied()),
            b,
            lambda_dual,
            eta,
            budget,
            clamped,
        })
    }

    /// `sum u_k b_k^2`.
    pub fn spent(&self, u: &[f64]) -> f64 {
        sum(u.iter().zip(&self.b).map(|(u, b)| u * b * b))
    }

    /// Largest `|d/db h^{-1}(b_k) + 2 lambda b_k u_k| / lambda` over unclamped `k`.
    pub fn stationarity_residual(&self, u: &[f64], model: &EffortModel) -> f64 {
        let lambda = self.lambda_dual.unwrap_or(0.0);
        let scale = if lambda > 0.0 { lambda } else { 1.0 };
        self.b
            .iter()
            .zip(u)
            .zip(&self.clamped)
            .filter(|(_, &c)| !c)
            .map(|((&b, &u), _)| (model.h_inv_slope(b) + 2.0 * lambda * b * u).abs() / scale)
            .fold(0.0, f64::max)
    }
}

fn effort(model: &EffortModel, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::OutOfRange(format!("accuracy level {b} must be positive")));
    }
    let eta = model.h_inv(b);
    if eta < 0.0 {
        return Err(Error::OutOfRange(format!(
            "accuracy level {b} exceeds {}: effort would be negative",
            model.max_level()
        )));
    }
    Ok(eta)
}

fn check_inputs(u: &[f64], budget: f64, model: &EffortModel) -> Result<()> {
    model.validate()?;
    if u.is_empty() {
        return Err(invalid("need at least one coefficient u_k"));
    }
    if let Some((k, v)) = u.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(invalid(format!("u_{k} = {v} must be positive and finite")));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(invalid(format!("budget {budget} must be positive")));
    }
    Ok(())
}

/// `sum h^{-1}(b_k)`.
pub fn eta_complexity(b: &[f64], model: &EffortModel) -> Result<f64> {
    model.validate()?;
    let mut total = crate::numeric::CompensatedSum::new();
    for &bk in b {
        total.add(effort(model, bk)?);
    }
    Ok(total.value())
}

/// `b_k = sqrt(B / (K u_k))`, `lambda = K / (2 B ln q2)`; levels above `q1`
/// are pinned there and the rest of the budget is shared among the others.
pub fn optimal_b_exponential(u: &[f64], budget: f64, model: &EffortModel) -> Result<ScheduleSolution> {
    check_inputs(u, budget, model)?;
    let EffortModel::Exponential { q1, q2 } = *model else {
        return Err(invalid("optimal_b_exponential needs an exponential model"));
    };
    let ln_q2 = q2.ln();
    let mut clamped = vec![false; u.len()];
    if sum(u.iter().map(|u| u * q1 * q1)) <= budget {
        return ScheduleSolution::assemble(vec![q1; u.len()], Some(0.0), budget, vec![true; u.len()], model);
    }
    // active set: each pass can only pin more levels, so this ends in <= K passes
    loop {
        let free = clamped.iter().filter(|c| !**c).count() as f64;
        let pinned = sum(u.iter().zip(&clamped).filter(|(_, c)| **c).map(|(u, _)| u * q1 * q1));
        let lambda = free / (2.0 * ln_q2 * (budget - pinned));
        let b: Vec<f64> = u
            .iter()
            .zip(&clamped)
            .map(|(&uk, &c)| {
                if c {
                    q1
                } else {
                    (2.0 * lambda * uk * ln_q2).recip().sqrt()
                }
            })
            .collect();
        let mut changed = false;
        for (k, &bk) in b.iter().enumerate() {
            if !clamped[k] && bk > q1 {
                clamped[k] = true;
                changed = true;
            }
        }
        if !changed {
            return ScheduleSolution::assemble(b, Some(lambda), budget, clamped, model);
        }
    }
}

/// Interior solution of the power-law model with the budget binding.
pub fn optimal_b_powerlaw(u: &[f64], budget: f64, model: &EffortModel) -> Result<ScheduleSolution> {
    check_inputs(u, budget, model)?;
    let EffortModel::PowerLaw { c1, c2 } = *model else {
        return Err(invalid("optimal_b_powerlaw needs a power-law model"));
    };
    let growth = (1.0 + 2.0 * c2) / (2.0 * c2);
    let s = sum(u.iter().map(|u| u.powf(1.0 / (1.0 + 2.0 * c2))));
    let c1_root = c1.powf(1.0 / c2);
    let lambda = c1_root / (2.0 * c2) * budget.powf(-growth) * s.powf(growth);
    let b: Vec<f64> = u
        .iter()
        .map(|&uk| (2.0 * lambda * uk * c2 / c1_root).powf(-c2 / (1.0 + 2.0 * c2)))
        .collect();
    let solution = ScheduleSolution::assemble(b, Some(lambda), budget, vec![false; u.len()], model)?;
    let binding = rel_err(solution.spent(u), budget);
    let stationarity = solution.stationarity_residual(u, model);
    if binding > 1e-8 || stationarity > 1e-8 {
        return Err(Error::OutOfRange(format!(
            "power-law optimality residuals too large: budget {binding:e}, stationarity {stationarity:e}"
        )));
    }
    Ok(solution)
}

pub fn optimal_b(u: &[f64], budget: f64, model: &EffortModel) -> Result<ScheduleSolution> {
    match model {
        EffortModel::PowerLaw { .. } => optimal_b_powerlaw(u, budget, model),
        EffortModel::Exponential { .. } => optimal_b_exponential(u, budget, model),
    }
}

/// Single level `b = sqrt(B / sum u_k)`, capped at the model's `max_level`.
pub fn constant_b_baseline(u: &[f64], budget: f64, model: &EffortModel) -> Result<ScheduleSolution> {
    check_inputs(u, budget, model)?;
    let level = (budget / sum(u.iter().copied())).sqrt();
    let cap = model.max_level();
    let (level, pinned) = if level > cap { (cap, true) } else { (level, false) };
    ScheduleSolution::assemble(vec![level; u.len()], None, budget, vec![pinned; u.len()], model)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleComparison {
    pub model: EffortModel,
    pub u: Vec<f64>,
    pub constant: ScheduleSolution,
    pub optimal: ScheduleSolution,
}

impl ScheduleComparison {
    pub fn new(u: &[f64], budget: f64, model: EffortModel) -> Result<Self> {
        Ok(Self {
            constant: constant_b_baseline(u, budget, &model)?,
            optimal: optimal_b(u, budget, &model)?,
            u: u.to_vec(),
            model,
        })
    }

    /// Constant-level effort over optimal effort.
    pub fn improvement_ratio(&self) -> f64 {
        self.constant.eta_total / self.optimal.eta_total
    }

    /// Columns `k,u_k,b_const,b_opt,eta_const,eta_opt`, then `name,value`
    /// footer rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["k", "u_k", "b_const", "b_opt", "eta_const", "eta_opt"])?;
        for k in 0..self.u.len() {
            w.write_record([
                k.to_string(),
                fmt_f64(self.u[k]),
                fmt_f64(self.constant.b[k]),
                fmt_f64(self.optimal.b[k]),
                fmt_f64(self.constant.eta[k]),
                fmt_f64(self.optimal.eta[k]),
            ])?;
        }
        for (name, v) in [
            ("eta_total_const", self.constant.eta_total),
            ("eta_total_opt", self.optimal.eta_total),
            ("improvement_ratio", self.improvement_ratio()),
        ] {
            w.write_record([name.to_string(), fmt_f64(v)])?;
        }
        w.flush()?;
        Ok(())
    }
}
