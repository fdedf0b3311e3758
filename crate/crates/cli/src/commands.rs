use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use inexact_pep::algorithms::{
    run_gradient_descent, run_ifgm, run_igfgm, run_igogm, run_istm, run_ogm, FeasibleSet, Method, Trajectory,
};
use inexact_pep::bounds::{bound_evaluate, rate_coefficient, u_igfgm, u_igogm, BoundMethod, BoundReport};
use inexact_pep::certificate::verify_certificate;
use inexact_pep::numeric::{fmt_f64, sum};
use inexact_pep::oracles::{random_unit_vector, InexactGradientOracle, LipschitzOverride, SharedProblem};
use inexact_pep::scheduler::{effort_budget, optimal_b, EffortModel, ScheduleComparison};
use inexact_pep::schedules::{InexactnessSchedule, StepsizeSchedule};
use inexact_pep::sdpa::{export_sdp, SdpTarget, SdpaProblem};
use inexact_pep::verify::{random_lambda_schedule, run_check, CHECKS};
use inexact_pep::Error;
use rayon::prelude::*;

use crate::config::{config_error, ExperimentConfig, LevelSpec, ScheduleSpec};
use crate::output::write_atomic;

/// Whether every bound or certificate checked by a command held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Violation,
}

impl Outcome {
    fn from_pass(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Violation
        }
    }
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().flexible(true).from_writer(w)
}

fn bound_method(method: Method) -> Option<BoundMethod> {
    match method {
        Method::Igogm | Method::Ogm => Some(BoundMethod::Igogm),
        Method::Igfgm | Method::Ifgm | Method::Istm => Some(BoundMethod::Igfgm),
        Method::Igfo | Method::GradientDescent => None,
    }
}

fn coefficients(method: BoundMethod, schedule: &StepsizeSchedule, lip: f64) -> inexact_pep::Result<Vec<f64>> {
    match method {
        BoundMethod::Igogm => u_igogm(schedule, lip),
        BoundMethod::Igfgm => u_igfgm(schedule, lip),
    }
}

fn run_schedule(config: &ExperimentConfig) -> anyhow::Result<StepsizeSchedule> {
    let k = config.horizon;
    let schedule = match config.method {
        Method::Ogm => StepsizeSchedule::from_lambda(&vec![1.0; k], k)?,
        Method::GradientDescent => StepsizeSchedule::constant(k)?,
        _ => config.schedule.build(k)?,
    };
    Ok(schedule)
}

fn run_levels(config: &ExperimentConfig, schedule: &StepsizeSchedule, lip: f64) -> anyhow::Result<InexactnessSchedule> {
    let k = config.horizon;
    Ok(match &config.oracle.levels {
        LevelSpec::Exact => InexactnessSchedule::exact(k),
        LevelSpec::Constant { level } => InexactnessSchedule::constant(k, *level)?,
        LevelSpec::List { levels } => InexactnessSchedule::new(levels.clone())?,
        LevelSpec::Optimal { model, radius } => {
            let method = bound_method(config.method)
                .ok_or_else(|| config_error("oracle.levels: optimal levels need a method with a bound"))?;
            let u = coefficients(method, schedule, lip)?;
            let budget = effort_budget(lip, *radius, schedule.final_weight());
            InexactnessSchedule::new(optimal_b(&u, budget, model)?.b)?
        }
    })
}

pub struct RunSummary {
    pub outcome: Outcome,
    pub line: String,
}

pub fn cmd_run(config: &ExperimentConfig, out: &Path) -> anyhow::Result<RunSummary> {
    let mut problem: SharedProblem = config.problem.build()?;
    if let Some(l) = config.lipschitz {
        problem = Arc::new(LipschitzOverride::new(problem, l).map_err(|e| config_error(format!("lipschitz: {e}")))?);
    }
    let lip = problem.lipschitz();
    let center = problem
        .minimizer()
        .ok_or_else(|| anyhow!("problem has no known minimizer"))?
        .clone();
    let x0 = &center + random_unit_vector(problem.dimension(), config.seed) * config.initial_distance;
    let radius = (&x0 - &center).norm();
    let schedule = run_schedule(config)?;
    let levels = run_levels(config, &schedule, lip)?;
    let mut oracle = InexactGradientOracle::new(problem.clone(), config.oracle.policy, levels.clone(), config.seed);
    let mut warnings = Vec::new();
    let trajectory: Trajectory = match config.method {
        Method::Igogm => run_igogm(&mut oracle, &schedule, &x0)?,
        Method::Igfgm => run_igfgm(&mut oracle, &schedule, &x0)?,
        Method::Ifgm => run_ifgm(&mut oracle, &schedule, &x0, &FeasibleSet::WholeSpace)?,
        Method::Istm => run_istm(&mut oracle, &schedule, &x0, &FeasibleSet::WholeSpace)?,
        Method::Ogm => {
            if levels.levels().iter().any(|b| *b > 0.0) {
                warnings.push("ogm uses exact gradients; oracle levels ignored".to_string());
            }
            run_ogm(problem.clone(), &x0, config.horizon, false)?
        }
        Method::GradientDescent => run_gradient_descent(&mut oracle, config.horizon, &x0)?,
        Method::Igfo => bail!("igfo has no configuration form"),
    };
    let measured = trajectory.final_measure()?;
    let mut report: Option<BoundReport> = None;
    let mut bound = None;
    if let Some(method) = bound_method(config.method) {
        match bound_evaluate(method, &schedule, &levels, lip, radius) {
            Ok(r) => {
                bound = Some(r.realized_total(radius, &trajectory.error_norms()));
                report = Some(r);
            }
            Err(e @ Error::DegenerateStepsize { .. }) => {
                if trajectory.error_norms().iter().all(|e| *e == 0.0) {
                    bound = Some(rate_coefficient(method, &schedule, lip) * radius * radius);
                } else {
                    warnings.push(format!("no finite bound: {e}"));
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_atomic(out, "trajectory.csv", |w| Ok(trajectory.write_csv(w)?))?;
    if let Some(r) = &report {
        write_atomic(out, "bound.csv", |w| Ok(r.write_csv(w)?))?;
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let head = format!("{} K={} on {}", config.method.label(), config.horizon, problem.name());
    let (outcome, line) = match bound {
        Some(b) => {
            let gap0 = problem.value(&x0) - problem.optimal_value().unwrap_or(0.0);
            let scale = 1.0_f64.max(b.abs()).max(gap0.abs());
            let ok = measured <= b + 1e-9 * scale;
            (
                Outcome::from_pass(ok),
                format!(
                    "{} {head}: measure={} bound={} margin={}",
                    status(ok),
                    fmt_f64(measured),
                    fmt_f64(b),
                    fmt_f64(b - measured)
                ),
            )
        }
        None => (
            Outcome::Pass,
            format!("N/A {head}: measure={} (no bound)", fmt_f64(measured)),
        ),
    };
    write_atomic(out, "summary.txt", |w| {
        writeln!(w, "{line}")?;
        for warning in &warnings {
            writeln!(w, "warning: {warning}")?;
        }
        Ok(())
    })?;
    Ok(RunSummary { outcome, line })
}

struct TradeoffRow {
    a: f64,
    horizon: usize,
    tau: f64,
    u: Vec<f64>,
}

pub fn cmd_tradeoff(
    shapes: &[f64],
    horizons: &[usize],
    lip: f64,
    radius: f64,
    level: f64,
    out: &Path,
) -> anyhow::Result<Outcome> {
    if let Some(a) = shapes.iter().find(|a| !(**a > 2.0)) {
        return Err(config_error(format!("--a: every value must exceed 2, got {a}")));
    }
    let grid: Vec<(f64, usize)> = shapes
        .iter()
        .flat_map(|&a| horizons.iter().map(move |&k| (a, k)))
        .collect();
    let rows: Vec<TradeoffRow> = grid
        .par_iter()
        .map(|&(a, horizon)| -> anyhow::Result<TradeoffRow> {
            let s = StepsizeSchedule::ogm_a(a, horizon)?;
            Ok(TradeoffRow {
                a,
                horizon,
                tau: rate_coefficient(BoundMethod::Igogm, &s, lip),
                u: u_igogm(&s, lip)?,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    write_atomic(out, "tradeoff.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["a", "K", "tau", "sum_u", "total"])?;
        for r in &rows {
            let sum_u = sum(r.u.iter().copied());
            let total = r.tau * radius * radius + sum_u * level * level;
            c.write_record([
                fmt_f64(r.a),
                r.horizon.to_string(),
                fmt_f64(r.tau),
                fmt_f64(sum_u),
                fmt_f64(total),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    write_atomic(out, "tradeoff_u.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["a", "K", "k", "u_k"])?;
        for r in &rows {
            for (k, u) in r.u.iter().enumerate() {
                c.write_record([fmt_f64(r.a), r.horizon.to_string(), k.to_string(), fmt_f64(*u)])?;
            }
        }
        c.flush()?;
        Ok(())
    })?;
    println!("wrote {} grid points", rows.len());
    Ok(Outcome::Pass)
}

struct CertifyRow {
    label: String,
    horizon: usize,
    line: String,
    fields: Vec<String>,
    passed: bool,
}

fn certify_one(label: String, schedule: &StepsizeSchedule, lip: f64) -> anyhow::Result<CertifyRow> {
    let horizon = schedule.horizon();
    match u_igogm(schedule, lip) {
        Ok(u) => {
            let r = verify_certificate(schedule, lip, &u)?;
            let passed = r.passed();
            let row_sum = r.min_row_sum_s.map(fmt_f64).unwrap_or_default();
            Ok(CertifyRow {
                line: format!(
                    "{} {label} K={horizon}: min eig(M)={:.3e} (|M|_F={:.3e}), min row sum(S)={row_sum}, equality residual={:.1e}",
                    status(passed),
                    r.min_eig_m,
                    r.frobenius_m,
                    r.equality_residual
                ),
                fields: vec![
                    r.psd_m.to_string(),
                    fmt_f64(r.min_eig_m),
                    fmt_f64(r.frobenius_m),
                    r.diag_dominant_s.to_string(),
                    row_sum,
                    fmt_f64(r.equality_residual),
                    String::new(),
                ],
                label,
                horizon,
                passed,
            })
        }
        Err(e @ Error::DegenerateStepsize { .. }) => Ok(CertifyRow {
            line: format!("FAIL {label} K={horizon}: {e}"),
            fields: vec![String::new(); 6].into_iter().chain([e.to_string()]).collect(),
            label,
            horizon,
            passed: false,
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_certify(
    spec: &ScheduleSpec,
    horizon: usize,
    lip: f64,
    random: usize,
    seed: u64,
    out: &Path,
) -> anyhow::Result<Outcome> {
    let mut cases: Vec<(String, StepsizeSchedule)> = Vec::new();
    if random == 0 {
        let s = spec
            .build(horizon)
            .map_err(|e| config_error(format!("--schedule: {e}")))?;
        cases.push((spec.label(), s));
    } else {
        for i in 0..random as u64 {
            let s = random_lambda_schedule(horizon, 0.1, 0.9, seed + i)?;
            cases.push((format!("random-seed-{}", seed + i), s));
        }
    }
    let rows: Vec<CertifyRow> = cases
        .into_par_iter()
        .map(|(label, s)| certify_one(label, &s, lip))
        .collect::<anyhow::Result<_>>()?;
    write_atomic(out, "certificate.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record([
            "schedule",
            "K",
            "psd_m",
            "min_eig_m",
            "frobenius_m",
            "diag_dominant_s",
            "min_row_sum_s",
            "equality_residual",
            "note",
            "passed",
        ])?;
        for r in &rows {
            let mut rec = vec![r.label.clone(), r.horizon.to_string()];
            rec.extend(r.fields.iter().cloned());
            rec.push(r.passed.to_string());
            c.write_record(&rec)?;
        }
        c.flush()?;
        Ok(())
    })?;
    for r in &rows {
        println!("{}", r.line);
    }
    let passed = rows.iter().filter(|r| r.passed).count();
    if rows.len() > 1 {
        println!("{passed}/{} certificates verified", rows.len());
    }
    Ok(Outcome::from_pass(passed == rows.len()))
}

pub fn cmd_schedule(
    model: EffortModel,
    spec: &ScheduleSpec,
    horizons: &[usize],
    lip: f64,
    radius: f64,
    out: &Path,
) -> anyhow::Result<Outcome> {
    model
        .validate()
        .map_err(|e| config_error(format!("effort model: {e}")))?;
    let results: Vec<(usize, ScheduleComparison)> = horizons
        .par_iter()
        .map(|&k| -> anyhow::Result<_> {
            let s = spec.build(k).map_err(|e| config_error(format!("--schedule: {e}")))?;
            let u = u_igogm(&s, lip)?;
            let budget = effort_budget(lip, radius, s.final_weight());
            Ok((k, ScheduleComparison::new(&u, budget, model)?))
        })
        .collect::<anyhow::Result<_>>()?;
    for (k, cmp) in &results {
        write_atomic(out, &format!("schedule_k{k}.csv"), |w| Ok(cmp.write_csv(w)?))?;
        println!(
            "K={k} {}: eta_total constant={} optimal={} improvement_ratio={}",
            model.label(),
            fmt_f64(cmp.constant.eta_total),
            fmt_f64(cmp.optimal.eta_total),
            fmt_f64(cmp.improvement_ratio())
        );
    }
    write_atomic(out, "eta_totals.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["K", "model", "eta_total_const", "eta_total_opt", "improvement_ratio"])?;
        for (k, cmp) in &results {
            c.write_record([
                k.to_string(),
                model.label().to_string(),
                fmt_f64(cmp.constant.eta_total),
                fmt_f64(cmp.optimal.eta_total),
                fmt_f64(cmp.improvement_ratio()),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    Ok(Outcome::Pass)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_export_sdp(
    target: SdpTarget,
    spec: &ScheduleSpec,
    horizon: usize,
    lip: f64,
    radius: f64,
    levels: &[f64],
    out: &Path,
) -> anyhow::Result<Outcome> {
    let schedule = spec
        .build(horizon)
        .map_err(|e| config_error(format!("--schedule: {e}")))?;
    let levels = match levels {
        [b] => InexactnessSchedule::constant(horizon, *b),
        list => InexactnessSchedule::new(list.to_vec()),
    }
    .map_err(|e| config_error(format!("--b: {e}")))?;
    let sdp = export_sdp(&schedule, lip, radius, &levels, target).map_err(|e| config_error(e.to_string()))?;
    let name = format!("pep_{}_k{horizon}.dat-s", target.label());
    let path = write_atomic(out, &name, |w| Ok(sdp.write(w)?))?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot reread {}", path.display()))?;
    let back = SdpaProblem::parse(&text)?;
    if back.to_text() != text {
        bail!("{} does not round-trip", path.display());
    }
    println!(
        "wrote {} ({} constraints, blocks {:?})",
        path.display(),
        sdp.constraint_count(),
        sdp.block_sizes
    );
    Ok(Outcome::Pass)
}

pub fn cmd_verify_all(out: &Path) -> anyhow::Result<Outcome> {
    let results: Vec<_> = CHECKS
        .par_iter()
        .map(|(id, _)| run_check(*id))
        .collect::<inexact_pep::Result<_>>()?;
    for r in &results {
        println!("{r}");
    }
    write_atomic(out, "verify.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["id", "name", "status", "detail"])?;
        for r in &results {
            c.write_record([
                r.id.to_string(),
                r.name.to_string(),
                status(r.passed).to_string(),
                r.detail.clone(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    Ok(Outcome::from_pass(passed == results.len()))
}
