//! `inexact-pep`: experiments, bounds, certificates, schedules and SDP export.
//!
//! Exit status: 0 when every checked bound or certificate holds, 1 on a
//! violation, 2 on configuration or I/O errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use inexact_pep::algorithms::Method;
use inexact_pep::oracles::ErrorPolicy;
use inexact_pep::scheduler::EffortModel;
use inexact_pep::sdpa::SdpTarget;

use commands::Outcome;
use config::{ConfigError, ExperimentConfig, ScheduleSpec};

#[derive(Parser)]
#[command(
    name = "inexact-pep",
    version,
    about = "Inexact accelerated gradient methods: runs, bounds and certificates"
)]
struct Cli {
    /// Output directory [default: the config's `output`, else ./out]
    #[arg(long, global = true, env = "INEXACT_PEP_OUT")]
    out: Option<PathBuf>,

    /// Worker threads for independent grid points
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method from a TOML config and compare against its bound
    Run {
        config: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<ErrorPolicy>,
    },
    /// Rate and accumulated-error data over OGM-a shapes and horizons
    Tradeoff {
        #[arg(long = "a", value_delimiter = ',', default_values_t = [3.0, 4.0, 10.0, 100.0, 1e6])]
        shapes: Vec<f64>,
        #[arg(long = "k", value_delimiter = ',', default_values_t = [10, 20, 50, 100])]
        horizons: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long = "b", default_value_t = 0.01)]
        level: f64,
    },
    /// Verify the dual certificate with the theoretical coefficients
    Certify {
        #[arg(long, default_value = "ogm-a:4")]
        schedule: ScheduleSpec,
        #[arg(long = "k")]
        horizon: usize,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
        /// Check this many random schedules (ratios in [0.1, 0.9]) instead
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Effort-optimal accuracy levels against the constant baseline
    Schedule {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 1.0)]
        q1: f64,
        #[arg(long, default_value_t = std::f64::consts::E)]
        q2: f64,
        #[arg(long, default_value = "ogm-a:4")]
        schedule: ScheduleSpec,
        #[arg(long = "k", value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// Write the worst-case program in SDPA sparse format
    ExportSdp {
        #[arg(long, value_parser = parse_target)]
        target: SdpTarget,
        #[arg(long, default_value = "ogm-a:4")]
        schedule: ScheduleSpec,
        #[arg(long = "k")]
        horizon: usize,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// One level for every iteration, or K comma-separated levels
        #[arg(long = "b", value_delimiter = ',', default_values_t = [0.0])]
        levels: Vec<f64>,
    },
    /// Run every reproducibility check
    VerifyAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    PowerLaw,
    Exponential,
}

fn parse_method(s: &str) -> Result<Method, String> {
    toml::Value::String(s.into())
        .try_into()
        .map_err(|_| format!("unknown method '{s}' (igogm, igfgm, ifgm, istm, ogm, gd-baseline)"))
}

fn parse_policy(s: &str) -> Result<ErrorPolicy, String> {
    toml::Value::String(s.into()).try_into().map_err(|_| {
        format!("unknown policy '{s}' (random-unit-sphere, fixed-direction, gradient-aligned, gradient-opposed)")
    })
}

fn parse_target(s: &str) -> Result<SdpTarget, String> {
    s.parse().map_err(|e: inexact_pep::Error| e.to_string())
}

fn execute(cli: Cli) -> anyhow::Result<Outcome> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build_global()
        .ok();
    let default_out = PathBuf::from("out");
    match cli.command {
        Command::Run {
            config,
            horizon,
            seed,
            method,
            policy,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(k) = horizon {
                cfg.horizon = k;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(p) = policy {
                cfg.oracle.policy = p;
            }
            cfg.validate()
                .map_err(|e| config::config_error(format!("{}: {e}", config.display())))?;
            let out = cli.out.or_else(|| cfg.output.clone()).unwrap_or(default_out);
            let summary = commands::cmd_run(&cfg, &out)?;
            println!("{}", summary.line);
            Ok(summary.outcome)
        }
        Command::Tradeoff {
            shapes,
            horizons,
            lipschitz,
            radius,
            level,
        } => commands::cmd_tradeoff(
            &shapes,
            &horizons,
            lipschitz,
            radius,
            level,
            &cli.out.unwrap_or(default_out),
        ),
        Command::Certify {
            schedule,
            horizon,
            lipschitz,
            random,
            seed,
        } => commands::cmd_certify(
            &schedule,
            horizon,
            lipschitz,
            random,
            seed,
            &cli.out.unwrap_or(default_out),
        ),
        Command::Schedule {
            model,
            c1,
            c2,
            q1,
            q2,
            schedule,
            horizons,
            lipschitz,
            radius,
        } => {
            let model = match model {
                ModelKind::PowerLaw => EffortModel::PowerLaw { c1, c2 },
                ModelKind::Exponential => EffortModel::Exponential { q1, q2 },
            };
            commands::cmd_schedule(
                model,
                &schedule,
                &horizons,
                lipschitz,
                radius,
                &cli.out.unwrap_or(default_out),
            )
        }
        Command::ExportSdp {
            target,
            schedule,
            horizon,
            lipschitz,
            radius,
            levels,
        } => commands::cmd_export_sdp(
            target,
            &schedule,
            horizon,
            lipschitz,
            radius,
            &levels,
            &cli.out.unwrap_or(default_out),
        ),
        Command::VerifyAll => commands::cmd_verify_all(&cli.out.unwrap_or(default_out)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(1),
        Err(e) => {
            if e.downcast_ref::<ConfigError>().is_some() {
                eprintln!("config error: {e}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}
