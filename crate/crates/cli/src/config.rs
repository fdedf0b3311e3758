//! TOML experiment files and the schedule shorthand used on the command line.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use inexact_pep::algorithms::Method;
use inexact_pep::oracles::{ErrorPolicy, ProblemSpec};
use inexact_pep::scheduler::EffortModel;
use inexact_pep::schedules::{InexactnessSchedule, StepsizeSchedule};
use serde::Deserialize;

/// Problems with the input itself, reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// Ratios `lambda_1..lambda_K`; a single value is repeated.
    Lambda {
        lambda: Vec<f64>,
    },
    OgmA {
        a: f64,
    },
    Constant,
}

impl ScheduleSpec {
    pub fn build(&self, horizon: usize) -> inexact_pep::Result<StepsizeSchedule> {
        match self {
            ScheduleSpec::Lambda { lambda } if lambda.len() == 1 => {
                StepsizeSchedule::from_lambda(&vec![lambda[0]; horizon], horizon)
            }
            ScheduleSpec::Lambda { lambda } => {
                if lambda.len() != horizon {
                    return Err(inexact_pep::Error::InvalidParameter(format!(
                        "need 1 or {horizon} lambda values, got {}",
                        lambda.len()
                    )));
                }
                StepsizeSchedule::from_lambda(lambda, horizon)
            }
            ScheduleSpec::OgmA { a } => StepsizeSchedule::ogm_a(*a, horizon),
            ScheduleSpec::Constant => StepsizeSchedule::constant(horizon),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ScheduleSpec::Lambda { lambda } if lambda.len() == 1 => format!("lambda={}", lambda[0]),
            ScheduleSpec::Lambda { .. } => "lambda-list".into(),
            ScheduleSpec::OgmA { a } => format!("ogm-a={a}"),
            ScheduleSpec::Constant => "constant".into(),
        }
    }
}

/// `ogm-a:4`, `ogm` (all ratios 1), `constant`, `lambda:0.5` or `lambda:0.2,0.4,...`.
impl FromStr for ScheduleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let number = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: '{t}'"));
        match (head, tail) {
            ("constant", None) => Ok(ScheduleSpec::Constant),
            ("ogm", None) => Ok(ScheduleSpec::Lambda { lambda: vec![1.0] }),
            ("ogm-a", Some(t)) => Ok(ScheduleSpec::OgmA { a: number(t)? }),
            ("lambda", Some(t)) => Ok(ScheduleSpec::Lambda {
                lambda: t.split(',').map(number).collect::<Result<_, _>>()?,
            }),
            _ => Err(format!(
                "unknown schedule '{s}' (expected ogm-a:<a>, ogm, constant, lambda:<v>[,<v>...])"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LevelSpec {
    Exact,
    Constant {
        level: f64,
    },
    List {
        levels: Vec<f64>,
    },
    /// Levels from the effort-optimal allocation for the run's own coefficients.
    Optimal {
        model: EffortModel,
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "default_policy")]
    pub policy: ErrorPolicy,
    #[serde(default = "default_levels")]
    pub levels: LevelSpec,
}

fn default_policy() -> ErrorPolicy {
    ErrorPolicy::RandomUnitSphere
}

fn default_levels() -> LevelSpec {
    LevelSpec::Exact
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            policy: default_policy(),
            levels: default_levels(),
        }
    }
}

fn default_distance() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    /// Replaces the problem's own constant; must not be smaller.
    pub lipschitz: Option<f64>,
    /// `|x_0 - x*|`; the direction is drawn from `seed`.
    #[serde(default = "default_distance")]
    pub initial_distance: f64,
    pub output: Option<PathBuf>,
    pub schedule: ScheduleSpec,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(|e| config_error(format!("{e:#}")))?;
        Self::parse(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        config.validate()?;
        Ok(config)
    }

    /// Field-level checks that deserialization cannot express.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.horizon < 1 {
            bail!("horizon: must be at least 1");
        }
        if !(self.initial_distance > 0.0 && self.initial_distance.is_finite()) {
            bail!("initial_distance: must be positive, got {}", self.initial_distance);
        }
        if let Some(l) = self.lipschitz {
            if !(l > 0.0 && l.is_finite()) {
                bail!("lipschitz: must be positive, got {l}");
            }
        }
        if self.method == Method::Igfo {
            bail!("method: igfo runs only through the library (no schedule form)");
        }
        if self.method != Method::Ogm && self.method != Method::GradientDescent {
            self.schedule
                .build(self.horizon)
                .map_err(|e| anyhow!("schedule: {e}"))?;
        }
        self.problem.build().map_err(|e| anyhow!("problem: {e}"))?;
        match &self.oracle.levels {
            LevelSpec::Exact => {}
            LevelSpec::Constant { level } => {
                InexactnessSchedule::constant(self.horizon, *level).map_err(|e| anyhow!("oracle.levels.level: {e}"))?;
            }
            LevelSpec::List { levels } => {
                if levels.len() != self.horizon {
                    bail!(
                        "oracle.levels.levels: need {} entries, got {}",
                        self.horizon,
                        levels.len()
                    );
                }
                InexactnessSchedule::new(levels.clone()).map_err(|e| anyhow!("oracle.levels.levels: {e}"))?;
            }
            LevelSpec::Optimal { model, radius } => {
                model.validate().map_err(|e| anyhow!("oracle.levels.model: {e}"))?;
                if !(*radius > 0.0) {
                    bail!("oracle.levels.radius: must be positive, got {radius}");
                }
            }
        }
        Ok(())
    }
}
