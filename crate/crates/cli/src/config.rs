//! Run configuration, schema version 1.

use std::path::{Path, PathBuf};

use dcprox::bppa::BppaConfig;
use dcprox::inertial::InertialConfig;
use dcprox::problems::ProblemParams;
use dcprox::{CheckSettings, SolverConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    /// Legs of `compare`; `run` uses `solver`.
    #[serde(default)]
    pub solvers: Vec<SolverConfig>,
    #[serde(default)]
    pub start: StartBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// Overrides the `checks` block of every solver.
    #[serde(default)]
    pub checks: Option<CheckSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub name: String,
    #[serde(default)]
    pub parameters: Value,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartBlock {
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    #[serde(default)]
    pub report_path: Option<PathBuf>,
    /// Timing breaks byte-identical traces, so it is off unless asked for.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ProblemBlock {
    pub fn params(&self) -> Result<ProblemParams, CliError> {
        let parameters = if self.parameters.is_null() {
            Value::Object(Default::default())
        } else {
            self.parameters.clone()
        };
        let tagged = serde_json::json!({ "name": self.name, "parameters": parameters });
        serde_json::from_value(tagged).map_err(|e| CliError::Config(format!("problem {}: {e}", self.name)))
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                cfg.version
            )));
        }
        cfg.problem.params()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    /// The solver of `run`: `solver`, or the only entry of `solvers`.
    pub fn single_solver(&self) -> Result<SolverConfig, CliError> {
        let s = match (&self.solver, self.solvers.as_slice()) {
            (Some(s), _) => s.clone(),
            (None, [only]) => only.clone(),
            (None, []) => return Err(CliError::Config("no solver configured".into())),
            (None, _) => return Err(CliError::Config("several solvers configured; use compare".into())),
        };
        Ok(self.with_checks(s))
    }

    /// Legs of `compare`: `solvers`, falling back to `solver`.
    pub fn legs(&self) -> Result<Vec<SolverConfig>, CliError> {
        let legs: Vec<SolverConfig> = if self.solvers.is_empty() {
            self.solver.iter().cloned().collect()
        } else {
            self.solvers.clone()
        };
        if legs.is_empty() {
            return Err(CliError::Config("no solver configured".into()));
        }
        Ok(legs.into_iter().map(|s| self.with_checks(s)).collect())
    }

    fn with_checks(&self, s: SolverConfig) -> SolverConfig {
        let Some(checks) = self.checks else { return s };
        match s {
            SolverConfig::Bppa(c) => SolverConfig::Bppa(BppaConfig { checks, ..c }),
            SolverConfig::Ppa(c) => SolverConfig::Ppa(BppaConfig { checks, ..c }),
            SolverConfig::Inertial(c) => SolverConfig::Inertial(InertialConfig { checks, ..c }),
        }
    }
}
