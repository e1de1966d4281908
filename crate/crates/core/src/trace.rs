//! Per-iteration records of a solver run.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bppa::BppaConfig;
use crate::inertial::InertialConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Bppa,
    Ppa,
    Inertial,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bppa => "bppa",
            SolverKind::Ppa => "ppa",
            SolverKind::Inertial => "inertial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
    ArmijoFail,
    Diverged,
}

/// Solver settings captured in a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverConfig {
    Bppa(BppaConfig),
    Ppa(BppaConfig),
    Inertial(InertialConfig),
}

impl SolverConfig {
    pub fn kind(&self) -> SolverKind {
        match self {
            SolverConfig::Bppa(_) => SolverKind::Bppa,
            SolverConfig::Ppa(_) => SolverKind::Ppa,
            SolverConfig::Inertial(_) => SolverKind::Inertial,
        }
    }
}

/// State and diagnostics at iteration `k`.
///
/// For the proximal point solvers `d_norm` is `||y^k - x^k||`; for the
/// inertial solver it is the joint step `||z^{k+1} - z^k||` with `z = (x, y)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f_x: f64,
    pub d_norm: f64,
    pub eta_k: Option<f64>,
    pub m_k: Option<u32>,
    pub lambda_k: Option<f64>,
    /// `||grad f(x^k)||` when `f` is differentiable.
    pub grad_residual: Option<f64>,
    /// Upper bound `(L2 + lambda_k) ||d^k||` on the gradient norm.
    pub grad_bound: Option<f64>,
    /// Running sum of `||d^j||^2` for `j <= k`.
    pub sum_d_sq: Option<f64>,
    /// `E_k(delta)` over the monitored delta grid.
    pub energy: Vec<f64>,
    pub lyapunov: Option<f64>,
    /// `||alpha x^k + beta y^k||`
    pub coupling_norm: Option<f64>,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub problem_label: String,
    pub solver: SolverKind,
    pub config_snapshot: Option<SolverConfig>,
    pub records: Vec<IterateRecord>,
    pub termination: Termination,
    /// The monitored delta grid for inertial runs.
    pub delta_grid: Vec<f64>,
}

impl Trace {
    /// A trace carrying only objective values, for diagnostics on external
    /// sequences.
    pub fn from_values(label: &str, f: &[f64]) -> Self {
        Trace {
            problem_label: label.into(),
            solver: SolverKind::Bppa,
            config_snapshot: None,
            records: f
                .iter()
                .enumerate()
                .map(|(k, v)| IterateRecord {
                    k,
                    f_x: *v,
                    ..Default::default()
                })
                .collect(),
            termination: Termination::MaxIter,
            delta_grid: Vec::new(),
        }
    }

    pub fn f_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f_x).collect()
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }

    /// Number of steps taken; the last record is the state the run stopped at.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Records are indexed `0, 1, 2, ...` without gaps.
    pub fn is_contiguous(&self) -> bool {
        self.records.iter().enumerate().all(|(i, r)| r.k == i)
    }
}

/// Source of elapsed wall time for records; `no_std` code cannot read a clock.
pub trait Clock {
    fn elapsed_s(&self) -> Option<f64>;
}

/// Records no timing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_s(&self) -> Option<f64> {
        None
    }
}

/// Which monitored inequalities a solver verifies live, and the relative
/// slack `rel * (1 + |reference value|)` granted to each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckSettings {
    /// `f(y^k) <= f(x^k) - (lambda_k - L1)/2 ||d^k||^2`
    pub descent_a: bool,
    /// `f(x^{k+1}) <= f(x^k) - ((lambda_k - L1)/2 + alpha eta_k) ||d^k||^2`
    pub descent_c: bool,
    /// `Phi(z^{k+1}) <= Phi(z^k) - abar ||z^{k+1} - z^k||^2`
    pub lyapunov: bool,
    /// `E_{k+1}(delta) <= E_k(delta)` on the delta grid.
    pub energy: bool,
    pub relative_slack: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            descent_a: true,
            descent_c: true,
            lyapunov: true,
            energy: true,
            relative_slack: 1e-10,
        }
    }
}

impl CheckSettings {
    pub fn slack(&self, reference: f64) -> f64 {
        self.relative_slack * (1.0 + crate::num::abs(reference))
    }
}
