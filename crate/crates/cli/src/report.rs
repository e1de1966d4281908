//! JSON reports of `run` and `compare`.

use dcprox::analysis::{KlEstimate, RateReport};
use dcprox::inertial::DerivedConstants;
use dcprox::problems::ProblemParams;
use dcprox::{CheckSettings, SolverConfig, SolverKind, Termination};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub check: String,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub enabled: CheckSettings,
    /// `true` when every enabled inequality held on every iteration.
    pub passed: bool,
    pub violation: Option<ViolationReport>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub parameters: ProblemParams,
    pub seed: u64,
    pub solver: SolverKind,
    /// `converged`, `max_iter`, `armijo_fail`, `diverged`, `violation` or `error`.
    pub status: String,
    pub termination: Option<Termination>,
    pub exit_code: i32,
    pub iterations: usize,
    pub final_f: Option<f64>,
    pub final_x: Vec<f64>,
    pub known_fstar: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub final_grad_bound: Option<f64>,
    pub rate: Option<RateReport>,
    pub rate_error: Option<String>,
    pub kl: Option<KlEstimate>,
    pub kl_error: Option<String>,
    pub checks: CheckSummary,
    pub inertial_constants: Option<DerivedConstants>,
    pub delta_grid: Vec<f64>,
    pub config: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegReport {
    pub solver: SolverKind,
    pub status: String,
    pub exit_code: i32,
    pub iterations: usize,
    pub final_f: Option<f64>,
    /// First `k` with `f_k - fstar <= tolerance`.
    pub iterations_to_tolerance: Option<usize>,
    pub rate: Option<RateReport>,
    pub rate_error: Option<String>,
    pub trace_path: Option<String>,
}

/// One boosted and one plain step from each state of the boosted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub states: usize,
    pub boosted_no_worse: usize,
    pub boosted_strictly_better: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub problem: String,
    pub parameters: ProblemParams,
    pub seed: u64,
    pub tolerance: f64,
    pub fstar_reference: f64,
    pub fstar_known: bool,
    pub legs: Vec<LegReport>,
    pub dominance: Option<Dominance>,
    pub exit_code: i32,
}
