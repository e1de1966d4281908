//! Boosted proximal point method and the plain proximal point baseline.
//!
//! Each iteration solves the strongly convex subproblem
//!
//! ```text
//! y^k = argmin_x g(x) - <grad h(x^k) - grad phi(x^k), x - x^k> + lambda_k/2 ||x - x^k||^2
//! ```
//!
//! and, for the boosted variant, moves past `y^k` along `d^k = y^k - x^k`
//! with an Armijo step `eta^{m_k}`. The plain variant sets `x^{k+1} = y^k`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::oracle::{dc_gradient, dc_value, DcProblem};
use crate::prox::subproblem_solve;
use crate::trace::{CheckSettings, Clock, IterateRecord, NoClock, SolverConfig, SolverKind, Termination, Trace};
use crate::{num, DcError, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Fixed `lambda_k`; `None` means `L1 + 2 lambda_hat`.
    Constant(Option<f64>),
    /// Start at `L1 + 2 lambda_hat`; double (capped at `lambda_bar`) whenever
    /// the proximal descent inequality fails, then redo the step.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BppaConfig {
    /// Linesearch shrink factor in `(0, 1)`.
    pub eta: f64,
    /// Armijo constant, `> 0`.
    pub alpha: f64,
    pub lambda_hat: f64,
    pub lambda_bar: f64,
    pub lambda_rule: LambdaRule,
    /// Stop when `||d^k|| <= tol_d`; `None` means `1e-10 (1 + ||x^k||)`.
    pub tol_d: Option<f64>,
    pub max_iter: usize,
    pub max_armijo: u32,
    /// Also try the unit step `m = 0` before `m = 1`.
    pub allow_m0: bool,
    /// Report divergence when `f(x^k)` drops below this value.
    pub f_floor: Option<f64>,
    pub checks: CheckSettings,
}

impl Default for BppaConfig {
    fn default() -> Self {
        BppaConfig {
            eta: 0.5,
            alpha: 0.1,
            lambda_hat: 0.5,
            lambda_bar: 1e4,
            lambda_rule: LambdaRule::Constant(None),
            tol_d: None,
            max_iter: 10_000,
            max_armijo: 60,
            allow_m0: false,
            f_floor: None,
            checks: CheckSettings::default(),
        }
    }
}

fn invalid(name: &'static str, reason: alloc::string::String) -> DcError {
    DcError::InvalidParameter { name, reason }
}

impl BppaConfig {
    /// Checks the parameter ranges against the declared `L1` and returns the
    /// initial `lambda_k`.
    pub fn validate(&self, l1: f64) -> Result<f64> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid("eta", alloc::format!("must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.alpha > 0.0) {
            return Err(invalid("alpha", alloc::format!("must be positive, got {}", self.alpha)));
        }
        if !(self.lambda_hat > 0.0) {
            return Err(invalid("lambda_hat", alloc::format!("must be positive, got {}", self.lambda_hat)));
        }
        if !(l1 >= 0.0) {
            return Err(invalid("L1", alloc::format!("must be nonnegative, got {l1}")));
        }
        if self.max_armijo < 1 {
            return Err(invalid("max_armijo", "must be at least 1".into()));
        }
        let floor = l1 + 2.0 * self.lambda_hat;
        if !(self.lambda_bar >= floor) {
            return Err(invalid(
                "lambda_bar",
                alloc::format!("must be >= L1 + 2 lambda_hat = {floor}, got {}", self.lambda_bar),
            ));
        }
        match self.lambda_rule {
            LambdaRule::Constant(Some(v)) => {
                if !(v >= floor && v <= self.lambda_bar) {
                    return Err(invalid(
                        "lambda",
                        alloc::format!(
                            "constant lambda {v} outside [L1 + 2 lambda_hat, lambda_bar] = [{floor}, {}]",
                            self.lambda_bar
                        ),
                    ));
                }
                Ok(v)
            }
            LambdaRule::Constant(None) | LambdaRule::Adaptive => Ok(floor),
        }
    }
}

/// Result of one proximal (and possibly boosted) step from `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub y: Vec<f64>,
    pub d: Vec<f64>,
    pub d_norm: f64,
    pub m_k: u32,
    pub eta_k: f64,
    pub x_next: Vec<f64>,
    pub f_x: f64,
    pub f_y: f64,
    pub f_next: f64,
    /// `((lambda_k - L1)/2 + alpha eta_k) ||d^k||^2`
    pub decrease_bound: f64,
    /// `||d^k|| <= tol_d`: `x` is accepted as (approximately) stationary.
    pub terminated: bool,
}

/// Smallest `m >= 1` with `f(y + eta^m d) <= f(y) - alpha eta^m ||d||^2`.
/// Returns `(m, eta^m)`.
pub fn armijo_search<F>(f: F, y: &[f64], d: &[f64], eta: f64, alpha: f64, max_m: u32) -> Result<(u32, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    armijo_search_from(f, y, d, eta, alpha, 1, max_m)
}

/// [`armijo_search`] starting the search at `first_m`.
pub fn armijo_search_from<F>(
    f: F,
    y: &[f64],
    d: &[f64],
    eta: f64,
    alpha: f64,
    first_m: u32,
    max_m: u32,
) -> Result<(u32, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let d_sq = num::norm_sq(d);
    if !(d_sq > 0.0) {
        return Err(invalid("d", "search direction must be nonzero".into()));
    }
    let fy = f(y);
    if !fy.is_finite() {
        return Err(DcError::NonFinite("f at linesearch base point"));
    }
    let mut step = libm::pow(eta, first_m as f64);
    for m in first_m..=max_m {
        let trial = f(&num::axpy(y, step, d));
        if trial.is_finite() && trial <= fy - alpha * step * d_sq {
            return Ok((m, step));
        }
        step *= eta;
    }
    Err(DcError::ArmijoFailure { max_m })
}

fn violation(check: &'static str, k: usize, lhs: f64, rhs: f64) -> DcError {
    DcError::Violation(Violation { check, k, lhs, rhs })
}

#[allow(clippy::too_many_arguments)]
fn step_inner(
    problem: &DcProblem,
    x: &[f64],
    f_x: f64,
    lambda_k: f64,
    l1: f64,
    config: &BppaConfig,
    boost: bool,
    take_step: bool,
    k: usize,
) -> Result<StepOutcome> {
    let sub = subproblem_solve(problem, x, lambda_k)?;
    let y = sub.y;
    let d = num::sub(&y, x);
    let d_norm = num::norm(&d);
    let tol = config.tol_d.unwrap_or(1e-10 * (1.0 + num::norm(x)));
    let f_y = dc_value(problem, &y)?;
    let mut out = StepOutcome {
        x_next: x.to_vec(),
        y,
        d,
        d_norm,
        m_k: 0,
        eta_k: 0.0,
        f_x,
        f_y,
        f_next: f_x,
        decrease_bound: 0.0,
        terminated: d_norm <= tol,
    };
    if out.terminated || !take_step {
        return Ok(out);
    }
    let prox_decrease = 0.5 * (lambda_k - l1) * d_norm * d_norm;
    if config.checks.descent_a {
        let rhs = f_x - prox_decrease;
        if !(f_y <= rhs + config.checks.slack(f_x)) {
            return Err(violation("descent_a", k, f_y, rhs));
        }
    }
    if !boost {
        out.x_next = out.y.clone();
        out.f_next = f_y;
        out.decrease_bound = prox_decrease;
        return Ok(out);
    }
    let first_m = if config.allow_m0 { 0 } else { 1 };
    let (m_k, eta_k) = armijo_search_from(
        |z| dc_value(problem, z).unwrap_or(f64::INFINITY),
        &out.y,
        &out.d,
        config.eta,
        config.alpha,
        first_m,
        config.max_armijo,
    )?;
    out.m_k = m_k;
    out.eta_k = eta_k;
    out.x_next = num::axpy(&out.y, eta_k, &out.d);
    out.f_next = dc_value(problem, &out.x_next)?;
    out.decrease_bound = prox_decrease + config.alpha * eta_k * d_norm * d_norm;
    if config.checks.descent_c {
        let rhs = f_x - out.decrease_bound;
        if !(out.f_next <= rhs + config.checks.slack(f_x)) {
            return Err(violation("descent_c", k, out.f_next, rhs));
        }
    }
    Ok(out)
}

fn require_l1(problem: &DcProblem) -> Result<f64> {
    problem
        .l1()
        .ok_or(DcError::MissingCapability("Lipschitz constant of grad phi on the problem box"))
}

/// One boosted step from `x` with parameter `lambda_k`, with both descent
/// inequalities verified.
pub fn bppa_step(problem: &DcProblem, x: &[f64], lambda_k: f64, config: &BppaConfig) -> Result<StepOutcome> {
    problem.bppa_compatible().map_err(|reason| incompatible("bppa", problem, reason))?;
    let l1 = require_l1(problem)?;
    let f_x = dc_value(problem, x)?;
    step_inner(problem, x, f_x, lambda_k, l1, config, true, true, 0)
}

/// One plain proximal point step from `x`.
pub fn ppa_step(problem: &DcProblem, x: &[f64], lambda_k: f64, config: &BppaConfig) -> Result<StepOutcome> {
    problem.ppa_compatible().map_err(|reason| incompatible("ppa", problem, reason))?;
    let l1 = require_l1(problem)?;
    let f_x = dc_value(problem, x)?;
    step_inner(problem, x, f_x, lambda_k, l1, config, false, true, 0)
}

fn incompatible(solver: &'static str, problem: &DcProblem, reason: &'static str) -> DcError {
    DcError::Incompatible {
        solver,
        problem: problem.label.clone(),
        reason,
    }
}

pub fn solve_bppa(problem: &DcProblem, x0: &[f64], config: &BppaConfig) -> Result<Trace> {
    solve_with_clock(problem, x0, config, true, &NoClock)
}

pub fn solve_ppa(problem: &DcProblem, x0: &[f64], config: &BppaConfig) -> Result<Trace> {
    solve_with_clock(problem, x0, config, false, &NoClock)
}

/// Runs the boosted (`boost = true`) or plain proximal point method.
pub fn solve_with_clock(
    problem: &DcProblem,
    x0: &[f64],
    config: &BppaConfig,
    boost: bool,
    clock: &dyn Clock,
) -> Result<Trace> {
    let (kind, name) = if boost {
        (SolverKind::Bppa, "bppa")
    } else {
        (SolverKind::Ppa, "ppa")
    };
    let compat = if boost {
        problem.bppa_compatible()
    } else {
        problem.ppa_compatible()
    };
    compat.map_err(|reason| incompatible(name, problem, reason))?;
    let l1 = require_l1(problem)?;
    let mut lambda = config.validate(l1)?;
    problem.check_dim(x0)?;
    if !num::all_finite(x0) {
        return Err(DcError::NonFinite("x0"));
    }
    let mut x = x0.to_vec();
    let mut f_x = dc_value(problem, &x)?;
    if !f_x.is_finite() {
        return Err(DcError::InvalidInput("x0 lies outside dom f".into()));
    }
    let smooth = problem.bppa_compatible().is_ok();
    let l2 = problem.l2();
    let snapshot = if boost {
        SolverConfig::Bppa(config.clone())
    } else {
        SolverConfig::Ppa(config.clone())
    };
    let mut trace = Trace {
        problem_label: problem.label.clone(),
        solver: kind,
        config_snapshot: Some(snapshot),
        records: Vec::new(),
        termination: Termination::MaxIter,
        delta_grid: Vec::new(),
    };
    let mut sum_d_sq = 0.0;
    for k in 0..=config.max_iter {
        let take_step = k < config.max_iter;
        let outcome = loop {
            match step_inner(problem, &x, f_x, lambda, l1, config, boost, take_step, k) {
                Ok(o) => break Ok(o),
                Err(DcError::Violation(v))
                    if v.check == "descent_a"
                        && config.lambda_rule == LambdaRule::Adaptive
                        && lambda < config.lambda_bar =>
                {
                    lambda = (2.0 * lambda).min(config.lambda_bar);
                }
                Err(e) => break Err(e),
            }
        };
        let outcome = match outcome {
            Ok(o) => o,
            Err(DcError::ArmijoFailure { .. }) => {
                trace.records.push(IterateRecord {
                    k,
                    x: x.clone(),
                    f_x,
                    lambda_k: Some(lambda),
                    wall_time_s: clock.elapsed_s(),
                    ..Default::default()
                });
                trace.termination = Termination::ArmijoFail;
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };
        let grad_residual = if smooth {
            Some(num::norm(&dc_gradient(problem, &x)?))
        } else {
            None
        };
        sum_d_sq += outcome.d_norm * outcome.d_norm;
        let stepped = take_step && !outcome.terminated;
        trace.records.push(IterateRecord {
            k,
            x,
            f_x,
            d_norm: outcome.d_norm,
            eta_k: (stepped && boost).then_some(outcome.eta_k),
            m_k: (stepped && boost).then_some(outcome.m_k),
            lambda_k: Some(lambda),
            grad_residual,
            grad_bound: l2.map(|l2| (l2 + lambda) * outcome.d_norm),
            sum_d_sq: Some(sum_d_sq),
            energy: Vec::new(),
            lyapunov: None,
            coupling_norm: None,
            wall_time_s: clock.elapsed_s(),
        });
        if outcome.terminated {
            trace.termination = Termination::Converged;
            return Ok(trace);
        }
        if !take_step {
            break;
        }
        x = outcome.x_next;
        f_x = outcome.f_next;
        let below_floor = config.f_floor.is_some_and(|fl| f_x < fl);
        if below_floor || !num::all_finite(&x) || !f_x.is_finite() {
            trace.records.push(IterateRecord {
                k: k + 1,
                x,
                f_x,
                lambda_k: Some(lambda),
                wall_time_s: clock.elapsed_s(),
                ..Default::default()
            });
            trace.termination = Termination::Diverged;
            return Ok(trace);
        }
    }
    trace.termination = Termination::MaxIter;
    Ok(trace)
}
