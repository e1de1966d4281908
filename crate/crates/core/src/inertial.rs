//! Inertial proximal method for DC programs.
//!
//! ```text
//! q^k     in dh(x^k)
//! x^{k+1} = prox_{lambda g}(x^k - lambda (grad phi(x^k) - q^k) - mu (alpha x^k + beta y^k))
//! y^{k+1} = y^k - (alpha x^k + beta y^k + gamma alpha (x^{k+1} - x^k)) / rho
//! rho     = 1 + tau beta + (alpha + beta)/2
//! ```
//!
//! Along the iterates the energy `E_k(delta) = delta f(x^k) + ||a x^k + b y^k||^2 / 2`
//! decreases for every `delta` in an explicit interval, and the Lyapunov
//! function `Phi(z) = delta_1 f(x) + ||a x + b y||^2 / 2` decreases by at
//! least `abar ||z^{k+1} - z^k||^2`. Both are checked live.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::oracle::{dc_gradient, dc_value, DcProblem};
use crate::trace::{CheckSettings, Clock, IterateRecord, NoClock, SolverConfig, SolverKind, Termination, Trace};
use crate::{num, DcError, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertialParams {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl Default for InertialParams {
    fn default() -> Self {
        InertialParams {
            lambda: 0.5,
            mu: 0.2,
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.5,
            tau: 0.0,
        }
    }
}

/// A rejected inertial parameter set, one case per hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ParamViolation {
    #[error("lambda_nonpositive: lambda = {0} must be > 0")]
    LambdaNonpositive(f64),
    #[error("mu_nonpositive: mu = {0} must be > 0")]
    MuNonpositive(f64),
    #[error("beta_nonpositive: beta = {0} must be > 0")]
    BetaNonpositive(f64),
    #[error("alpha_beta_sum: alpha + beta = {0} must be > 0")]
    AlphaBetaSum(f64),
    #[error("tau_too_small: tau = {tau} must exceed -(2 + alpha)/(2 beta) = {bound}")]
    TauTooSmall { tau: f64, bound: f64 },
    #[error("gamma_below_half: gamma = {0} must be >= 1/2")]
    GammaBelowHalf(f64),
    #[error("step_condition: lambda L1 + mu (gamma alpha + rho) = {0} must be <= 1")]
    StepCondition(f64),
    #[error("energy_interval_empty: a2 + b2 = {0} must be >= 0")]
    EnergyIntervalEmpty(f64),
}

impl ParamViolation {
    pub fn name(&self) -> &'static str {
        match self {
            ParamViolation::LambdaNonpositive(_) => "lambda_nonpositive",
            ParamViolation::MuNonpositive(_) => "mu_nonpositive",
            ParamViolation::BetaNonpositive(_) => "beta_nonpositive",
            ParamViolation::AlphaBetaSum(_) => "alpha_beta_sum",
            ParamViolation::TauTooSmall { .. } => "tau_too_small",
            ParamViolation::GammaBelowHalf(_) => "gamma_below_half",
            ParamViolation::StepCondition(_) => "step_condition",
            ParamViolation::EnergyIntervalEmpty(_) => "energy_interval_empty",
        }
    }
}

/// Constants derived from [`InertialParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub rho: f64,
    pub a: f64,
    pub b: f64,
    pub a2: f64,
    pub b2: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,
    /// `(a2 + b2) lambda / (rho mu)`, the weight of `f` in `Phi`.
    pub delta1: f64,
    /// `(a2 + b2) beta`, an alternate normalization reported for reference.
    pub delta1_alt: f64,
    pub abar: f64,
    /// `lambda L1 + mu (gamma alpha + rho)`
    pub step_condition: f64,
    /// `alpha` and `beta`, kept for the coupling `alpha x + beta y`.
    pub alpha: f64,
    pub beta: f64,
}

const STEP_CONDITION_ROUNDING: f64 = 1e-12;

/// Checks every hypothesis on the parameters and computes the derived
/// constants.
pub fn validate_inertial_params(p: &InertialParams, l1: f64) -> core::result::Result<DerivedConstants, ParamViolation> {
    if !(p.lambda > 0.0) {
        return Err(ParamViolation::LambdaNonpositive(p.lambda));
    }
    if !(p.mu > 0.0) {
        return Err(ParamViolation::MuNonpositive(p.mu));
    }
    if !(p.beta > 0.0) {
        return Err(ParamViolation::BetaNonpositive(p.beta));
    }
    if !(p.alpha + p.beta > 0.0) {
        return Err(ParamViolation::AlphaBetaSum(p.alpha + p.beta));
    }
    let tau_bound = -(2.0 + p.alpha) / (2.0 * p.beta);
    if !(p.tau > tau_bound) {
        return Err(ParamViolation::TauTooSmall {
            tau: p.tau,
            bound: tau_bound,
        });
    }
    if !(p.gamma >= 0.5) {
        return Err(ParamViolation::GammaBelowHalf(p.gamma));
    }
    let rho = 1.0 + p.tau * p.beta + 0.5 * (p.alpha + p.beta);
    let step_condition = p.lambda * l1 + p.mu * (p.gamma * p.alpha + rho);
    if !(step_condition <= 1.0 + STEP_CONDITION_ROUNDING) {
        return Err(ParamViolation::StepCondition(step_condition));
    }
    let denom = 2.0 + p.alpha + p.beta;
    let a = 2.0 * p.alpha / denom;
    let b = 2.0 * p.beta / denom;
    let a2 = a * (1.0 + 2.0 * b * (p.gamma - 0.5));
    let b2 = b * (1.0 + b * (p.tau - 0.5));
    if !(a2 + b2 >= 0.0) {
        return Err(ParamViolation::EnergyIntervalEmpty(a2 + b2));
    }
    let scale = p.lambda / (rho * p.mu);
    let (sb, sab) = (num::sqrt(b2), num::sqrt(a2 + b2));
    Ok(DerivedConstants {
        rho,
        a,
        b,
        a2,
        b2,
        delta_lo: scale * (sb - sab) * (sb - sab),
        delta_hi: scale * (sb + sab) * (sb + sab),
        delta1: (a2 + b2) * scale,
        delta1_alt: (a2 + b2) * p.beta,
        abar: 0.5 * (2.0 * a2 + b2).min(b2),
        step_condition,
        alpha: p.alpha,
        beta: p.beta,
    })
}

impl DerivedConstants {
    /// `n` evenly spaced values over `[delta_lo, delta_hi]`, endpoints included.
    pub fn delta_grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => alloc::vec![self.delta_lo],
            _ => (0..n)
                .map(|i| {
                    if i + 1 == n {
                        self.delta_hi
                    } else {
                        self.delta_lo + (self.delta_hi - self.delta_lo) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }

    pub fn delta_admissible(&self, delta: f64) -> bool {
        delta >= self.delta_lo && delta <= self.delta_hi
    }

    /// `||a x + b y||^2 / 2` from `||alpha x + beta y||`, using
    /// `a x + b y = 2 (alpha x + beta y) / (2 + alpha + beta)`.
    pub fn coupling_energy(&self, coupling_norm: f64) -> f64 {
        let s = 2.0 / (2.0 + self.alpha + self.beta);
        0.5 * (s * coupling_norm) * (s * coupling_norm)
    }
}

/// `E(delta) = delta f + ||a x + b y||^2 / 2`.
pub fn energy(dc: &DerivedConstants, delta: f64, x: &[f64], y: &[f64], f_x: f64) -> f64 {
    delta * f_x + 0.5 * num::norm_sq(&num::lincomb(dc.a, x, dc.b, y))
}

/// `Phi(x, y) = delta_1 f(x) + ||a x + b y||^2 / 2`.
pub fn lyapunov(dc: &DerivedConstants, x: &[f64], y: &[f64], f_x: f64) -> f64 {
    energy(dc, dc.delta1, x, y, f_x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InertialState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Subgradient of `h` used for the step that produced this state.
    pub q: Option<Vec<f64>>,
}

impl InertialState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        InertialState { x, y, q: None }
    }
}

fn advance(
    problem: &DcProblem,
    state: &InertialState,
    p: &InertialParams,
    dc: &DerivedConstants,
    q: Vec<f64>,
    literal_quadratic: bool,
) -> Result<InertialState> {
    let x = &state.x;
    let y = &state.y;
    let coupling = num::lincomb(p.alpha, x, p.beta, y);
    let gphi = problem.phi.gradient(x);
    let (t, mu) = if literal_quadratic {
        (0.5 * p.lambda, 0.5 * p.mu)
    } else {
        (p.lambda, p.mu)
    };
    let center: Vec<f64> = (0..x.len())
        .map(|i| x[i] - t * (gphi[i] - q[i]) - mu * coupling[i])
        .collect();
    let spec = problem.g.prox_spec().ok_or(DcError::MissingCapability("prox of g"))?;
    let x_next = spec.prox(t, &center)?.y;
    let y_next: Vec<f64> = (0..x.len())
        .map(|i| y[i] - (coupling[i] + p.gamma * p.alpha * (x_next[i] - x[i])) / dc.rho)
        .collect();
    Ok(InertialState {
        x: x_next,
        y: y_next,
        q: Some(q),
    })
}

/// One inertial step with the subgradient selection of `h`.
pub fn inertial_step(
    problem: &DcProblem,
    state: &InertialState,
    p: &InertialParams,
    dc: &DerivedConstants,
) -> Result<InertialState> {
    problem.check_dim(&state.x)?;
    problem.check_dim(&state.y)?;
    let q = problem
        .h
        .subgradient(&state.x)
        .ok_or(DcError::MissingCapability("subgradient of h"))?;
    advance(problem, state, p, dc, q, false)
}

/// The smooth-`h` variant: `q = grad h(x)`. With `literal_quadratic` the
/// proximal term is `||x - x^k||^2 / lambda`, which halves the effective prox
/// step and the coupling weight.
pub fn inertial_step_smooth(
    problem: &DcProblem,
    state: &InertialState,
    p: &InertialParams,
    dc: &DerivedConstants,
    literal_quadratic: bool,
) -> Result<InertialState> {
    problem.check_dim(&state.x)?;
    problem.check_dim(&state.y)?;
    let h = problem.h.smooth.as_ref().ok_or(DcError::MissingCapability("gradient of h"))?;
    let q = h.gradient(&state.x);
    advance(problem, state, p, dc, q, literal_quadratic)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InertialConfig {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Use `q = grad h(x)` (requires differentiable `h`).
    pub smooth_h: bool,
    /// Proximal coefficient `1/lambda` instead of `1/(2 lambda)` in the
    /// smooth-`h` variant.
    pub alg3_literal_quadratic: bool,
    /// Stop when `||z^{k+1} - z^k|| <= tol`; `None` means `1e-10 (1 + ||z^k||)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub delta_grid_size: usize,
    /// Divergence watchdog on `max(||x||, ||y||)`.
    pub norm_ceiling: f64,
    pub checks: CheckSettings,
}

impl Default for InertialConfig {
    fn default() -> Self {
        let p = InertialParams::default();
        InertialConfig {
            lambda: p.lambda,
            mu: p.mu,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            tau: p.tau,
            smooth_h: false,
            alg3_literal_quadratic: false,
            tol: None,
            max_iter: 100_000,
            delta_grid_size: 5,
            norm_ceiling: 1e12,
            checks: CheckSettings::default(),
        }
    }
}

impl InertialConfig {
    pub fn params(&self) -> InertialParams {
        InertialParams {
            lambda: self.lambda,
            mu: self.mu,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            tau: self.tau,
        }
    }
}

/// Default inertial start `y0 = -(alpha/beta) x0`, so that the coupling
/// `alpha x0 + beta y0` vanishes.
pub fn default_y0(x0: &[f64], p: &InertialParams) -> Vec<f64> {
    num::scale(-p.alpha / p.beta, x0)
}

pub fn solve_inertial(problem: &DcProblem, x0: &[f64], y0: Option<&[f64]>, config: &InertialConfig) -> Result<Trace> {
    solve_inertial_with_clock(problem, x0, y0, config, &NoClock)
}

pub fn solve_inertial_with_clock(
    problem: &DcProblem,
    x0: &[f64],
    y0: Option<&[f64]>,
    config: &InertialConfig,
    clock: &dyn Clock,
) -> Result<Trace> {
    let compat = if config.smooth_h {
        problem.inertial_smooth_compatible()
    } else {
        problem.inertial_compatible()
    };
    compat.map_err(|reason| DcError::Incompatible {
        solver: "inertial",
        problem: problem.label.clone(),
        reason,
    })?;
    let l1 = problem
        .l1()
        .ok_or(DcError::MissingCapability("Lipschitz constant of grad phi on the problem box"))?;
    let p = config.params();
    let dc = validate_inertial_params(&p, l1)?;
    problem.check_dim(x0)?;
    let y0 = match y0 {
        Some(y) => {
            problem.check_dim(y)?;
            y.to_vec()
        }
        None => default_y0(x0, &p),
    };
    if !num::all_finite(x0) || !num::all_finite(&y0) {
        return Err(DcError::NonFinite("initial point"));
    }
    let grid = dc.delta_grid(config.delta_grid_size);
    let smooth_f = problem.bppa_compatible().is_ok();
    let checks = config.checks;

    let mut state = InertialState::new(x0.to_vec(), y0);
    let mut f_x = dc_value(problem, &state.x)?;
    if !f_x.is_finite() {
        return Err(DcError::InvalidInput("x0 lies outside dom f".into()));
    }
    let mut trace = Trace {
        problem_label: problem.label.clone(),
        solver: SolverKind::Inertial,
        config_snapshot: Some(SolverConfig::Inertial(config.clone())),
        records: Vec::new(),
        termination: Termination::MaxIter,
        delta_grid: grid.clone(),
    };
    let violation = |check, k, lhs, rhs| DcError::Violation(Violation { check, k, lhs, rhs });

    for k in 0..=config.max_iter {
        let next = if config.smooth_h {
            inertial_step_smooth(problem, &state, &p, &dc, config.alg3_literal_quadratic)?
        } else {
            inertial_step(problem, &state, &p, &dc)?
        };
        let dx = num::sub(&next.x, &state.x);
        let dy = num::sub(&next.y, &state.y);
        let step = num::sqrt(num::norm_sq(&dx) + num::norm_sq(&dy));
        let f_next = dc_value(problem, &next.x)?;

        let energies: Vec<f64> = grid.iter().map(|d| energy(&dc, *d, &state.x, &state.y, f_x)).collect();
        let phi_k = lyapunov(&dc, &state.x, &state.y, f_x);
        let coupling = num::norm(&num::lincomb(p.alpha, &state.x, p.beta, &state.y));
        let grad_residual = if smooth_f {
            Some(num::norm(&dc_gradient(problem, &state.x)?))
        } else {
            None
        };
        let z_norm = num::sqrt(num::norm_sq(&state.x) + num::norm_sq(&state.y));
        trace.records.push(IterateRecord {
            k,
            x: state.x.clone(),
            f_x,
            d_norm: step,
            lambda_k: Some(p.lambda),
            grad_residual,
            energy: energies.clone(),
            lyapunov: Some(phi_k),
            coupling_norm: Some(coupling),
            wall_time_s: clock.elapsed_s(),
            ..Default::default()
        });

        if f_next.is_finite() && num::all_finite(&next.x) && num::all_finite(&next.y) {
            if checks.lyapunov && dc.abar > 0.0 {
                let phi_next = lyapunov(&dc, &next.x, &next.y, f_next);
                let dxy = num::sub(&dx, &dy);
                let rhs = phi_k
                    - 0.5 * (2.0 * dc.a2 + dc.b2) * num::norm_sq(&dx)
                    - 0.5 * dc.b2 * num::norm_sq(&dy)
                    - 0.5 * dc.b2 * num::norm_sq(&dxy);
                if !(phi_next <= rhs + checks.slack(phi_k)) {
                    return Err(violation("lyapunov", k, phi_next, rhs));
                }
            }
            if checks.energy {
                for (d, e_k) in grid.iter().zip(&energies) {
                    let e_next = energy(&dc, *d, &next.x, &next.y, f_next);
                    if !(e_next <= e_k + checks.slack(*e_k)) {
                        return Err(violation("energy", k, e_next, *e_k));
                    }
                }
            }
        }

        let tol = config.tol.unwrap_or(1e-10 * (1.0 + z_norm));
        if step <= tol {
            trace.termination = Termination::Converged;
            return Ok(trace);
        }
        if k == config.max_iter {
            break;
        }
        let blown = num::norm(&next.x).max(num::norm(&next.y)) > config.norm_ceiling;
        if blown || !f_next.is_finite() || !num::all_finite(&next.x) || !num::all_finite(&next.y) {
            trace.records.push(IterateRecord {
                k: k + 1,
                x: next.x,
                f_x: f_next,
                lambda_k: Some(p.lambda),
                wall_time_s: clock.elapsed_s(),
                ..Default::default()
            });
            trace.termination = Termination::Diverged;
            return Ok(trace);
        }
        state = next;
        f_x = f_next;
    }
    trace.termination = Termination::MaxIter;
    Ok(trace)
}
