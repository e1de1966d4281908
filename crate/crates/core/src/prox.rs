//! Proximal operators `prox_{t g}(v) = argmin_y g(y) + ||y - v||^2 / (2t)`.
//!
//! Closed forms for the catalog kinds, safeguarded Newton for separable scalar
//! functions and gradient descent for any other smooth convex `g`.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::num;
use crate::oracle::{DcProblem, SmoothOracle};
use crate::{DcError, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex `psi: R -> R`, twice differentiable, applied coordinatewise as
/// `g(x) = sum_i psi(x_i)`.
#[derive(Clone)]
pub struct ScalarConvex {
    pub name: String,
    pub value: ScalarFn,
    pub deriv: ScalarFn,
    pub second: ScalarFn,
}

impl ScalarConvex {
    /// `coef * |x|^p` for `p >= 2`.
    pub fn power(coef: f64, p: f64) -> Result<Self> {
        if !(p >= 2.0) || !(coef >= 0.0) {
            return Err(DcError::InvalidParameter {
                name: "power",
                reason: alloc::format!("need p >= 2 and coef >= 0, got p={p}, coef={coef}"),
            });
        }
        Ok(ScalarConvex {
            name: alloc::format!("{coef}*|x|^{p}"),
            value: Arc::new(move |x| coef * num::pow(num::abs(x), p)),
            deriv: Arc::new(move |x| {
                let m = coef * p * num::pow(num::abs(x), p - 1.0);
                if x < 0.0 {
                    -m
                } else {
                    m
                }
            }),
            second: Arc::new(move |x| coef * p * (p - 1.0) * num::pow(num::abs(x), p - 2.0)),
        })
    }
}

impl fmt::Debug for ScalarConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarConvex").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericProxOptions {
    /// Absolute gradient-norm tolerance; `None` means `1e-10 (1 + ||v||)`.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl Default for NumericProxOptions {
    fn default() -> Self {
        NumericProxOptions {
            tol: None,
            max_iter: 10_000,
        }
    }
}

/// A convex function together with the way its prox is computed.
#[derive(Clone, Debug)]
pub enum ProxSpec {
    Zero,
    /// `weight * ||x||_1`
    L1 { weight: f64 },
    /// `weight * ||x||^2`
    L2Squared { weight: f64 },
    /// Indicator of `[lo, hi]`.
    BoxIndicator { lo: Vec<f64>, hi: Vec<f64> },
    /// Indicator of the centered Euclidean ball.
    BallIndicator { radius: f64 },
    /// `x^T Q x / 2 + c^T x` with `Q` symmetric positive semidefinite.
    Quadratic { q: Matrix, c: Vec<f64> },
    SeparableScalar(ScalarConvex),
    Numeric { smooth: SmoothOracle, opts: NumericProxOptions },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub y: Vec<f64>,
    pub residual: f64,
    pub inner_iterations: usize,
}

impl ProxSpec {
    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(DcError::InvalidParameter {
                name: "l1.weight",
                reason: "must be nonnegative".into(),
            });
        }
        Ok(ProxSpec::L1 { weight })
    }

    pub fn l2_squared(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) {
            return Err(DcError::InvalidParameter {
                name: "l2_squared.weight",
                reason: "must be nonnegative".into(),
            });
        }
        Ok(ProxSpec::L2Squared { weight })
    }

    pub fn box_indicator(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(DcError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(DcError::EmptyFeasibleSet("box requires lo <= hi"));
        }
        Ok(ProxSpec::BoxIndicator { lo, hi })
    }

    pub fn ball_indicator(radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(DcError::EmptyFeasibleSet("ball requires radius >= 0"));
        }
        Ok(ProxSpec::BallIndicator { radius })
    }

    pub fn quadratic(q: Matrix, c: Vec<f64>) -> Result<Self> {
        if q.rows() != q.cols() || q.rows() != c.len() {
            return Err(DcError::DimensionMismatch {
                expected: q.rows(),
                got: c.len(),
            });
        }
        if !q.is_psd() {
            return Err(DcError::InvalidParameter {
                name: "quadratic.Q",
                reason: "must be symmetric positive semidefinite".into(),
            });
        }
        Ok(ProxSpec::Quadratic { q, c })
    }

    pub fn separable_power(coef: f64, p: f64) -> Result<Self> {
        Ok(ProxSpec::SeparableScalar(ScalarConvex::power(coef, p)?))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProxSpec::Zero => "zero",
            ProxSpec::L1 { .. } => "l1",
            ProxSpec::L2Squared { .. } => "l2_squared",
            ProxSpec::BoxIndicator { .. } => "box_indicator",
            ProxSpec::BallIndicator { .. } => "ball_indicator",
            ProxSpec::Quadratic { .. } => "quadratic",
            ProxSpec::SeparableScalar(_) => "separable_scalar",
            ProxSpec::Numeric { .. } => "numeric",
        }
    }

    /// Function value, `+inf` outside the domain of indicators.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ProxSpec::Zero => 0.0,
            ProxSpec::L1 { weight } => weight * x.iter().map(|v| num::abs(*v)).sum::<f64>(),
            ProxSpec::L2Squared { weight } => weight * num::norm_sq(x),
            ProxSpec::BoxIndicator { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxSpec::BallIndicator { radius } => {
                if num::norm(x) <= *radius * (1.0 + 1e-12) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxSpec::Quadratic { q, c } => 0.5 * num::dot(x, &q.matvec(x)) + num::dot(c, x),
            ProxSpec::SeparableScalar(s) => x.iter().map(|v| (s.value)(*v)).sum(),
            ProxSpec::Numeric { smooth, .. } => smooth.value(x),
        }
    }

    /// Deterministic subgradient selection: `sign(x)` with `0` at zero for
    /// `l1`, `0` (always in the normal cone) for indicators.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ProxSpec::Zero | ProxSpec::BoxIndicator { .. } | ProxSpec::BallIndicator { .. } => {
                alloc::vec![0.0; x.len()]
            }
            ProxSpec::L1 { weight } => x
                .iter()
                .map(|v| {
                    if *v > 0.0 {
                        *weight
                    } else if *v < 0.0 {
                        -weight
                    } else {
                        0.0
                    }
                })
                .collect(),
            ProxSpec::L2Squared { weight } => num::scale(2.0 * weight, x),
            ProxSpec::Quadratic { q, c } => num::add(&q.matvec(x), c),
            ProxSpec::SeparableScalar(s) => x.iter().map(|v| (s.deriv)(*v)).collect(),
            ProxSpec::Numeric { smooth, .. } => smooth.gradient(x),
        }
    }

    /// Smooth view for the differentiable kinds.
    pub fn smooth_view(&self) -> Option<SmoothOracle> {
        match self {
            ProxSpec::Zero => Some(SmoothOracle::zero()),
            ProxSpec::L2Squared { weight } => {
                let w = *weight;
                Some(
                    SmoothOracle::new(move |x| w * num::norm_sq(x), move |x| num::scale(2.0 * w, x))
                        .with_lipschitz(2.0 * w),
                )
            }
            ProxSpec::Quadratic { q, c } => {
                let l = q.spectral_norm(1e-12);
                let (q1, c1, q2, c2) = (q.clone(), c.clone(), q.clone(), c.clone());
                Some(
                    SmoothOracle::new(
                        move |x| 0.5 * num::dot(x, &q1.matvec(x)) + num::dot(&c1, x),
                        move |x| num::add(&q2.matvec(x), &c2),
                    )
                    .with_lipschitz(l),
                )
            }
            ProxSpec::SeparableScalar(s) => {
                let (a, b) = (s.clone(), s.clone());
                Some(SmoothOracle::new(
                    move |x| x.iter().map(|v| (a.value)(*v)).sum(),
                    move |x| x.iter().map(|v| (b.deriv)(*v)).collect(),
                ))
            }
            ProxSpec::Numeric { smooth, .. } => Some(smooth.clone()),
            ProxSpec::L1 { .. } | ProxSpec::BoxIndicator { .. } | ProxSpec::BallIndicator { .. } => None,
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        let expected = match self {
            ProxSpec::BoxIndicator { lo, .. } => lo.len(),
            ProxSpec::Quadratic { c, .. } => c.len(),
            _ => return Ok(()),
        };
        if expected != n {
            return Err(DcError::DimensionMismatch { expected, got: n });
        }
        Ok(())
    }

    /// `argmin_y g(y) + ||y - v||^2 / (2t)`.
    pub fn prox(&self, t: f64, v: &[f64]) -> Result<ProxResult> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(DcError::InvalidParameter {
                name: "t",
                reason: alloc::format!("prox step must be positive and finite, got {t}"),
            });
        }
        self.check_dim(v.len())?;
        let (y, inner, residual) = match self {
            ProxSpec::Zero => (v.to_vec(), 0, None),
            ProxSpec::L1 { weight } => {
                let thr = t * weight;
                let y = v
                    .iter()
                    .map(|x| {
                        let m = num::abs(*x) - thr;
                        if m <= 0.0 {
                            0.0
                        } else if *x > 0.0 {
                            m
                        } else {
                            -m
                        }
                    })
                    .collect();
                (y, 0, None)
            }
            ProxSpec::L2Squared { weight } => (num::scale(1.0 / (1.0 + 2.0 * t * weight), v), 0, None),
            ProxSpec::BoxIndicator { lo, hi } => {
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(DcError::EmptyFeasibleSet("box requires lo <= hi"));
                }
                let y = v
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(x, (l, h))| x.max(*l).min(*h))
                    .collect();
                (y, 0, None)
            }
            ProxSpec::BallIndicator { radius } => {
                if !(*radius >= 0.0) {
                    return Err(DcError::EmptyFeasibleSet("ball requires radius >= 0"));
                }
                let n = num::norm(v);
                let y = if n <= *radius { v.to_vec() } else { num::scale(radius / n, v) };
                (y, 0, None)
            }
            ProxSpec::Quadratic { q, c } => {
                let n = c.len();
                let m = Matrix::from_row_major(
                    n,
                    n,
                    (0..n * n)
                        .map(|k| t * q.get(k / n, k % n) + if k / n == k % n { 1.0 } else { 0.0 })
                        .collect(),
                )?;
                let chol = m.cholesky_shifted(0.0).ok_or(DcError::InvalidParameter {
                    name: "quadratic.Q",
                    reason: "I + tQ is not positive definite".into(),
                })?;
                let rhs = num::axpy(v, -t, c);
                (chol.solve(&rhs), 0, None)
            }
            ProxSpec::SeparableScalar(s) => {
                let (y, it, res) = separable_prox(s, t, v)?;
                (y, it, Some(res))
            }
            ProxSpec::Numeric { smooth, opts } => {
                let r = numeric_prox(smooth, t, v, opts)?;
                return Ok(r);
            }
        };
        let residual = match residual {
            Some(r) => r,
            None => self.optimality_residual(t, v, &y)?,
        };
        Ok(ProxResult {
            y,
            residual,
            inner_iterations: inner,
        })
    }

    /// `min_{s in dg(y)} ||s + (y - v)/t||` over the representable
    /// subgradients; `+inf` if `y` is outside the domain.
    pub fn optimality_residual(&self, t: f64, v: &[f64], y: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(DcError::InvalidParameter {
                name: "t",
                reason: "must be positive".into(),
            });
        }
        if v.len() != y.len() {
            return Err(DcError::DimensionMismatch {
                expected: v.len(),
                got: y.len(),
            });
        }
        self.check_dim(y.len())?;
        let r: Vec<f64> = y.iter().zip(v).map(|(a, b)| (a - b) / t).collect();
        let out = match self {
            ProxSpec::Zero => num::norm(&r),
            ProxSpec::L1 { weight } => {
                let w = *weight;
                num::sqrt(
                    y.iter()
                        .zip(&r)
                        .map(|(yi, ri)| {
                            let e = if *yi > 0.0 {
                                num::abs(w + ri)
                            } else if *yi < 0.0 {
                                num::abs(ri - w)
                            } else {
                                (num::abs(*ri) - w).max(0.0)
                            };
                            e * e
                        })
                        .sum(),
                )
            }
            ProxSpec::L2Squared { weight } => num::norm(&num::axpy(&r, 2.0 * weight, y)),
            ProxSpec::BoxIndicator { lo, hi } => {
                let mut acc = 0.0;
                for ((yi, ri), (l, h)) in y.iter().zip(&r).zip(lo.iter().zip(hi)) {
                    if yi < l || yi > h {
                        return Ok(f64::INFINITY);
                    }
                    let e = if l == h {
                        0.0
                    } else if yi == l {
                        (-ri).max(0.0)
                    } else if yi == h {
                        ri.max(0.0)
                    } else {
                        num::abs(*ri)
                    };
                    acc += e * e;
                }
                num::sqrt(acc)
            }
            ProxSpec::BallIndicator { radius } => {
                let ny = num::norm(y);
                if ny > radius * (1.0 + 1e-12) {
                    return Ok(f64::INFINITY);
                }
                if *radius == 0.0 {
                    0.0
                } else if ny >= radius * (1.0 - 1e-12) {
                    let c = (-num::dot(&r, y) / (ny * ny)).max(0.0);
                    num::norm(&num::axpy(&r, c, y))
                } else {
                    num::norm(&r)
                }
            }
            ProxSpec::Quadratic { q, c } => {
                let s = num::add(&q.matvec(y), c);
                num::norm(&num::add(&s, &r))
            }
            ProxSpec::SeparableScalar(s) => {
                num::sqrt(y.iter().zip(&r).map(|(yi, ri)| {
                    let e = (s.deriv)(*yi) + ri;
                    e * e
                }).sum())
            }
            ProxSpec::Numeric { smooth, .. } => num::norm(&num::add(&smooth.gradient(y), &r)),
        };
        Ok(out)
    }
}

/// Free-function form of [`ProxSpec::prox`].
pub fn prox(spec: &ProxSpec, t: f64, v: &[f64]) -> Result<ProxResult> {
    spec.prox(t, v)
}

/// Free-function form of [`ProxSpec::optimality_residual`].
pub fn prox_optimality_residual(spec: &ProxSpec, t: f64, v: &[f64], y: &[f64]) -> Result<f64> {
    spec.optimality_residual(t, v, y)
}

/// Per-coordinate root of `psi'(y) + (y - v)/t = 0` by Newton's method
/// safeguarded with bisection.
///
/// `F(y) = psi'(y) + (y - v)/t` is strictly increasing and `F(v) = psi'(v)`,
/// `F(v - t psi'(v)) = psi'(v - t psi'(v)) - psi'(v)` has the opposite sign,
/// so the root is bracketed by `v` and `v - t psi'(v)`.
fn separable_prox(s: &ScalarConvex, t: f64, v: &[f64]) -> Result<(Vec<f64>, usize, f64)> {
    const MAX_ITER: usize = 200;
    let mut y = Vec::with_capacity(v.len());
    let mut total = 0;
    let mut res_sq = 0.0;
    for &vi in v {
        let f = |z: f64| (s.deriv)(z) + (z - vi) / t;
        let dv = (s.deriv)(vi);
        if !dv.is_finite() {
            return Err(DcError::NonFinite("separable prox derivative"));
        }
        if dv == 0.0 {
            y.push(vi);
            continue;
        }
        let other = vi - t * dv;
        let (mut lo, mut hi) = if other < vi { (other, vi) } else { (vi, other) };
        let mut z = 0.5 * (lo + hi);
        let mut converged = false;
        for it in 0..MAX_ITER {
            total += 1;
            let fz = f(z);
            if fz == 0.0 {
                converged = true;
                break;
            }
            if fz > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            let dz = (s.second)(z) + 1.0 / t;
            let newton = z - fz / dz;
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            let tiny = 4.0 * f64::EPSILON * num::abs(next).max(f64::MIN_POSITIVE);
            if num::abs(next - z) <= tiny || hi - lo <= tiny {
                z = next;
                converged = true;
                break;
            }
            z = next;
            if it + 1 == MAX_ITER {
                break;
            }
        }
        if !converged {
            return Err(DcError::InnerSolverFailed {
                iterations: MAX_ITER,
                residual: num::abs(f(z)),
            });
        }
        let e = f(z);
        res_sq += e * e;
        y.push(z);
    }
    Ok((y, total, num::sqrt(res_sq)))
}

/// Gradient descent on the `1/t`-strongly convex `g(y) + ||y - v||^2/(2t)`
/// with step `t / (1 + t L_g)`, or backtracking on the gradient norm when `g`
/// has no declared gradient Lipschitz constant.
pub fn numeric_prox(smooth: &SmoothOracle, t: f64, v: &[f64], opts: &NumericProxOptions) -> Result<ProxResult> {
    if !(t > 0.0) {
        return Err(DcError::InvalidParameter {
            name: "t",
            reason: "must be positive".into(),
        });
    }
    let tol = opts.tol.unwrap_or(1e-10 * (1.0 + num::norm(v)));
    let grad = |y: &[f64]| num::add(&smooth.gradient(y), &num::scale(1.0 / t, &num::sub(y, v)));
    let fixed_step = smooth.lipschitz_grad.map(|l| t / (1.0 + t * l));
    let mut y = v.to_vec();
    let mut step = t;
    for it in 0..=opts.max_iter {
        let gr = grad(&y);
        let gn = num::norm(&gr);
        if !gn.is_finite() {
            return Err(DcError::NonFinite("numeric prox gradient"));
        }
        if gn <= tol {
            return Ok(ProxResult {
                y,
                residual: gn,
                inner_iterations: it,
            });
        }
        if it == opts.max_iter {
            return Err(DcError::InnerSolverFailed {
                iterations: it,
                residual: gn,
            });
        }
        y = match fixed_step {
            Some(s) => num::axpy(&y, -s, &gr),
            None => {
                // With step <= 1/L the gradient of the 1/t-strongly convex
                // objective contracts by 1 - step/t, so backtrack on that.
                step = (2.0 * step).min(t);
                loop {
                    let cand = num::axpy(&y, -step, &gr);
                    if num::norm(&grad(&cand)) <= (1.0 - 0.5 * step / t) * gn || step < 1e-300 {
                        break cand;
                    }
                    step *= 0.5;
                }
            }
        };
    }
    unreachable!("loop returns on its last iteration")
}

/// Center of the proximal step that solves
/// `min_y g(y) - <grad h(x) - grad phi(x), y - x> + lambda/2 ||y - x||^2`:
/// the linear term folds into `v = x + (grad h(x) - grad phi(x)) / lambda`.
pub fn subproblem_center(problem: &DcProblem, x: &[f64], lambda_k: f64) -> Result<Vec<f64>> {
    let gh = problem
        .h
        .subgradient(x)
        .ok_or(DcError::MissingCapability("gradient or subgradient of h"))?;
    let gp = problem.phi.gradient(x);
    let shift: Vec<f64> = gh.iter().zip(&gp).map(|(a, b)| a - b).collect();
    let v = num::axpy(x, 1.0 / lambda_k, &shift);
    if !num::all_finite(&v) {
        return Err(DcError::NonFinite("subproblem center"));
    }
    Ok(v)
}

/// Solves the strongly convex proximal subproblem at `x` with parameter
/// `lambda_k` by a single prox of `g` with step `1/lambda_k`.
pub fn subproblem_solve(problem: &DcProblem, x: &[f64], lambda_k: f64) -> Result<ProxResult> {
    if !(lambda_k > 0.0) {
        return Err(DcError::InvalidParameter {
            name: "lambda_k",
            reason: "must be positive".into(),
        });
    }
    problem.check_dim(x)?;
    let spec = problem.g.prox_spec().ok_or(DcError::MissingCapability("prox of g"))?;
    let v = subproblem_center(problem, x, lambda_k)?;
    spec.prox(1.0 / lambda_k, &v)
}

/// Objective of the proximal subproblem at `y`.
pub fn subproblem_objective(problem: &DcProblem, x: &[f64], lambda_k: f64, y: &[f64]) -> f64 {
    let gh = problem.h.subgradient(x).unwrap_or_else(|| alloc::vec![0.0; x.len()]);
    let gp = problem.phi.gradient(x);
    let d = num::sub(y, x);
    let lin: f64 = gh.iter().zip(&gp).zip(&d).map(|((a, b), di)| (a - b) * di).sum();
    problem.g.value(y) - lin + 0.5 * lambda_k * num::norm_sq(&d)
}
