//! Rate machinery for sequences satisfying `t_k^mu <= nu (t_k - t_{k+1})`,
//! empirical rate classification of traces, and Lojasiewicz diagnostics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::oracle::{dc_gradient, dc_value, DcProblem};
use crate::problems::gaussian;
use crate::{num, DcError, Result, Trace};

/// Absolute slack of [`rate_bound_check`].
pub const RATE_SLACK: f64 = 1e-12;
/// Minimum number of tail points for a rate fit.
pub const MIN_TAIL_POINTS: usize = 20;
/// Minimum number of points for an exponent fit.
pub const MIN_KL_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBoundCheck {
    /// `holds[k]` compares `t_k` with `t_{k+1}`.
    pub holds: Vec<bool>,
    pub first_violation: Option<usize>,
}

/// Evaluates `t_k^mu <= nu (t_k - t_{k+1})` for every consecutive pair.
pub fn rate_bound_check(t: &[f64], mu: f64, nu: f64) -> RateBoundCheck {
    let holds: Vec<bool> = t
        .windows(2)
        .map(|w| num::pow(w[0], mu) <= nu * (w[0] - w[1]) + RATE_SLACK)
        .collect();
    let first_violation = holds.iter().position(|h| !h);
    RateBoundCheck { holds, first_violation }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateRegime {
    FiniteTermination,
    Linear,
    Sublinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub bound: f64,
    pub regime: RateRegime,
    /// The linear bound for `mu < 1` applies only from the first index with
    /// `t_k < 1`, restarted there.
    pub requires_t_below_one: bool,
}

/// Upper bound on `t_k` for a sequence satisfying the rate hypothesis with
/// `(mu, nu)` and starting value `t0`.
pub fn rate_predict(mu: f64, nu: f64, t0: f64, k: usize) -> Result<RatePrediction> {
    if !(nu > 0.0) || !(mu >= 0.0) || !(t0 >= 0.0) {
        return Err(DcError::InvalidParameter {
            name: "nu",
            reason: "need nu > 0, mu >= 0 and t0 >= 0".into(),
        });
    }
    let kf = k as f64;
    if mu == 0.0 {
        return Ok(RatePrediction {
            bound: (t0 - kf / nu).max(0.0),
            regime: RateRegime::FiniteTermination,
            requires_t_below_one: false,
        });
    }
    if mu <= 1.0 {
        if nu <= 1.0 {
            return Err(DcError::InvalidParameter {
                name: "nu",
                reason: "rate factor 1 - 1/nu must lie in (0, 1)".into(),
            });
        }
        return Ok(RatePrediction {
            bound: t0 * libm::pow(1.0 - 1.0 / nu, kf),
            regime: RateRegime::Linear,
            requires_t_below_one: mu < 1.0,
        });
    }
    let bound = if t0 == 0.0 {
        0.0
    } else {
        let e = 1.0 - mu;
        libm::pow(libm::pow(t0, e) + (mu - 1.0) / nu * kf, 1.0 / e)
    };
    Ok(RatePrediction {
        bound,
        regime: RateRegime::Sublinear,
        requires_t_below_one: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateClass {
    Finite { step_index: usize },
    Linear { rate: f64 },
    Sublinear { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub classification: RateClass,
    /// Constants of both candidate fits.
    pub fit_constants: BTreeMap<String, f64>,
    /// Root-mean-square log deviation of the chosen fit.
    pub fit_residual: f64,
    pub window: (usize, usize),
    pub fstar: f64,
    pub fstar_estimated: bool,
}

/// Least-squares line `y = a + b x`; returns `(a, b, rms)`.
fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x) * (y - a - b * x)).sum();
    Some((a, b, num::sqrt(sse / n)))
}

fn floor_for(fstar: f64) -> f64 {
    1e-14 * (1.0 + num::abs(fstar))
}

/// Classifies the decay of `f_k - fstar` along a trace.
pub fn classify_rate(trace: &Trace, fstar: f64) -> Result<RateReport> {
    classify_values(&trace.f_values(), fstar)
}

/// Uses `fstar` when given, otherwise the last value minus a rounding guard.
pub fn classify_rate_auto(trace: &Trace, fstar: Option<f64>) -> Result<RateReport> {
    match fstar {
        Some(v) => classify_rate(trace, v),
        None => {
            let f = trace.f_values();
            let last = *f.last().ok_or(DcError::TooFewPoints {
                have: 0,
                need: MIN_TAIL_POINTS,
            })?;
            let mut r = classify_values(&f, last - floor_for(last))?;
            r.fstar_estimated = true;
            Ok(r)
        }
    }
}

/// Values that reach the rounding floor quickly are classified finite.
/// Otherwise only the part above the floor is fitted, on its last half.
pub fn classify_values(f: &[f64], fstar: f64) -> Result<RateReport> {
    if f.iter().any(|v| v.is_nan()) || !fstar.is_finite() {
        return Err(DcError::NonFinite("objective values"));
    }
    let floor = floor_for(fstar);
    let t: Vec<f64> = f.iter().map(|v| v - fstar).collect();
    let prefix = t.iter().position(|v| *v <= floor).unwrap_or(t.len());
    if prefix < t.len() && prefix < MIN_TAIL_POINTS {
        return Ok(RateReport {
            classification: RateClass::Finite { step_index: prefix },
            fit_constants: BTreeMap::new(),
            fit_residual: 0.0,
            window: (prefix, prefix),
            fstar,
            fstar_estimated: false,
        });
    }
    if prefix < MIN_TAIL_POINTS {
        return Err(DcError::TooFewPoints {
            have: prefix,
            need: MIN_TAIL_POINTS,
        });
    }
    let start = (prefix / 2).min(prefix - MIN_TAIL_POINTS).max(1);
    let ks: Vec<f64> = (start..prefix).map(|k| k as f64).collect();
    let logk: Vec<f64> = ks.iter().map(|k| num::ln(*k)).collect();
    let logt: Vec<f64> = t[start..prefix].iter().map(|v| num::ln(*v)).collect();

    let lin = fit_line(&ks, &logt).ok_or(DcError::DegenerateWindow("constant index window"))?;
    let sub = fit_line(&logk, &logt).ok_or(DcError::DegenerateWindow("constant index window"))?;
    let mut consts = BTreeMap::new();
    let rate = num::exp(lin.1);
    consts.insert("rate".into(), rate);
    if rate < 1.0 {
        consts.insert("nu".into(), 1.0 / (1.0 - rate));
    }
    consts.insert("linear_log_intercept".into(), lin.0);
    consts.insert("linear_residual".into(), lin.2);
    consts.insert("exponent".into(), sub.1);
    consts.insert("gamma".into(), num::exp(sub.0));
    consts.insert("sublinear_residual".into(), sub.2);
    if sub.1 < 0.0 {
        consts.insert("kappa_implied".into(), 0.5 * (1.0 - 1.0 / sub.1));
    }

    let lin_ok = lin.1 < 0.0;
    let sub_ok = sub.1 < 0.0;
    let pick_linear = match (lin_ok, sub_ok) {
        (true, true) => lin.2 <= sub.2,
        (true, false) => true,
        (false, true) => false,
        (false, false) => return Err(DcError::DegenerateWindow("values do not decay on the tail")),
    };
    let (classification, fit_residual) = if pick_linear {
        (RateClass::Linear { rate }, lin.2)
    } else {
        (RateClass::Sublinear { exponent: sub.1 }, sub.2)
    };
    Ok(RateReport {
        classification,
        fit_constants: consts,
        fit_residual,
        window: (start, prefix - 1),
        fstar,
        fstar_estimated: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub kappa: f64,
    pub m: f64,
    /// Slope before clamping to `[0, 1)`.
    pub raw_slope: f64,
    pub clamped: bool,
    pub points: usize,
    pub window: (usize, usize),
}

/// Fits `log ||grad f|| = kappa log(f - fstar) - log M` on the tail of the
/// records carrying a positive gradient residual.
pub fn estimate_kl_exponent(trace: &Trace, fstar: f64) -> Result<KlEstimate> {
    let pts: Vec<(usize, f64, f64)> = trace
        .records
        .iter()
        .filter_map(|r| r.grad_residual.map(|g| (r.k, r.f_x - fstar, g)))
        .collect();
    estimate_kl_points(&pts, fstar)
}

/// Same fit on raw `(k, f_k - fstar, ||grad f(x^k)||)` triples.
pub fn estimate_kl_points(pts: &[(usize, f64, f64)], fstar: f64) -> Result<KlEstimate> {
    if pts.is_empty() {
        return Err(DcError::InvalidInput("no gradient residuals recorded".into()));
    }
    let floor = floor_for(fstar);
    let usable: Vec<&(usize, f64, f64)> = pts
        .iter()
        .filter(|(_, t, g)| *t > floor && *g > 0.0 && g.is_finite())
        .collect();
    if usable.is_empty() {
        return Err(DcError::DegenerateWindow("all f_k - fstar below 1e-14"));
    }
    let start = usable.len() / 2;
    let tail = &usable[start.min(usable.len().saturating_sub(MIN_KL_POINTS))..];
    if tail.len() < MIN_KL_POINTS {
        return Err(DcError::TooFewPoints {
            have: tail.len(),
            need: MIN_KL_POINTS,
        });
    }
    let xs: Vec<f64> = tail.iter().map(|p| num::ln(p.1)).collect();
    let ys: Vec<f64> = tail.iter().map(|p| num::ln(p.2)).collect();
    let (a, b, _) = fit_line(&xs, &ys).ok_or(DcError::DegenerateWindow("f values constant on the window"))?;
    let kappa = b.clamp(0.0, 1.0 - f64::EPSILON);
    Ok(KlEstimate {
        kappa,
        m: num::exp(-a),
        raw_slope: b,
        clamped: kappa != b,
        points: tail.len(),
        window: (tail[0].0, tail[tail.len() - 1].0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LojasiewiczCheck {
    pub holds: bool,
    /// `max |f - f*|^kappa / (M ||grad f||)`, infinite at critical samples
    /// with a nonzero left side.
    pub worst_ratio: f64,
    pub witness: Option<Vec<f64>>,
}

/// Samples `n_samples` points uniformly in the ball `B(xstar, eps)` and
/// tests `|f(x) - f(xstar)|^kappa <= M ||grad f(x)||` (with `0^0 = 1`).
pub fn lojasiewicz_check(
    problem: &DcProblem,
    xstar: &[f64],
    kappa: f64,
    m: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<LojasiewiczCheck> {
    problem.check_dim(xstar)?;
    dc_gradient(problem, xstar)?;
    let fstar = dc_value(problem, xstar)?;
    lojasiewicz_check_fn(
        |x| dc_value(problem, x).unwrap_or(f64::NAN),
        |x| dc_gradient(problem, x).map(|g| num::norm(&g)).unwrap_or(f64::NAN),
        xstar,
        fstar,
        kappa,
        m,
        eps,
        n_samples,
        seed,
    )
}

/// [`lojasiewicz_check`] over plain closures for `f` and `||grad f||`.
#[allow(clippy::too_many_arguments)]
pub fn lojasiewicz_check_fn<F, G>(
    f: F,
    grad_norm: G,
    xstar: &[f64],
    fstar: f64,
    kappa: f64,
    m: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<LojasiewiczCheck>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    if !(0.0..1.0).contains(&kappa) {
        return Err(DcError::InvalidParameter {
            name: "kappa",
            reason: "must lie in [0, 1)".into(),
        });
    }
    if !(m > 0.0) || !(eps > 0.0) {
        return Err(DcError::InvalidParameter {
            name: "M",
            reason: "M and eps must be positive".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut witness = None;
    for _ in 0..n_samples {
        let x = sample_ball(&mut rng, xstar, eps);
        let lhs = num::pow(num::abs(f(&x) - fstar), kappa);
        let rhs = m * grad_norm(&x);
        if lhs.is_nan() || rhs.is_nan() {
            return Err(DcError::NonFinite("sampled f or gradient"));
        }
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > worst || witness.is_none() {
            worst = worst.max(ratio);
            witness = Some(x);
        }
    }
    let holds = worst <= 1.0 + 1e-12;
    Ok(LojasiewiczCheck {
        holds,
        worst_ratio: worst,
        witness: if holds { None } else { witness },
    })
}

/// Uniform point in the Euclidean ball: Gaussian direction, radius `eps u^(1/n)`.
fn sample_ball<R: Rng>(rng: &mut R, center: &[f64], eps: f64) -> Vec<f64> {
    let n = center.len();
    let mut dir: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
    let mut len = num::norm(&dir);
    while !(len > 0.0) {
        dir = (0..n).map(|_| gaussian(rng)).collect();
        len = num::norm(&dir);
    }
    let u: f64 = rng.random::<f64>();
    let r = eps * libm::pow(u, 1.0 / n as f64);
    center.iter().zip(&dir).map(|(c, d)| c + r * d / len).collect()
}
