//! Built-in DC test problems with exact decompositions and known facts.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::oracle::{ConvexOracle, DcProblem, SmoothOracle};
use crate::prox::ProxSpec;
use crate::trace::SolverKind;
use crate::{num, DcError, Result};

/// Sup-norm radius of the box on which the quartic constants are declared.
pub const QUARTIC_BOX_RADIUS: f64 = 2.0;

/// Analytic facts about a built-in instance, each with a note on how it is
/// derived so tests can replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFacts {
    pub compat: Vec<SolverKind>,
    pub fstar: Option<f64>,
    pub minimizers: Vec<Vec<f64>>,
    /// Lojasiewicz exponent at the minimizers.
    pub kappa: Option<f64>,
    /// Lojasiewicz constant `M` valid on the ball of radius `kl_radius`.
    pub kl_m: Option<f64>,
    pub kl_radius: Option<f64>,
    pub l1: Option<f64>,
    /// Local Lipschitz constant of `grad g` on the problem box.
    pub l2: Option<f64>,
    pub box_radius: f64,
    pub default_x0: Vec<f64>,
    pub notes: Vec<String>,
}

/// A problem instance addressed by name and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "parameters", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemParams {
    QuarticWell {
        n: usize,
    },
    DegenerateQuartic {
        n: usize,
    },
    L1MinusL2 {
        #[serde(default)]
        a: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        b: Option<Vec<f64>>,
        /// Rows of the random `A` when `a` is absent.
        #[serde(default)]
        m: Option<usize>,
        /// Columns of the random `A` when `a` is absent.
        #[serde(default)]
        n: Option<usize>,
        rho: f64,
        /// Rescale `A` so that `lambda_max(A^T A)` equals this value.
        #[serde(default)]
        lipschitz_target: Option<f64>,
    },
    BoxedIndefiniteQuadratic {
        q: Vec<Vec<f64>>,
        c: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl ProblemParams {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemParams::QuarticWell { .. } => "quartic_well",
            ProblemParams::DegenerateQuartic { .. } => "degenerate_quartic",
            ProblemParams::L1MinusL2 { .. } => "l1_minus_l2",
            ProblemParams::BoxedIndefiniteQuadratic { .. } => "boxed_indefinite_quadratic",
        }
    }
}

/// Names of the built-in factories.
pub const CATALOG: [&str; 4] = [
    "quartic_well",
    "degenerate_quartic",
    "l1_minus_l2",
    "boxed_indefinite_quadratic",
];

/// Builds the named instance; `seed` drives the random data of `l1_minus_l2`.
pub fn build(params: &ProblemParams, seed: u64) -> Result<(DcProblem, ProblemFacts)> {
    match params {
        ProblemParams::QuarticWell { n } => {
            let p = quartic_well(*n)?;
            let f = quartic_well_facts(*n);
            Ok((p, f))
        }
        ProblemParams::DegenerateQuartic { n } => {
            let p = degenerate_quartic(*n)?;
            let f = degenerate_quartic_facts(*n);
            Ok((p, f))
        }
        ProblemParams::L1MinusL2 {
            a,
            b,
            m,
            n,
            rho,
            lipschitz_target,
        } => {
            let (mut a_mat, b_vec) = match (a, b) {
                (Some(a), Some(b)) => (Matrix::from_rows(a)?, b.clone()),
                (Some(a), None) => {
                    let a = Matrix::from_rows(a)?;
                    let rows = a.rows();
                    (a, vec![0.0; rows])
                }
                (None, b) => {
                    let rows = m.or(b.as_ref().map(Vec::len)).unwrap_or(5);
                    let cols = n.unwrap_or(rows);
                    let (a, b_rand) = random_least_squares(rows, cols, seed);
                    (a, b.clone().unwrap_or(b_rand))
                }
            };
            if let Some(target) = lipschitz_target {
                if !(*target > 0.0) {
                    return Err(DcError::InvalidParameter {
                        name: "lipschitz_target",
                        reason: "must be positive".into(),
                    });
                }
                let l = a_mat.gram_lambda_max(1e-14);
                if l == 0.0 {
                    return Err(DcError::InvalidParameter {
                        name: "A",
                        reason: "zero matrix".into(),
                    });
                }
                a_mat = a_mat.scaled(num::sqrt(target / l));
            }
            let p = l1_minus_l2(a_mat, b_vec, *rho)?;
            let facts = ProblemFacts {
                compat: vec![SolverKind::Ppa, SolverKind::Inertial],
                fstar: None,
                minimizers: Vec::new(),
                kappa: None,
                kl_m: None,
                kl_radius: None,
                l1: p.l1(),
                l2: None,
                box_radius: p.box_radius,
                default_x0: vec![1.0; p.dim],
                notes: vec!["L1 = lambda_max(A^T A) by power iteration".into()],
            };
            Ok((p, facts))
        }
        ProblemParams::BoxedIndefiniteQuadratic { q, c, lo, hi } => {
            let q = Matrix::from_rows(q)?;
            let p = boxed_indefinite_quadratic(q.clone(), c.clone(), lo.clone(), hi.clone())?;
            let x0 = lo.iter().zip(hi).map(|(l, h)| 1.0f64.max(*l).min(*h)).collect();
            let facts = ProblemFacts {
                compat: vec![SolverKind::Ppa, SolverKind::Inertial],
                fstar: p.known_fstar,
                minimizers: p.known_minimizers.clone(),
                kappa: None,
                kl_m: None,
                kl_radius: None,
                l1: p.l1(),
                l2: None,
                box_radius: p.box_radius,
                default_x0: x0,
                notes: vec!["f* by per-coordinate enumeration when Q is diagonal".into()],
            };
            Ok((p, facts))
        }
    }
}

fn require_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(DcError::InvalidParameter {
            name: "n",
            reason: "dimension must be at least 1".into(),
        });
    }
    Ok(())
}

/// `g = sum x_i^4` with its local gradient Lipschitz constant `12 R^2` on
/// the box of radius `R`.
fn quartic_term() -> Result<ConvexOracle> {
    let spec = ProxSpec::separable_power(1.0, 4.0)?;
    let mut g = ConvexOracle::from_prox(spec);
    let r = QUARTIC_BOX_RADIUS;
    g.smooth = g.smooth.map(|s| s.with_local_lipschitz(r, 12.0 * r * r));
    Ok(g)
}

/// `f(x) = sum_i (x_i^4 - x_i^2)`: `phi = 0`, `g = sum x^4`, `h = ||x||^2`.
pub fn quartic_well(n: usize) -> Result<DcProblem> {
    require_dim(n)?;
    let h = ConvexOracle::from_prox(ProxSpec::l2_squared(1.0)?);
    let mut p = DcProblem::new("quartic_well", n, SmoothOracle::zero(), quartic_term()?, h);
    p.known_fstar = Some(-(n as f64) / 4.0);
    p.known_kl_exponent = Some(0.5);
    p.box_radius = QUARTIC_BOX_RADIUS;
    if n <= 10 {
        let r = 1.0 / num::sqrt(2.0);
        p.known_minimizers = (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { -r } else { r }).collect())
            .collect();
    }
    Ok(p)
}

pub fn quartic_well_facts(n: usize) -> ProblemFacts {
    let r = QUARTIC_BOX_RADIUS;
    let inv = 1.0 / num::sqrt(2.0);
    ProblemFacts {
        compat: vec![SolverKind::Bppa, SolverKind::Ppa, SolverKind::Inertial],
        fstar: Some(-(n as f64) / 4.0),
        minimizers: if n <= 10 {
            quartic_well(n).map(|p| p.known_minimizers).unwrap_or_default()
        } else {
            Vec::new()
        },
        kappa: Some(0.5),
        kl_m: Some(0.5),
        kl_radius: Some(0.2),
        l1: Some(0.0),
        l2: Some(12.0 * r * r),
        box_radius: r,
        default_x0: vec![1.0; n],
        notes: vec![
            "stationary points of x^4 - x^2 are 0 and +-1/sqrt(2); f(+-1/sqrt(2)) = -1/4 per coordinate".into(),
            alloc::format!(
                "f - f* = sum (x_i^2 - 1/2)^2 and |grad_i f| = 4 |x_i| |x_i^2 - 1/2|, so the ratio is at most 1/(4 M min|x_i|) <= 1 on the ball of radius 0.2 around {inv:.6}"
            ),
            "grad g = 4x^3 has Hessian 12 x^2 <= 12 R^2 on the box of radius R".into(),
        ],
    }
}

/// `f(x) = sum_i x_i^4`: `phi = 0`, `g = sum x^4`, `h = 0`.
pub fn degenerate_quartic(n: usize) -> Result<DcProblem> {
    require_dim(n)?;
    let mut p = DcProblem::new(
        "degenerate_quartic",
        n,
        SmoothOracle::zero(),
        quartic_term()?,
        ConvexOracle::zero(),
    );
    p.known_fstar = Some(0.0);
    p.known_kl_exponent = Some(0.75);
    p.known_minimizers = vec![vec![0.0; n]];
    p.box_radius = QUARTIC_BOX_RADIUS;
    Ok(p)
}

pub fn degenerate_quartic_facts(n: usize) -> ProblemFacts {
    let r = QUARTIC_BOX_RADIUS;
    ProblemFacts {
        compat: vec![SolverKind::Bppa, SolverKind::Ppa, SolverKind::Inertial],
        fstar: Some(0.0),
        minimizers: vec![vec![0.0; n]],
        kappa: Some(0.75),
        kl_m: Some(num::pow(n as f64, 0.25) / 4.0),
        kl_radius: Some(1.0),
        l1: Some(0.0),
        l2: Some(12.0 * r * r),
        box_radius: r,
        default_x0: vec![1.0; n],
        notes: vec![
            "|f|^(3/4) = ||x||_4^3 <= n^(1/12) ||x||_6^3 = n^(1/12) ||grad f|| / 4, so M = n^(1/4)/4 suffices".into(),
            "predicted f_k = O(k^-2) from exponent -1/(2 kappa - 1) with kappa = 3/4".into(),
        ],
    }
}

/// `phi = ||A x - b||^2 / 2`, `g = rho ||x||_1`, `h = rho ||x||_2`.
pub fn l1_minus_l2(a: Matrix, b: Vec<f64>, rho: f64) -> Result<DcProblem> {
    if !(rho > 0.0) {
        return Err(DcError::InvalidParameter {
            name: "rho",
            reason: "must be positive".into(),
        });
    }
    if a.is_zero() {
        return Err(DcError::InvalidParameter {
            name: "A",
            reason: "zero matrix".into(),
        });
    }
    if b.len() != a.rows() {
        return Err(DcError::DimensionMismatch {
            expected: a.rows(),
            got: b.len(),
        });
    }
    let l1 = a.gram_lambda_max(1e-10);
    let n = a.cols();
    let (a1, b1, a2, b2) = (a.clone(), b.clone(), a, b);
    let phi = SmoothOracle::new(
        move |x| 0.5 * num::norm_sq(&num::sub(&a1.matvec(x), &b1)),
        move |x| a2.tmatvec(&num::sub(&a2.matvec(x), &b2)),
    )
    .with_lipschitz(l1);
    let g = ConvexOracle::from_prox(ProxSpec::l1(rho)?);
    let h = ConvexOracle::l2_norm(rho);
    let mut p = DcProblem::new("l1_minus_l2", n, phi, g, h);
    p.box_radius = 10.0;
    Ok(p)
}

/// Gaussian `A` (entries scaled by `1/sqrt(m)`) and `b` from a seeded stream.
pub fn random_least_squares(m: usize, n: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / num::sqrt(m.max(1) as f64);
    let data: Vec<f64> = (0..m * n).map(|_| scale * gaussian(&mut rng)).collect();
    let b: Vec<f64> = (0..m).map(|_| gaussian(&mut rng)).collect();
    (
        Matrix::from_row_major(m, n, data).expect("sizes agree by construction"),
        b,
    )
}

/// Standard normal sample by the Box-Muller transform.
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    num::sqrt(-2.0 * num::ln(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// `phi = x^T Q x / 2 + c^T x` (Q symmetric, possibly indefinite),
/// `g` = indicator of `[lo, hi]`, `h = 0`.
pub fn boxed_indefinite_quadratic(q: Matrix, c: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Result<DcProblem> {
    let n = c.len();
    if q.rows() != n || q.cols() != n {
        return Err(DcError::DimensionMismatch {
            expected: n,
            got: q.rows(),
        });
    }
    if !q.is_symmetric(1e-12 * (1.0 + q.max_abs())) {
        return Err(DcError::InvalidParameter {
            name: "Q",
            reason: "must be symmetric".into(),
        });
    }
    let g_spec = ProxSpec::box_indicator(lo.clone(), hi.clone())?;
    if g_spec_dim(&g_spec) != n {
        return Err(DcError::DimensionMismatch {
            expected: n,
            got: lo.len(),
        });
    }
    let l1 = q.spectral_norm(1e-10);
    let (q1, c1, q2, c2) = (q.clone(), c.clone(), q.clone(), c.clone());
    let phi = SmoothOracle::new(
        move |x| 0.5 * num::dot(x, &q1.matvec(x)) + num::dot(&c1, x),
        move |x| num::add(&q2.matvec(x), &c2),
    )
    .with_lipschitz(l1);
    let g = ConvexOracle::from_prox(g_spec);
    let mut p = DcProblem::new("boxed_indefinite_quadratic", n, phi, g, ConvexOracle::zero());
    p.box_radius = lo.iter().chain(&hi).fold(0.0, |m: f64, v| m.max(num::abs(*v)));
    if let Some(d) = q.diagonal_entries() {
        let (fstar, mins) = separable_box_minimum(&d, &c, &lo, &hi);
        p.known_fstar = Some(fstar);
        p.known_minimizers = mins;
    }
    Ok(p)
}

fn g_spec_dim(spec: &ProxSpec) -> usize {
    match spec {
        ProxSpec::BoxIndicator { lo, .. } => lo.len(),
        _ => 0,
    }
}

/// Exact minimum of `sum_i q_i x_i^2 / 2 + c_i x_i` over a box, by
/// enumerating the per-coordinate candidates (endpoints and the interior
/// critical point when `q_i > 0`).
fn separable_box_minimum(q: &[f64], c: &[f64], lo: &[f64], hi: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let mut total = 0.0;
    let mut per_coord: Vec<Vec<f64>> = Vec::new();
    for i in 0..q.len() {
        let val = |x: f64| 0.5 * q[i] * x * x + c[i] * x;
        let mut cands = vec![lo[i], hi[i]];
        if q[i] > 0.0 {
            let crit = -c[i] / q[i];
            if crit > lo[i] && crit < hi[i] {
                cands.push(crit);
            }
        }
        let best = cands.iter().map(|x| val(*x)).fold(f64::INFINITY, f64::min);
        let mut args: Vec<f64> = cands.into_iter().filter(|x| val(*x) == best).collect();
        args.dedup();
        total += best;
        per_coord.push(args);
    }
    let mut mins: Vec<Vec<f64>> = vec![Vec::new()];
    for args in &per_coord {
        if mins.len() * args.len() > 1024 {
            return (total, Vec::new());
        }
        mins = mins
            .iter()
            .flat_map(|prefix| {
                args.iter().map(move |a| {
                    let mut v = prefix.clone();
                    v.push(*a);
                    v
                })
            })
            .collect();
    }
    (total, mins)
}
