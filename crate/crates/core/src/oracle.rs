//! Function oracles and the DC problem model `f = phi + g - h`.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::num;
use crate::prox::ProxSpec;
use crate::{DcError, Result};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A differentiable function with its gradient and optional Lipschitz
/// constants of the gradient.
#[derive(Clone)]
pub struct SmoothOracle {
    value: ScalarField,
    gradient: VectorField,
    /// Global Lipschitz constant of the gradient.
    pub lipschitz_grad: Option<f64>,
    /// `(radius, constant)` pairs: the gradient is `constant`-Lipschitz on the
    /// sup-norm ball of that radius.
    pub lipschitz_grad_local: Vec<(f64, f64)>,
}

impl SmoothOracle {
    pub fn new<V, G>(value: V, gradient: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        SmoothOracle {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            lipschitz_grad: None,
            lipschitz_grad_local: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        SmoothOracle::new(|_| 0.0, |x| alloc::vec![0.0; x.len()]).with_lipschitz(0.0)
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz_grad = Some(l);
        self
    }

    pub fn with_local_lipschitz(mut self, radius: f64, l: f64) -> Self {
        self.lipschitz_grad_local.push((radius, l));
        self
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    /// Lipschitz constant valid on the sup-norm ball of `radius`: the global
    /// constant if declared, else the tightest local one covering the ball.
    pub fn lipschitz_on(&self, radius: f64) -> Option<f64> {
        if let Some(l) = self.lipschitz_grad {
            return Some(l);
        }
        self.lipschitz_grad_local
            .iter()
            .filter(|(r, _)| *r >= radius)
            .map(|(_, l)| *l)
            .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.min(l))))
    }

    /// `||grad(x) - grad(y)|| <= L ||x - y||` with a small rounding allowance.
    pub fn lipschitz_holds(&self, l: f64, x: &[f64], y: &[f64]) -> bool {
        let lhs = num::dist(&self.gradient(x), &self.gradient(y));
        lhs <= l * num::dist(x, y) * (1.0 + 1e-12) + 1e-12
    }
}

impl fmt::Debug for SmoothOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothOracle")
            .field("lipschitz_grad", &self.lipschitz_grad)
            .field("lipschitz_grad_local", &self.lipschitz_grad_local)
            .finish_non_exhaustive()
    }
}

/// A convex function given by its value (possibly `+inf`) and whichever of
/// subgradient, prox and smooth view it supports.
#[derive(Clone)]
pub struct ConvexOracle {
    value: ScalarField,
    subgradient: Option<VectorField>,
    pub prox: Option<ProxSpec>,
    pub smooth: Option<SmoothOracle>,
}

impl ConvexOracle {
    pub fn new<V>(value: V) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ConvexOracle {
            value: Arc::new(value),
            subgradient: None,
            prox: None,
            smooth: None,
        }
    }

    pub fn with_subgradient<S>(mut self, s: S) -> Self
    where
        S: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.subgradient = Some(Arc::new(s));
        self
    }

    pub fn with_prox(mut self, spec: ProxSpec) -> Self {
        self.prox = Some(spec);
        self
    }

    pub fn with_smooth(mut self, smooth: SmoothOracle) -> Self {
        self.smooth = Some(smooth);
        self
    }

    /// Oracle whose value, subgradient selection, smooth view and prox all
    /// come from a catalog prox kind.
    pub fn from_prox(spec: ProxSpec) -> Self {
        let v = spec.clone();
        let s = spec.clone();
        let mut oracle = ConvexOracle::new(move |x| v.value(x)).with_subgradient(move |x| s.subgradient(x));
        oracle.smooth = spec.smooth_view();
        oracle.prox = Some(spec);
        oracle
    }

    pub fn zero() -> Self {
        ConvexOracle::from_prox(ProxSpec::Zero)
    }

    /// `weight * ||x||_2`, with the selection `x / ||x||` away from zero and
    /// `0` at the kink.
    pub fn l2_norm(weight: f64) -> Self {
        ConvexOracle::new(move |x| weight * num::norm(x)).with_subgradient(move |x| {
            let n = num::norm(x);
            if n == 0.0 {
                alloc::vec![0.0; x.len()]
            } else {
                num::scale(weight / n, x)
            }
        })
    }

    /// Convex function known only through its smooth view; the prox falls
    /// back to the numeric solver.
    pub fn smooth_only(smooth: SmoothOracle) -> Self {
        let v = smooth.clone();
        let g = smooth.clone();
        ConvexOracle::new(move |x| v.value(x))
            .with_subgradient(move |x| g.gradient(x))
            .with_smooth(smooth)
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    /// One element of the subdifferential: the declared selection, else the
    /// gradient of the smooth view.
    pub fn subgradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if let Some(s) = &self.subgradient {
            Some(s(x))
        } else {
            self.smooth.as_ref().map(|s| s.gradient(x))
        }
    }

    pub fn has_subgradient(&self) -> bool {
        self.subgradient.is_some() || self.smooth.is_some()
    }

    /// The prox to use: the declared one, or the numeric fallback when only a
    /// smooth view is available.
    pub fn prox_spec(&self) -> Option<ProxSpec> {
        match (&self.prox, &self.smooth) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(s)) => Some(ProxSpec::Numeric {
                smooth: s.clone(),
                opts: Default::default(),
            }),
            (None, None) => None,
        }
    }

    /// Midpoint convexity with slack `1e-10 (1 + |g(x)| + |g(y)|)`.
    pub fn midpoint_convex(&self, x: &[f64], y: &[f64]) -> bool {
        let fx = self.value(x);
        let fy = self.value(y);
        if !fx.is_finite() || !fy.is_finite() {
            return true;
        }
        let mid = num::lincomb(0.5, x, 0.5, y);
        let fm = self.value(&mid);
        fm <= 0.5 * fx + 0.5 * fy + 1e-10 * (1.0 + num::abs(fx) + num::abs(fy))
    }

    /// `g(y) >= g(x) + <s(x), y - x> - 1e-10` for the subgradient selection.
    /// Points outside the domain pass trivially.
    pub fn subgradient_inequality_holds(&self, x: &[f64], y: &[f64]) -> Option<bool> {
        let s = self.subgradient(x)?;
        let fx = self.value(x);
        let fy = self.value(y);
        if !fx.is_finite() || !fy.is_finite() {
            return Some(true);
        }
        let d = num::sub(y, x);
        Some(fy >= fx + num::dot(&s, &d) - 1e-10 * (1.0 + num::abs(fx) + num::abs(fy)))
    }
}

impl fmt::Debug for ConvexOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexOracle")
            .field("subgradient", &self.subgradient.is_some())
            .field("prox", &self.prox)
            .field("smooth", &self.smooth)
            .finish_non_exhaustive()
    }
}

/// `min f(x) = phi(x) + g(x) - h(x)` with metadata about the instance.
#[derive(Clone, Debug)]
pub struct DcProblem {
    pub phi: SmoothOracle,
    pub g: ConvexOracle,
    pub h: ConvexOracle,
    pub dim: usize,
    pub known_fstar: Option<f64>,
    pub known_minimizers: Vec<Vec<f64>>,
    pub known_kl_exponent: Option<f64>,
    pub label: String,
    /// Sup-norm radius of the box on which declared constants hold.
    pub box_radius: f64,
}

impl DcProblem {
    pub fn new(label: impl Into<String>, dim: usize, phi: SmoothOracle, g: ConvexOracle, h: ConvexOracle) -> Self {
        DcProblem {
            phi,
            g,
            h,
            dim,
            known_fstar: None,
            known_minimizers: Vec::new(),
            known_kl_exponent: None,
            label: label.into(),
            box_radius: 1.0,
        }
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(DcError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Lipschitz constant of `grad phi` valid on the problem's box.
    pub fn l1(&self) -> Option<f64> {
        self.phi.lipschitz_on(self.box_radius)
    }

    /// Local Lipschitz constant of `grad g` on the problem's box, if declared.
    pub fn l2(&self) -> Option<f64> {
        self.g.smooth.as_ref().and_then(|s| s.lipschitz_on(self.box_radius))
    }

    /// Algorithm-1 compatibility: `f` differentiable and `g` prox-capable.
    pub fn bppa_compatible(&self) -> core::result::Result<(), &'static str> {
        if self.g.smooth.is_none() {
            return Err("g has no smooth view (f must be differentiable)");
        }
        if self.h.smooth.is_none() {
            return Err("h has no smooth view (f must be differentiable)");
        }
        self.ppa_compatible()
    }

    pub fn ppa_compatible(&self) -> core::result::Result<(), &'static str> {
        if self.g.prox_spec().is_none() {
            return Err("g has no prox capability");
        }
        if !self.h.has_subgradient() {
            return Err("h has neither gradient nor subgradient");
        }
        Ok(())
    }

    pub fn inertial_compatible(&self) -> core::result::Result<(), &'static str> {
        if self.g.prox_spec().is_none() {
            return Err("g has no prox capability");
        }
        if !self.h.has_subgradient() {
            return Err("h has no subgradient selection");
        }
        Ok(())
    }

    /// Compatibility with the smooth-`h` inertial variant.
    pub fn inertial_smooth_compatible(&self) -> core::result::Result<(), &'static str> {
        self.inertial_compatible()?;
        if self.h.smooth.is_none() {
            return Err("h is not differentiable");
        }
        Ok(())
    }

    /// `f(x)` as a plain closure value, `+inf` outside `dom g`.
    pub fn f(&self, x: &[f64]) -> f64 {
        self.phi.value(x) + self.g.value(x) - self.h.value(x)
    }
}

/// `f(x) = phi(x) + g(x) - h(x)`; `+inf` from `g` short-circuits.
pub fn dc_value(problem: &DcProblem, x: &[f64]) -> Result<f64> {
    problem.check_dim(x)?;
    let g = problem.g.value(x);
    if g.is_nan() {
        return Err(DcError::NonFinite("g"));
    }
    if g == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let phi = problem.phi.value(x);
    if !phi.is_finite() {
        return Err(DcError::NonFinite("phi"));
    }
    let h = problem.h.value(x);
    if !h.is_finite() {
        return Err(DcError::NonFinite("h"));
    }
    Ok(phi + g - h)
}

/// `grad phi(x) + grad g(x) - grad h(x)`; needs smooth views of `g` and `h`.
pub fn dc_gradient(problem: &DcProblem, x: &[f64]) -> Result<Vec<f64>> {
    problem.check_dim(x)?;
    let g = problem.g.smooth.as_ref().ok_or(DcError::MissingCapability("smooth view of g"))?;
    let h = problem.h.smooth.as_ref().ok_or(DcError::MissingCapability("smooth view of h"))?;
    let gp = problem.phi.gradient(x);
    let gg = g.gradient(x);
    let gh = h.gradient(x);
    let out: Vec<f64> = gp.iter().zip(&gg).zip(&gh).map(|((a, b), c)| a + b - c).collect();
    if !num::all_finite(&out) {
        return Err(DcError::NonFinite("gradient"));
    }
    Ok(out)
}

/// Default central-difference step `1e-5 (1 + ||x||_inf)`.
pub fn default_fd_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + num::norm_inf(x))
}

/// Central differences `(f(x + s e_i) - f(x - s e_i)) / 2s`.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(DcError::InvalidParameter {
            name: "step",
            reason: "must be positive".into(),
        });
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let fp = f(&probe);
        probe[i] = x[i] - step;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(DcError::NonFinite("finite-difference probe"));
        }
        out.push((fp - fm) / (2.0 * step));
    }
    Ok(out)
}

/// Descent lemma `g(y) <= g(x) + <grad g(x), y - x> + L/2 ||y - x||^2` with
/// slack `1e-12 (1 + |g(x)|)`.
pub fn descent_lemma_check(oracle: &SmoothOracle, l: f64, x: &[f64], y: &[f64]) -> bool {
    let gx = oracle.value(x);
    let gy = oracle.value(y);
    let d = num::sub(y, x);
    let rhs = gx + num::dot(&oracle.gradient(x), &d) + 0.5 * l * num::norm_sq(&d);
    gy <= rhs + 1e-12 * (1.0 + num::abs(gx))
}
