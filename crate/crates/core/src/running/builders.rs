//! Per-instance operators `T_k` for each algorithm, with their averagedness
//! constant, contraction factor and image bound.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ConvexFunction, ConvexSet};
use crate::linalg::singular_values;
use crate::operators::{map, AveragedOperator, Vector};
use crate::problems::{AdmmCoupling, LinearConstraint, ProblemInstance};

fn nan(n: usize) -> Vector {
    Vector::from_element(n, f64::NAN)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("step size must be positive and finite, got {lambda}")))
    }
}

fn bounded(op: AveragedOperator, set: &ConvexSet) -> Result<AveragedOperator> {
    match set.norm_bound() {
        Some(b) => op.with_image_bound(b),
        None => Ok(op),
    }
}

fn contracting(op: AveragedOperator, factor: Option<f64>) -> Result<AveragedOperator> {
    match factor {
        Some(l) if l < 1.0 => op.with_contraction(l.max(0.0)),
        _ => Ok(op),
    }
}

/// `Π_C` as a 1/2-averaged operator whose image is bounded when `C` is.
pub fn projection_operator(set: &ConvexSet) -> Result<AveragedOperator> {
    let s = set.clone();
    let n = set.dim();
    let op = AveragedOperator::new(n, 0.5, map(move |x: &Vector| s.project(x).unwrap_or_else(|_| nan(n))))?;
    bounded(op, set)
}

/// Lipschitz constant of `I − λ∇f` for `m`-strongly convex, `M`-smooth `f`.
pub fn gradient_step_factor(lambda: f64, m: f64, big_m: f64) -> Option<f64> {
    (m > 0.0).then(|| (1.0 - lambda * m).abs().max((1.0 - lambda * big_m).abs()))
}

/// Largest admissible gradient step `2/M` (infinite for `M = 0`).
pub fn gradient_step_limit(big_m: f64) -> f64 {
    if big_m > 0.0 {
        2.0 / big_m
    } else {
        f64::INFINITY
    }
}

fn smooth_constant(f: &ConvexFunction, what: &str) -> Result<f64> {
    f.smoothness()
        .ok_or_else(|| Error::unsupported(format!("{what} needs a smooth f (M < ∞)")))
}

fn check_gradient_step(lambda: f64, big_m: f64) -> Result<()> {
    check_lambda(lambda)?;
    if lambda >= gradient_step_limit(big_m) {
        return Err(Error::param(format!("step {lambda} is not below 2/M = {}", 2.0 / big_m)));
    }
    Ok(())
}

/// `x ↦ Π_X(x − λ∇f(x))`
pub fn projected_gradient_operator(inst: &ProblemInstance, lambda: f64) -> Result<AveragedOperator> {
    let big_m = smooth_constant(&inst.f, "projected gradient")?;
    check_gradient_step(lambda, big_m)?;
    let n = inst.dim();
    let (f, set) = (inst.f.clone(), inst.feasible_set.clone());
    let eval = map(move |x: &Vector| {
        f.gradient(x)
            .and_then(|g| set.project(&(x - g * lambda)))
            .unwrap_or_else(|_| nan(n))
    });
    let op = AveragedOperator::new(n, 1.0 / (2.0 - lambda * big_m / 2.0), eval)?;
    let op = contracting(op, gradient_step_factor(lambda, inst.f.strong_convexity(), big_m))?;
    bounded(op, &inst.feasible_set)
}

/// `x ↦ prox_{λf, X}(x)`
pub fn proximal_point_operator(inst: &ProblemInstance, lambda: f64) -> Result<AveragedOperator> {
    check_lambda(lambda)?;
    let n = inst.dim();
    let (f, set) = (inst.f.clone(), inst.feasible_set.clone());
    f.prox(lambda, &Vector::zeros(n), &set)?;
    let eval = map(move |x: &Vector| f.prox(lambda, x, &set).unwrap_or_else(|_| nan(n)));
    let op = AveragedOperator::new(n, 0.5, eval)?;
    let m = inst.f.strong_convexity();
    let op = contracting(op, (m > 0.0).then(|| 1.0 / (1.0 + m * lambda)))?;
    bounded(op, &inst.feasible_set)
}

/// `x ↦ prox_{λg, X}(x − λ∇f(x))`
pub fn forward_backward_operator(inst: &ProblemInstance, lambda: f64) -> Result<AveragedOperator> {
    let big_m = smooth_constant(&inst.f, "forward-backward")?;
    check_gradient_step(lambda, big_m)?;
    let n = inst.dim();
    let g = inst.g_or_zero();
    let (f, set) = (inst.f.clone(), inst.feasible_set.clone());
    g.prox(lambda, &Vector::zeros(n), &set)?;
    let m_g = g.strong_convexity();
    let eval = map(move |x: &Vector| {
        f.gradient(x)
            .and_then(|grad| g.prox(lambda, &(x - grad * lambda), &set))
            .unwrap_or_else(|_| nan(n))
    });
    let op = AveragedOperator::new(n, 1.0 / (2.0 - lambda * big_m / 2.0), eval)?;
    let forward = gradient_step_factor(lambda, inst.f.strong_convexity(), big_m);
    let backward = (m_g > 0.0).then(|| 1.0 / (1.0 + lambda * m_g));
    let factor = match (forward, backward) {
        (None, None) => None,
        (a, b) => Some(a.unwrap_or(1.0) * b.unwrap_or(1.0)),
    };
    let op = contracting(op, factor)?;
    bounded(op, &inst.feasible_set)
}

/// Curvature of the dual function `q(p) = min_x f(x) + pᵀ(Ax − b)`:
/// `−q` is `σ²max/m`-smooth, and `σ²min/M`-strongly convex when `X = R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualConstants {
    pub m: f64,
    pub big_m: Option<f64>,
    pub sigma_max: f64,
    /// `sqrt(λmin(AAᵀ))`, zero when `A` has more rows than columns.
    pub sigma_min: f64,
    /// Smallest nonzero singular value.
    pub sigma_zero: f64,
}

impl DualConstants {
    /// Smoothness constant `σ²max/m` of `−q` (infinite for `m = 0`).
    pub fn dual_smoothness(&self) -> f64 {
        if self.m > 0.0 {
            self.sigma_max * self.sigma_max / self.m
        } else {
            f64::INFINITY
        }
    }

    /// `σ²/M` for the given lower singular value (`σ_min`, or `σ_0` on the
    /// range of `A`); zero when `f` is not smooth.
    pub fn dual_strong_convexity(&self, sigma_low: f64) -> f64 {
        match self.big_m {
            Some(mm) if mm > 0.0 => sigma_low * sigma_low / mm,
            _ => 0.0,
        }
    }

    /// `max{|1 − λσ²/M|, |1 − λσ²max/m|}` for a chosen lower singular value.
    pub fn gradient_factor(&self, lambda: f64, sigma_low: f64) -> Option<f64> {
        let strong = self.dual_strong_convexity(sigma_low);
        (strong > 0.0 && self.m > 0.0)
            .then(|| (1.0 - lambda * strong).abs().max((1.0 - lambda * self.dual_smoothness()).abs()))
    }

    /// Contraction factor of Douglas-Rachford on the dual, which is what
    /// ADMM runs.
    pub fn admm_factor(&self, lambda: f64) -> Option<f64> {
        let strong = lambda * self.dual_strong_convexity(self.sigma_min);
        if strong <= 0.0 || self.m <= 0.0 {
            return None;
        }
        let smooth = lambda * self.dual_smoothness();
        Some(0.5 * (1.0 + ((smooth - 1.0) / (smooth + 1.0)).max((1.0 - strong) / (1.0 + strong))))
    }
}

/// Singular values of `A` and the dual constants they induce with `f`'s
/// curvature `(m, M)`; `None` stands for `M = ∞`.
pub fn dual_constants(a: &DMatrix<f64>, m: f64, big_m: Option<f64>) -> Result<DualConstants> {
    let s = singular_values(a);
    let sigma_max = s.first().copied().unwrap_or(0.0);
    if !(sigma_max > 0.0) {
        return Err(Error::param("dual constants need a nonzero constraint matrix"));
    }
    let tiny = 1e-10 * sigma_max;
    let sigma_min = if a.nrows() <= a.ncols() { s[a.nrows() - 1] } else { 0.0 };
    let sigma_min = if sigma_min > tiny { sigma_min } else { 0.0 };
    let sigma_zero = s.iter().copied().filter(|v| *v > tiny).fold(sigma_max, f64::min);
    Ok(DualConstants { m, big_m, sigma_max, sigma_min, sigma_zero })
}

/// `dual_constants` with the curvature of `f`.
pub fn dual_constants_of(f: &ConvexFunction, a: &DMatrix<f64>) -> Result<DualConstants> {
    dual_constants(a, f.strong_convexity(), f.smoothness())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMode {
    /// `A x <= b`, iterates projected onto the ball `P_k` of the nonnegative orthant.
    Inequality,
    /// `A x = b`
    Equality,
}

impl DualMode {
    pub fn constraint(self, inst: &ProblemInstance) -> Result<&LinearConstraint> {
        match self {
            DualMode::Inequality => inst.linear_ineq.as_ref(),
            DualMode::Equality => inst.linear_eq.as_ref(),
        }
        .ok_or_else(|| Error::config("instance lacks the linear constraint for dual ascent"))
    }
}

/// Radius of the ball containing every optimal multiplier, from a Slater
/// point: `(f(x̄) − min_X f) / min(b − Ax̄)`.
pub fn multiplier_radius(inst: &ProblemInstance) -> Result<f64> {
    let c = DualMode::Inequality.constraint(inst)?;
    let xbar = inst
        .slater_point
        .as_ref()
        .ok_or_else(|| Error::config("dual ascent (inequality) needs a Slater point"))?;
    let gamma = (&c.b - &c.a * xbar).min();
    if !(gamma > 0.0) {
        return Err(Error::config("Slater point is not strictly feasible"));
    }
    let unconstrained = inst.f.argmin_linear(&Vector::zeros(inst.dim()), &inst.feasible_set)?;
    let gap = inst.f.eval(xbar)? - inst.f.eval(&unconstrained)?;
    Ok(gap.max(0.0) / gamma)
}

/// Clip to `p >= 0`, then scale onto the ball of radius `r`.
pub fn project_multiplier_ball(p: &Vector, r: f64) -> Vector {
    let clipped = p.map(|v| v.max(0.0));
    let norm = clipped.norm();
    if norm > r {
        clipped * (r / norm)
    } else {
        clipped
    }
}

/// Lagrangian minimizer `x(p) = argmin_{x∈X} f(x) + pᵀAx`.
pub fn lagrangian_minimizer(inst: &ProblemInstance, mode: DualMode, p: &Vector) -> Result<Vector> {
    let c = mode.constraint(inst)?;
    inst.f.argmin_linear(&(c.a.transpose() * p), &inst.feasible_set)
}

/// `p ↦ Π(p + λ(A x(p) − b))`, with `Π` the projection onto `P_k` for
/// inequalities and the identity for equalities (a user bound is composed
/// by the runner). `p_in_range` says the iterates stay in `p_1 + im A`,
/// which allows the smallest nonzero singular value in the contraction.
pub fn dual_ascent_operator(
    inst: &ProblemInstance,
    lambda: f64,
    mode: DualMode,
    p_in_range: bool,
) -> Result<AveragedOperator> {
    check_lambda(lambda)?;
    let c = mode.constraint(inst)?.clone();
    let k = dual_constants_of(&inst.f, &c.a)?;
    let a_half = lambda * k.dual_smoothness() / 2.0;
    if a_half >= 1.0 {
        return Err(Error::param(format!(
            "dual step {lambda} is not below 2m/σ²max = {}",
            2.0 / k.dual_smoothness()
        )));
    }
    let rows = c.b.len();
    let (f, set) = (inst.f.clone(), inst.feasible_set.clone());
    let ascent = move |p: &Vector| -> Result<Vector> {
        let x = f.argmin_linear(&(c.a.transpose() * p), &set)?;
        Ok(p + (&c.a * x - &c.b) * lambda)
    };
    let smooth_whole = inst.feasible_set.is_whole() && inst.f.is_smooth();
    let op = match mode {
        DualMode::Inequality => {
            let r = multiplier_radius(inst)?;
            let eval = map(move |p: &Vector| {
                ascent(p).map(|v| project_multiplier_ball(&v, r)).unwrap_or_else(|_| nan(rows))
            });
            let op = AveragedOperator::new(rows, 1.0 / (2.0 - a_half), eval)?.with_image_bound(r)?;
            let factor = if smooth_whole { k.gradient_factor(lambda, k.sigma_min) } else { None };
            contracting(op, factor)?
        }
        DualMode::Equality => {
            let eval = map(move |p: &Vector| ascent(p).unwrap_or_else(|_| nan(rows)));
            let op = AveragedOperator::new(rows, a_half, eval)?;
            let factor = if !smooth_whole {
                None
            } else if k.sigma_min > 0.0 {
                k.gradient_factor(lambda, k.sigma_min)
            } else if p_in_range {
                k.gradient_factor(lambda, k.sigma_zero)
            } else {
                None
            };
            contracting(op, factor)?
        }
    };
    Ok(op)
}

/// Douglas-Rachford with `x = prox_{λg}(z)`, `z ↦ z + prox_{λf,X}(2x − z) − x`.
pub fn douglas_rachford_operator(inst: &ProblemInstance, lambda: f64) -> Result<AveragedOperator> {
    check_lambda(lambda)?;
    let n = inst.dim();
    let g = inst.g_or_zero();
    let whole = ConvexSet::whole(n);
    let (f, set) = (inst.f.clone(), inst.feasible_set.clone());
    f.prox(lambda, &Vector::zeros(n), &set)?;
    g.prox(lambda, &Vector::zeros(n), &whole)?;
    let eval = map(move |z: &Vector| {
        let step = || -> Result<Vector> {
            let x = g.prox(lambda, z, &whole)?;
            let y = f.prox(lambda, &(&x * 2.0 - z), &set)?;
            Ok(z + y - x)
        };
        step().unwrap_or_else(|_| nan(n))
    });
    let op = AveragedOperator::new(n, 0.5, eval)?;
    let (m, big_m) = (inst.f.strong_convexity(), inst.f.smoothness());
    let factor = match big_m {
        Some(mm) if m > 0.0 && inst.feasible_set.is_whole() => {
            let reflect = ((lambda * mm - 1.0) / (lambda * mm + 1.0)).max((1.0 - lambda * m) / (1.0 + lambda * m));
            Some(0.5 * (1.0 + reflect))
        }
        _ => None,
    };
    contracting(op, factor)
}

/// Primal point of a Douglas-Rachford state.
pub fn douglas_rachford_readout(inst: &ProblemInstance, lambda: f64, z: &Vector) -> Result<Vector> {
    inst.g_or_zero().prox(lambda, z, &ConvexSet::whole(inst.dim()))
}

/// The pieces of a two-block problem `min f(x) + g(z)` s.t. `Ax + Bz = c`.
#[derive(Debug, Clone)]
pub struct AdmmParts {
    pub f: ConvexFunction,
    pub g: ConvexFunction,
    pub x_set: ConvexSet,
    pub z_set: ConvexSet,
    pub coupling: AdmmCoupling,
}

impl AdmmParts {
    pub fn of(inst: &ProblemInstance) -> Result<Self> {
        let coupling = inst
            .admm
            .clone()
            .ok_or_else(|| Error::config("ADMM needs a coupling A x + B z = c"))?;
        let z_set = ConvexSet::whole(coupling.b.ncols());
        Ok(Self { f: inst.f.clone(), g: inst.g_or_zero(), x_set: inst.feasible_set.clone(), z_set, coupling })
    }

    pub fn rows(&self) -> usize {
        self.coupling.c.len()
    }

    /// `A x + B z − c`
    pub fn coupling_residual(&self, x: &Vector, z: &Vector) -> Vector {
        &self.coupling.a * x + &self.coupling.b * z - &self.coupling.c
    }

    /// Z-first half of the bounded form: from `β`, the pair `(z⁺, x⁺)`.
    pub fn bounded_substeps(&self, lambda: f64, beta: &Vector) -> Result<(Vector, Vector)> {
        let AdmmCoupling { a, b, c } = &self.coupling;
        let z = self.g.argmin_penalized(&Vector::zeros(b.ncols()), b, &(-beta / lambda), lambda, &self.z_set)?;
        let r = c - b * &z * 2.0 - beta / lambda;
        let x = self.f.argmin_penalized(&Vector::zeros(a.ncols()), a, &r, lambda, &self.x_set)?;
        Ok((z, x))
    }

    /// One standard (x first) step from `(z, p)`, returning `(x⁺, z⁺, p⁺)`.
    pub fn standard_step(&self, lambda: f64, z: &Vector, p: &Vector) -> Result<(Vector, Vector, Vector)> {
        let AdmmCoupling { a, b, c } = &self.coupling;
        let x = self.f.argmin_penalized(&(a.transpose() * p), a, &(c - b * z), lambda, &self.x_set)?;
        let zn = self.g.argmin_penalized(&(b.transpose() * p), b, &(c - a * &x), lambda, &self.z_set)?;
        let pn = p + self.coupling_residual(&x, &zn) * lambda;
        Ok((x, zn, pn))
    }

    /// `(z, p)` consistent with a standard-form state `ζ = p + λBz`.
    pub fn standard_recover(&self, lambda: f64, zeta: &Vector) -> Result<(Vector, Vector)> {
        let b = &self.coupling.b;
        let z = self.g.argmin_penalized(&Vector::zeros(b.ncols()), b, &(zeta / lambda), lambda, &self.z_set)?;
        let p = zeta - b * &z * lambda;
        Ok((z, p))
    }

    pub fn contraction(&self, lambda: f64) -> Option<f64> {
        if !self.x_set.is_whole() {
            return None;
        }
        dual_constants_of(&self.f, &self.coupling.a).ok()?.admm_factor(lambda)
    }
}

/// Bounded-form ADMM as an operator on `β = p + λ(Ax − c)`:
/// `β ↦ β + λ(Ax⁺ + Bz⁺ − c)` with `(z⁺, x⁺)` from the z-first subproblems.
pub fn admm_bounded_operator(inst: &ProblemInstance, lambda: f64) -> Result<AveragedOperator> {
    check_lambda(lambda)?;
    let parts = AdmmParts::of(inst)?;
    let rows = parts.rows();
    let factor = parts.contraction(lambda);
    parts.bounded_substeps(lambda, &Vector::zeros(rows))?;
    let eval = map(move |beta: &Vector| {
        parts
            .bounded_substeps(lambda, beta)
            .map(|(z, x)| beta + parts.coupling_residual(&x, &z) * lambda)
            .unwrap_or_else(|_| nan(rows))
    });
    contracting(AveragedOperator::new(rows, 0.5, eval)?, factor)
}

/// Standard-form ADMM as an operator on `ζ = p + λBz`, recovering `(z, p)`
/// from `ζ` with this instance's `g`.
pub fn admm_standard_operator(inst: &ProblemInstance, lambda: f64) -> Result<AveragedOperator> {
    check_lambda(lambda)?;
    let parts = AdmmParts::of(inst)?;
    let rows = parts.rows();
    let factor = parts.contraction(lambda);
    parts.standard_recover(lambda, &Vector::zeros(rows))?;
    let eval = map(move |zeta: &Vector| {
        let step = || -> Result<Vector> {
            let (z, p) = parts.standard_recover(lambda, zeta)?;
            let (_, zn, pn) = parts.standard_step(lambda, &z, &p)?;
            Ok(pn + &parts.coupling.b * zn * lambda)
        };
        step().unwrap_or_else(|_| nan(rows))
    });
    contracting(AveragedOperator::new(rows, 0.5, eval)?, factor)
}
