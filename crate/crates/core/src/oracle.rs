//! Reference solutions `x*_k` of single instances, and the fixed points of
//! the operators the running algorithms iterate.
//!
//! Closed forms (linear and KKT solves, active-set enumeration, coordinate
//! descent for box-constrained lasso) are used whenever the instance allows;
//! otherwise the operator itself is iterated to a small fixed-point residual.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::functions::{equality_qp, quadratic_min, ConvexFunction, ConvexSet, FunctionKind, SetKind};
use crate::operators::{AveragedOperator, Vector};
use crate::problems::{Algorithm, ProblemInstance, ProblemStream};
use crate::running::{
    admm_bounded_operator, admm_standard_operator, douglas_rachford_operator, dual_ascent_operator,
    forward_backward_operator, projected_gradient_operator, proximal_point_operator, AdmmForm,
    AdmmParts, DualMode, RunRecord,
};

pub const ORACLE_TOL: f64 = 1e-10;
pub const ORACLE_MAX_ITER: usize = 1_000_000;

/// Largest constraint count solved by enumerating active sets.
pub const ACTIVE_SET_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: Vector,
    /// Fixed point of the operator the algorithm iterates (equal to `x_star`
    /// for primal methods).
    pub state_star: Vector,
    pub p_star: Option<Vector>,
    pub z_star: Option<Vector>,
    /// Optimal value `F*_k`.
    pub objective: f64,
    /// Fixed-point residual `‖T(s*) − s*‖` of the algorithm's operator.
    pub residual: f64,
    /// Iterations of the fallback loop; zero for closed forms.
    pub iterations: usize,
}

/// What fixed point to compute: the state depends on the algorithm, its step
/// and, for ADMM, the form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSpec {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub admm_form: AdmmForm,
    pub tol: f64,
}

impl OracleSpec {
    pub fn new(algorithm: Algorithm, lambda: f64) -> Self {
        Self { algorithm, lambda, admm_form: AdmmForm::Standard, tol: ORACLE_TOL }
    }

    pub fn with_admm_form(mut self, form: AdmmForm) -> Self {
        self.admm_form = form;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Oracle settings matching a finished run.
    pub fn for_record(record: &RunRecord) -> Result<Self> {
        let algorithm = record
            .algorithm
            .ok_or_else(|| Error::param("the record does not name an algorithm"))?;
        let lambda = record.lambda.ok_or_else(|| Error::param("the record has no step size"))?;
        Ok(Self { algorithm, lambda, admm_form: record.admm_form.unwrap_or(AdmmForm::Standard), tol: ORACLE_TOL })
    }

    /// The operator whose fixed point is `state_star`.
    pub fn operator(&self, inst: &ProblemInstance) -> Result<AveragedOperator> {
        let l = self.lambda;
        match self.algorithm {
            Algorithm::ProjectedGradient => projected_gradient_operator(inst, l),
            Algorithm::ProximalPoint => proximal_point_operator(inst, l),
            Algorithm::ForwardBackward => forward_backward_operator(inst, l),
            Algorithm::DualAscentInequality => dual_ascent_operator(inst, l, DualMode::Inequality, false),
            Algorithm::DualAscentEquality => dual_ascent_operator(inst, l, DualMode::Equality, false),
            Algorithm::DouglasRachford => douglas_rachford_operator(inst, l),
            Algorithm::Admm => match self.admm_form {
                AdmmForm::Bounded => admm_bounded_operator(inst, l),
                AdmmForm::Standard => admm_standard_operator(inst, l),
            },
        }
    }
}

fn oracle_err(msg: impl Into<String>) -> Error {
    Error::Oracle(msg.into())
}

/// `s ← T(s)` until `‖T(s) − s‖ <= tol`.
fn iterate(op: &AveragedOperator, start: Vector, tol: f64) -> Result<(Vector, usize)> {
    let mut s = start;
    for it in 1..=ORACLE_MAX_ITER {
        let next = op.apply(&s)?;
        let moved = (&next - &s).norm();
        s = next;
        if moved <= tol {
            return Ok((s, it));
        }
    }
    Err(oracle_err(format!("fixed-point iteration did not reach {tol:e} in {ORACLE_MAX_ITER} steps")))
}

fn warm_state(warm: Option<&ReferenceSolution>, dim: usize) -> Vector {
    match warm {
        Some(w) if w.state_star.len() == dim => w.state_star.clone(),
        _ => Vector::zeros(dim),
    }
}

fn warm_primal(warm: Option<&ReferenceSolution>, dim: usize) -> Vector {
    match warm {
        Some(w) if w.x_star.len() == dim => w.x_star.clone(),
        _ => Vector::zeros(dim),
    }
}

/// `(Q, q)` of `f + g` when both are quadratic forms.
fn joint_quadratic(f: &ConvexFunction, g: &ConvexFunction) -> Option<(DMatrix<f64>, Vector)> {
    let (qf, lf, _) = f.quadratic_form()?;
    let (qg, lg, _) = g.quadratic_form()?;
    Some((qf + qg, lf + lg))
}

fn box_limits(set: &ConvexSet) -> Option<(Vector, Vector)> {
    let n = set.dim();
    match set.kind() {
        SetKind::WholeSpace => Some((
            Vector::from_element(n, f64::NEG_INFINITY),
            Vector::from_element(n, f64::INFINITY),
        )),
        SetKind::Box { lower, upper } => Some((lower.clone(), upper.clone())),
        SetKind::NonnegativeOrthant => Some((Vector::zeros(n), Vector::from_element(n, f64::INFINITY))),
        _ => None,
    }
}

/// Exact cyclic coordinate minimization of `½xᵀQx + qᵀx + w‖x‖₁` over a box.
fn lasso_coordinate_descent(
    q: &DMatrix<f64>,
    lin: &Vector,
    w: f64,
    lower: &Vector,
    upper: &Vector,
    start: Vector,
) -> Result<(Vector, usize)> {
    let n = lin.len();
    if (0..n).any(|i| q[(i, i)] <= 0.0) {
        return Err(oracle_err("coordinate descent needs a positive diagonal"));
    }
    let mut x = start.zip_zip_map(lower, upper, |v, l, u| v.clamp(l, u));
    let mut grad = q * &x + lin;
    for sweep in 1..=ORACLE_MAX_ITER {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let h = q[(i, i)];
            let v = x[i] - grad[i] / h;
            let t = w / h;
            let soft = v.signum() * (v.abs() - t).max(0.0);
            let new = soft.clamp(lower[i], upper[i]);
            let d = new - x[i];
            if d != 0.0 {
                for j in 0..n {
                    grad[j] += q[(j, i)] * d;
                }
                x[i] = new;
                moved = moved.max(d.abs());
            }
        }
        if moved <= 1e-15 * x.amax().max(1.0) {
            return Ok((x, sweep));
        }
    }
    Err(oracle_err("coordinate descent did not converge"))
}

/// `argmin_{x∈X} f(x) + g(x)` for single-block problems.
fn primal_minimizer(inst: &ProblemInstance, warm: Option<&ReferenceSolution>, tol: f64) -> Result<(Vector, usize)> {
    let g = inst.g_or_zero();
    let set = &inst.feasible_set;
    let n = inst.dim();
    if let Some((q, lin)) = joint_quadratic(&inst.f, &g) {
        return Ok((quadratic_min(&q, &lin, set)?, 0));
    }
    if let (FunctionKind::Indicator(c), Some((q, lin, _)), true) = (g.kind(), inst.f.quadratic_form(), set.is_whole()) {
        return Ok((quadratic_min(&q, &lin, c)?, 0));
    }
    // a smooth part plus a weighted l1 norm over a box
    let l1_pair = match (inst.f.kind(), g.kind()) {
        (_, FunctionKind::L1 { weight }) => inst.f.quadratic_form().map(|(q, l, _)| (q, l, *weight)),
        (FunctionKind::L1 { weight }, _) => g.quadratic_form().map(|(q, l, _)| (q, l, *weight)),
        _ => None,
    };
    if let (Some((q, lin, w)), Some((lo, hi))) = (l1_pair, box_limits(set)) {
        return lasso_coordinate_descent(&q, &lin, w, &lo, &hi, warm_primal(warm, n));
    }
    if g.is_zero() {
        let op = proximal_point_operator(inst, 1.0)?;
        return iterate(&op, warm_primal(warm, n), tol);
    }
    if let Some(big_m) = inst.f.smoothness() {
        let step = if big_m > 0.0 { 1.0 / big_m } else { 1.0 };
        let op = forward_backward_operator(inst, step)?;
        return iterate(&op, warm_primal(warm, n), tol);
    }
    Err(Error::unsupported("no oracle for a problem with two nonsmooth terms; use Douglas-Rachford"))
}

fn kkt_violation(x: &Vector, p: &Vector, a: &DMatrix<f64>, b: &Vector) -> f64 {
    let slack = a * x - b;
    let primal = slack.iter().fold(0.0f64, |acc, s| acc.max(*s));
    let dual = p.iter().fold(0.0f64, |acc, v| acc.max(-*v));
    let comp = slack.iter().zip(p.iter()).fold(0.0f64, |acc, (s, v)| acc.max((s * v).abs()));
    primal.max(dual).max(comp)
}

/// `min ½xᵀQx + qᵀx` s.t. `Ax <= b` over `R^n`, by trying every active set.
pub fn inequality_qp(q: &DMatrix<f64>, lin: &Vector, a: &DMatrix<f64>, b: &Vector) -> Result<(Vector, Vector)> {
    let rows = b.len();
    if rows > ACTIVE_SET_LIMIT {
        return Err(Error::unsupported(format!(
            "active-set enumeration is limited to {ACTIVE_SET_LIMIT} constraints"
        )));
    }
    let n = lin.len();
    let mut best: Option<(f64, Vector, Vector)> = None;
    for mask in 0u32..(1u32 << rows) {
        let active: Vec<usize> = (0..rows).filter(|i| mask & (1 << i) != 0).collect();
        let candidate = if active.is_empty() {
            quadratic_min(q, lin, &ConvexSet::whole(n)).map(|x| (x, Vector::zeros(rows)))
        } else {
            let a_s = a.select_rows(&active);
            let b_s = Vector::from_iterator(active.len(), active.iter().map(|&i| b[i]));
            equality_qp(q, lin, &a_s, &b_s).map(|(x, nu)| {
                let mut p = Vector::zeros(rows);
                for (j, &i) in active.iter().enumerate() {
                    p[i] = nu[j];
                }
                (x, p)
            })
        };
        let Ok((x, p)) = candidate else { continue };
        let v = kkt_violation(&x, &p, a, b);
        if best.as_ref().is_none_or(|(bv, _, _)| v < *bv) {
            best = Some((v, x, p));
        }
        if v <= 1e-13 {
            break;
        }
    }
    let (v, x, p) = best.ok_or_else(|| oracle_err("no active set gives a solution"))?;
    let scale = b.amax().max(1.0) * (1.0 + p.amax());
    if v > 1e-8 * scale {
        return Err(oracle_err(format!("best active set violates the KKT conditions by {v:e}")));
    }
    Ok((x, p.map(|v| v.max(0.0))))
}

fn finish(
    inst: &ProblemInstance,
    spec: &OracleSpec,
    x_star: Vector,
    state_star: Vector,
    p_star: Option<Vector>,
    z_star: Option<Vector>,
    iterations: usize,
) -> Result<ReferenceSolution> {
    let objective = match (&z_star, &inst.admm) {
        (Some(z), Some(_)) => inst.f.eval(&x_star)? + inst.g_or_zero().eval(z)?,
        _ => inst.objective(&x_star)?,
    };
    let op = spec.operator(inst)?;
    let residual = (op.apply(&state_star)? - &state_star).norm();
    Ok(ReferenceSolution { x_star, state_star, p_star, z_star, objective, residual, iterations })
}

fn dual_solution(
    inst: &ProblemInstance,
    spec: &OracleSpec,
    mode: DualMode,
    warm: Option<&ReferenceSolution>,
) -> Result<ReferenceSolution> {
    let c = mode.constraint(inst)?;
    let quad = inst.f.quadratic_form().filter(|_| inst.feasible_set.is_whole());
    let (x, p, iterations) = match (quad, mode) {
        (Some((q, lin, _)), DualMode::Inequality) if c.b.len() <= ACTIVE_SET_LIMIT => {
            let (x, p) = inequality_qp(&q, &lin, &c.a, &c.b)?;
            (x, p, 0)
        }
        (Some((q, lin, _)), DualMode::Equality) => {
            let (x, p) = equality_qp(&q, &lin, &c.a, &c.b)?;
            (x, p, 0)
        }
        _ => {
            let k = crate::running::dual_constants_of(&inst.f, &c.a)?;
            let op = dual_ascent_operator(inst, 1.0 / k.dual_smoothness(), mode, false)?;
            let (p, it) = iterate(&op, warm_state(warm, c.b.len()), spec.tol)?;
            let x = crate::running::lagrangian_minimizer(inst, mode, &p)?;
            (x, p, it)
        }
    };
    finish(inst, spec, x, p.clone(), Some(p), None, iterations)
}

fn douglas_rachford_solution(
    inst: &ProblemInstance,
    spec: &OracleSpec,
    warm: Option<&ReferenceSolution>,
) -> Result<ReferenceSolution> {
    let g = inst.g_or_zero();
    let lambda = spec.lambda;
    if g.is_smooth() {
        if let Ok((x, it)) = primal_minimizer(inst, warm, spec.tol) {
            let z = &x + g.gradient(&x)? * lambda;
            return finish(inst, spec, x, z, None, None, it);
        }
    }
    if inst.f.is_smooth() && inst.feasible_set.is_whole() {
        let (x, it) = primal_minimizer(inst, warm, spec.tol)?;
        let z = &x - inst.f.gradient(&x)? * lambda;
        return finish(inst, spec, x, z, None, None, it);
    }
    let op = douglas_rachford_operator(inst, lambda)?;
    let (z, it) = iterate(&op, warm_state(warm, inst.dim()), spec.tol)?;
    let x = crate::running::douglas_rachford_readout(inst, lambda, &z)?;
    finish(inst, spec, x, z, None, None, it)
}

fn admm_solution(
    inst: &ProblemInstance,
    spec: &OracleSpec,
    warm: Option<&ReferenceSolution>,
) -> Result<ReferenceSolution> {
    let parts = AdmmParts::of(inst)?;
    let lambda = spec.lambda;
    let (a, b, c) = (&parts.coupling.a, &parts.coupling.b, &parts.coupling.c);
    let (n, nz, rows) = (a.ncols(), b.ncols(), c.len());
    let a_inv = if a.is_square() { a.clone().lu().try_inverse() } else { None };
    let closed = match (parts.f.quadratic_form(), parts.g.quadratic_form(), a_inv) {
        (Some((qf, lf, _)), Some((qg, lg, _)), Some(a_inv)) if parts.x_set.is_whole() => {
            // eliminate x = A⁻¹(c − Bz) and minimize over z alone
            let x0 = &a_inv * c;
            let mz = &a_inv * b;
            let h = mz.transpose() * &qf * &mz + &qg;
            let lin = lg - mz.transpose() * (&qf * &x0 + &lf);
            let z = quadratic_min(&h, &lin, &parts.z_set)?;
            let x = x0 - &mz * &z;
            let p = -(a_inv.transpose() * (&qf * &x + &lf));
            Some((x, z, p))
        }
        (Some((qf, lf, _)), Some((qg, lg, _)), None) if parts.x_set.is_whole() => {
            let mut h = DMatrix::zeros(n + nz, n + nz);
            h.view_mut((0, 0), (n, n)).copy_from(&qf);
            h.view_mut((n, n), (nz, nz)).copy_from(&qg);
            let mut lin = Vector::zeros(n + nz);
            lin.rows_mut(0, n).copy_from(&lf);
            lin.rows_mut(n, nz).copy_from(&lg);
            let mut ab = DMatrix::zeros(rows, n + nz);
            ab.view_mut((0, 0), (rows, n)).copy_from(a);
            ab.view_mut((0, n), (rows, nz)).copy_from(b);
            let (w, p) = equality_qp(&h, &lin, &ab, c)?;
            Some((w.rows(0, n).into_owned(), w.rows(n, nz).into_owned(), p))
        }
        _ => None,
    };
    let (x, z, p, state, it) = match closed {
        Some((x, z, p)) => {
            let state = match spec.admm_form {
                AdmmForm::Bounded => &p + (a * &x - c) * lambda,
                AdmmForm::Standard => &p + b * &z * lambda,
            };
            (x, z, p, state, 0)
        }
        None => {
            let op = spec.operator(inst)?;
            let (s, it) = iterate(&op, warm_state(warm, rows), spec.tol)?;
            match spec.admm_form {
                AdmmForm::Bounded => {
                    let (z, x) = parts.bounded_substeps(lambda, &s)?;
                    let p = &s - (a * &x - c) * lambda;
                    (x, z, p, s, it)
                }
                AdmmForm::Standard => {
                    let (z, p) = parts.standard_recover(lambda, &s)?;
                    let (x, _, _) = parts.standard_step(lambda, &z, &p)?;
                    (x, z, p, s, it)
                }
            }
        }
    };
    finish(inst, spec, x, state, Some(p), Some(z), it)
}

/// Reference solution of one instance, optionally warm-started from a
/// neighbouring sample.
pub fn solve_instance(
    inst: &ProblemInstance,
    spec: &OracleSpec,
    warm: Option<&ReferenceSolution>,
) -> Result<ReferenceSolution> {
    inst.validate(spec.algorithm)?;
    match spec.algorithm {
        Algorithm::ProjectedGradient | Algorithm::ProximalPoint | Algorithm::ForwardBackward => {
            let (x, it) = primal_minimizer(inst, warm, spec.tol)?;
            finish(inst, spec, x.clone(), x, None, None, it)
        }
        Algorithm::DualAscentInequality => dual_solution(inst, spec, DualMode::Inequality, warm),
        Algorithm::DualAscentEquality => dual_solution(inst, spec, DualMode::Equality, warm),
        Algorithm::DouglasRachford => douglas_rachford_solution(inst, spec, warm),
        Algorithm::Admm => admm_solution(inst, spec, warm),
    }
}

/// Reference solutions for samples `1..=samples`, each warm-started from
/// the previous one.
pub fn solution_trajectory(stream: &ProblemStream, spec: &OracleSpec, samples: usize) -> Result<Vec<ReferenceSolution>> {
    let mut out: Vec<ReferenceSolution> = Vec::with_capacity(samples);
    for k in 1..=samples {
        let inst = stream.sample(k)?;
        let sol = solve_instance(&inst, spec, out.last()).map_err(|e| match e {
            Error::Oracle(msg) => Error::Oracle(format!("sample {k}: {msg}")),
            other => other,
        })?;
        out.push(sol);
    }
    Ok(out)
}
