//! Convex functions with gradient / prox oracles and their curvature constants.

mod sets;

pub use sets::{ConvexSet, SetKind};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, eigen_range, is_diagonal, scalar_identity_factor};
use crate::operators::Vector;

/// Inner-loop settings for prox problems without a closed form.
pub const FALLBACK_TOL: f64 = 1e-10;
pub const FALLBACK_MAX_ITER: usize = 100_000;

/// Membership slack for indicator evaluation and prox output checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    Zero,
    /// `½ xᵀQx + qᵀx + c`
    Quadratic {
        hessian: DMatrix<f64>,
        linear: Vector,
        constant: f64,
    },
    /// `weight · ‖x‖₁`
    L1 { weight: f64 },
    /// `½ ‖Ax − b‖²`
    LeastSquares { matrix: DMatrix<f64>, target: Vector },
    Indicator(ConvexSet),
}

/// Curvature constants of the convex conjugate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateConstants {
    /// `1/M`; infinite when `M = 0`, zero when `M = ∞`.
    pub strong_convexity: f64,
    /// `1/m`, absent when `m = 0`.
    pub smoothness: Option<f64>,
}

/// Conjugate constants from `(m, M)`, with `None` standing for `M = ∞`.
pub fn conjugate_constants(m: f64, big_m: Option<f64>) -> Result<ConjugateConstants> {
    if m <= 0.0 && big_m.is_none() {
        return Err(Error::unsupported(
            "conjugate constants need m > 0 or a finite smoothness constant",
        ));
    }
    Ok(ConjugateConstants {
        strong_convexity: match big_m {
            Some(mm) if mm > 0.0 => 1.0 / mm,
            Some(_) => f64::INFINITY,
            None => 0.0,
        },
        smoothness: (m > 0.0).then(|| 1.0 / m),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFunction {
    kind: FunctionKind,
    dim: usize,
    m: f64,
    /// `None` is the `M = ∞` sentinel.
    smoothness: Option<f64>,
}

fn curvature(h: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !h.is_square() {
        return Err(Error::param("Hessian must be square"));
    }
    if h.nrows() == 0 {
        return Ok((0.0, 0.0));
    }
    let asym = (h - h.transpose()).amax();
    if asym > 1e-10 * h.amax().max(1.0) {
        return Err(Error::param(format!("Hessian is not symmetric (asymmetry {asym:e})")));
    }
    let (lo, hi) = eigen_range(h);
    let scale = hi.abs().max(1.0);
    if lo < -1e-10 * scale {
        return Err(Error::param(format!("Hessian is not positive semidefinite (min eigenvalue {lo:e})")));
    }
    // round-off below the scale of the largest eigenvalue counts as zero
    let lo = if lo < 1e-12 * scale { 0.0 } else { lo };
    Ok((lo, hi.max(0.0)))
}

impl ConvexFunction {
    pub fn zero(dim: usize) -> Self {
        Self { kind: FunctionKind::Zero, dim, m: 0.0, smoothness: Some(0.0) }
    }

    pub fn quadratic(hessian: DMatrix<f64>, linear: Vector) -> Result<Self> {
        Self::quadratic_with_constant(hessian, linear, 0.0)
    }

    pub fn quadratic_with_constant(hessian: DMatrix<f64>, linear: Vector, constant: f64) -> Result<Self> {
        if hessian.nrows() != linear.len() {
            return Err(Error::param("quadratic: Q and q have different dimensions"));
        }
        let (m, big_m) = curvature(&hessian)?;
        let dim = linear.len();
        Ok(Self {
            kind: FunctionKind::Quadratic { hessian, linear, constant },
            dim,
            m,
            smoothness: Some(big_m),
        })
    }

    /// `(w/2) ‖x − center‖²`
    pub fn squared_distance(center: &Vector, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::param("squared distance weight must be positive"));
        }
        let n = center.len();
        Self::quadratic_with_constant(
            DMatrix::identity(n, n) * weight,
            -center * weight,
            0.5 * weight * center.norm_squared(),
        )
    }

    pub fn l1(dim: usize, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::param("l1 weight must be nonnegative"));
        }
        Ok(Self { kind: FunctionKind::L1 { weight }, dim, m: 0.0, smoothness: None })
    }

    pub fn least_squares(matrix: DMatrix<f64>, target: Vector) -> Result<Self> {
        if matrix.nrows() != target.len() {
            return Err(Error::param("least squares: A and b have incompatible shapes"));
        }
        let (m, big_m) = curvature(&(matrix.transpose() * &matrix))?;
        let dim = matrix.ncols();
        Ok(Self {
            kind: FunctionKind::LeastSquares { matrix, target },
            dim,
            m,
            smoothness: Some(big_m),
        })
    }

    pub fn indicator(set: ConvexSet) -> Self {
        let dim = set.dim();
        Self { kind: FunctionKind::Indicator(set), dim, m: 0.0, smoothness: None }
    }

    /// Same Hessian (and constants), new linear and constant terms.
    pub fn with_linear_term(&self, linear: Vector, constant: f64) -> Result<Self> {
        match &self.kind {
            FunctionKind::Quadratic { hessian, .. } if linear.len() == self.dim => Ok(Self {
                kind: FunctionKind::Quadratic { hessian: hessian.clone(), linear, constant },
                ..self.clone()
            }),
            _ => Err(Error::param("with_linear_term needs a quadratic of matching dimension")),
        }
    }

    /// Same matrix (and constants), new target vector.
    pub fn with_target(&self, target: Vector) -> Result<Self> {
        match &self.kind {
            FunctionKind::LeastSquares { matrix, .. } if target.len() == matrix.nrows() => Ok(Self {
                kind: FunctionKind::LeastSquares { matrix: matrix.clone(), target },
                ..self.clone()
            }),
            _ => Err(Error::param("with_target needs a least-squares function of matching shape")),
        }
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn strong_convexity(&self) -> f64 {
        self.m
    }

    pub fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }

    pub fn is_smooth(&self) -> bool {
        self.smoothness.is_some()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, FunctionKind::Zero)
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::param(format!(
                "function on R^{} evaluated at a point of R^{}",
                self.dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// `(Q, q, c)` with `f(x) = ½xᵀQx + qᵀx + c`, for the smooth catalog members.
    pub fn quadratic_form(&self) -> Option<(DMatrix<f64>, Vector, f64)> {
        let n = self.dim;
        match &self.kind {
            FunctionKind::Zero => Some((DMatrix::zeros(n, n), Vector::zeros(n), 0.0)),
            FunctionKind::Quadratic { hessian, linear, constant } => {
                Some((hessian.clone(), linear.clone(), *constant))
            }
            FunctionKind::LeastSquares { matrix, target } => Some((
                matrix.transpose() * matrix,
                -(matrix.transpose() * target),
                0.5 * target.norm_squared(),
            )),
            _ => None,
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match &self.kind {
            FunctionKind::Zero => 0.0,
            FunctionKind::Quadratic { hessian, linear, constant } => {
                0.5 * x.dot(&(hessian * x)) + linear.dot(x) + constant
            }
            FunctionKind::L1 { weight } => weight * x.lp_norm(1),
            FunctionKind::LeastSquares { matrix, target } => 0.5 * (matrix * x - target).norm_squared(),
            FunctionKind::Indicator(set) => {
                if set.contains(x, MEMBERSHIP_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        })
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        match &self.kind {
            FunctionKind::Zero => Ok(Vector::zeros(self.dim)),
            FunctionKind::Quadratic { hessian, linear, .. } => Ok(hessian * x + linear),
            FunctionKind::LeastSquares { matrix, target } => Ok(matrix.transpose() * (matrix * x - target)),
            FunctionKind::L1 { .. } | FunctionKind::Indicator(_) => Err(Error::unsupported(
                "gradient of a nonsmooth function (M = ∞)",
            )),
        }
    }

    /// `argmin_{x ∈ set} f(x) + ‖x − v‖²/(2λ)`
    pub fn prox(&self, lambda: f64, v: &Vector, set: &ConvexSet) -> Result<Vector> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("prox step must be positive, got {lambda}")));
        }
        self.check_dim(v)?;
        if set.dim() != self.dim {
            return Err(Error::param("prox: set and function dimensions differ"));
        }
        if self.is_zero() {
            return set.project(v);
        }
        if let Some((q, lin, _)) = self.quadratic_form() {
            let n = self.dim;
            let h = q + DMatrix::identity(n, n) / lambda;
            return quadratic_min(&h, &(lin - v / lambda), set);
        }
        match &self.kind {
            FunctionKind::L1 { weight } => {
                let t = lambda * weight;
                let soft = v.map(|vi| vi.signum() * (vi.abs() - t).max(0.0));
                match set.kind() {
                    SetKind::WholeSpace | SetKind::Box { .. } | SetKind::NonnegativeOrthant => set.project(&soft),
                    _ => Err(Error::unsupported("prox of the l1 norm over a non-separable set")),
                }
            }
            FunctionKind::Indicator(own) => {
                if set.is_whole() {
                    own.project(v)
                } else if own.is_whole() {
                    set.project(v)
                } else {
                    match (box_bounds(own), box_bounds(set)) {
                        (Some((l1, u1)), Some((l2, u2))) => {
                            let lower = l1.zip_map(&l2, f64::max);
                            let upper = u1.zip_map(&u2, f64::min);
                            ConvexSet::boxed(lower, upper)
                                .map_err(|_| Error::param("prox: the two boxes do not intersect"))?
                                .project(v)
                        }
                        _ => Err(Error::unsupported("projection onto an intersection of non-box sets")),
                    }
                }
            }
            _ => unreachable!("smooth kinds handled above"),
        }
    }

    /// `prox_{μ f*}(u)` from the closed forms of the conjugates.
    pub fn conjugate_prox(&self, mu: f64, u: &Vector) -> Result<Vector> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::param("conjugate prox step must be positive"));
        }
        self.check_dim(u)?;
        match &self.kind {
            FunctionKind::Zero => Ok(Vector::zeros(self.dim)),
            FunctionKind::L1 { weight } => Ok(u.map(|ui| ui.clamp(-weight, *weight))),
            // f* is the support function of the set
            FunctionKind::Indicator(set) => Ok(u - set.project(&(u / mu))? * mu),
            _ => {
                let (q, lin, _) = self.quadratic_form().expect("smooth kind");
                let n = self.dim;
                let h = DMatrix::identity(n, n) * mu + &q;
                linalg::general_solve(&h, &(lin * mu + q * u))
            }
        }
    }

    /// `argmin_{x ∈ set} f(x) + yᵀx`, the Lagrangian minimizer used by dual methods.
    pub fn argmin_linear(&self, y: &Vector, set: &ConvexSet) -> Result<Vector> {
        self.check_dim(y)?;
        let (q, lin, _) = self
            .quadratic_form()
            .ok_or_else(|| Error::unsupported("linear-perturbation minimizer of a nonsmooth function"))?;
        quadratic_min(&q, &(lin + y), set)
    }

    /// `argmin_{x ∈ set} f(x) + yᵀx + (ρ/2)‖Ax − r‖²`, the augmented-Lagrangian
    /// subproblem of ADMM.
    pub fn argmin_penalized(
        &self,
        y: &Vector,
        a: &DMatrix<f64>,
        r: &Vector,
        rho: f64,
        set: &ConvexSet,
    ) -> Result<Vector> {
        self.check_dim(y)?;
        if a.ncols() != self.dim || a.nrows() != r.len() {
            return Err(Error::param("penalized subproblem: incompatible coupling matrix"));
        }
        if let Some((q, lin, _)) = self.quadratic_form() {
            let h = q + a.transpose() * a * rho;
            let l = lin + y - a.transpose() * r * rho;
            return quadratic_min(&h, &l, set);
        }
        // A = sI reduces to a prox
        let s = scalar_identity_factor(a)
            .ok_or_else(|| Error::unsupported("nonsmooth subproblem with a non-scalar coupling matrix"))?;
        let step = 1.0 / (rho * s * s);
        let v = r / s - y * step;
        self.prox(step, &v, set)
    }
}

fn box_bounds(set: &ConvexSet) -> Option<(Vector, Vector)> {
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

/// Minimizer of `½xᵀHx + linᵀx` over `set`, with `H` symmetric PSD.
///
/// Closed forms: unconstrained (linear solve), `H = sI` (projection of the
/// unconstrained minimizer), diagonal `H` over boxes (clipping), affine sets
/// (KKT system). Anything else runs projected gradient.
pub fn quadratic_min(h: &DMatrix<f64>, lin: &Vector, set: &ConvexSet) -> Result<Vector> {
    let n = lin.len();
    if h.nrows() != n || set.dim() != n {
        return Err(Error::param("quadratic_min: dimension mismatch"));
    }
    if let Some(s) = scalar_identity_factor(h) {
        if s > 0.0 {
            return set.project(&(-lin / s));
        }
    }
    match set.kind() {
        SetKind::WholeSpace => {
            let x = linalg::spd_solve(h, &(-lin))?;
            let resid = (h * &x + lin).norm();
            if !(resid <= 1e-8 * lin.norm().max(1.0)) {
                return Err(linalg::numerical("quadratic is unbounded below on the whole space"));
            }
            Ok(x)
        }
        SetKind::Box { .. } | SetKind::NonnegativeOrthant
            if is_diagonal(h) && h.diagonal().iter().all(|d| *d > 0.0) =>
        {
            let x = Vector::from_iterator(n, (0..n).map(|i| -lin[i] / h[(i, i)]));
            set.project(&x)
        }
        SetKind::Affine { matrix, rhs, .. } => {
            let (x, _) = equality_qp(h, lin, matrix, rhs)?;
            Ok(x)
        }
        _ => projected_gradient_qp(h, lin, set),
    }
}

/// Solve `min ½xᵀHx + linᵀx s.t. Ax = b` through its KKT system.
/// Returns `(x, ν)` with `Hx + lin + Aᵀν = 0`.
pub fn equality_qp(h: &DMatrix<f64>, lin: &Vector, a: &DMatrix<f64>, b: &Vector) -> Result<(Vector, Vector)> {
    let n = lin.len();
    let p = b.len();
    if a.ncols() != n || a.nrows() != p || h.nrows() != n {
        return Err(Error::param("equality QP: incompatible shapes"));
    }
    let mut kkt = DMatrix::zeros(n + p, n + p);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    kkt.view_mut((0, n), (n, p)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (p, n)).copy_from(a);
    let mut rhs = Vector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(&(-lin));
    rhs.rows_mut(n, p).copy_from(b);
    let sol = linalg::svd_solve(&kkt, &rhs)?;
    let resid = (&kkt * &sol - &rhs).norm();
    if !(resid <= 1e-8 * rhs.norm().max(1.0)) {
        return Err(linalg::numerical(format!("KKT system is inconsistent (residual {resid:e})")));
    }
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, p).into_owned()))
}

fn projected_gradient_qp(h: &DMatrix<f64>, lin: &Vector, set: &ConvexSet) -> Result<Vector> {
    let (_, top) = eigen_range(h);
    if top <= 0.0 {
        // linear objective; only the projection of a point is meaningful here
        if lin.norm() == 0.0 {
            return set.project(&Vector::zeros(lin.len()));
        }
        return Err(Error::unsupported("linear minimization over a general set"));
    }
    let step = 1.0 / top;
    let mut x = set.project(&Vector::zeros(lin.len()))?;
    for _ in 0..FALLBACK_MAX_ITER {
        let next = set.project(&(&x - (h * &x + lin) * step))?;
        let moved = (&next - &x).norm();
        x = next;
        if moved <= FALLBACK_TOL * x.norm().max(1.0) {
            return Ok(x);
        }
    }
    Err(linalg::numerical(format!(
        "projected-gradient inner loop did not reach {FALLBACK_TOL:e} in {FALLBACK_MAX_ITER} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn central_difference(f: &ConvexFunction, x: &Vector) -> Vector {
        let h = 1e-6;
        Vector::from_iterator(
            x.len(),
            (0..x.len()).map(|i| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                (f.eval(&xp).unwrap() - f.eval(&xm).unwrap()) / (2.0 * h)
            }),
        )
    }

    fn psd(seed: &[f64], n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_iterator(n, n, seed.iter().copied().cycle().take(n * n));
        &b * b.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn gradient_examples() {
        let half_sq = ConvexFunction::squared_distance(&Vector::zeros(2), 1.0).unwrap();
        assert_eq!(half_sq.gradient(&v(&[1.0, 2.0])).unwrap(), v(&[1.0, 2.0]));
        let shifted = ConvexFunction::squared_distance(&v(&[2.0]), 1.0).unwrap();
        assert_eq!(shifted.gradient(&v(&[0.0])).unwrap(), v(&[-2.0]));
        let l1 = ConvexFunction::l1(2, 1.0).unwrap();
        assert!(matches!(l1.gradient(&v(&[1.0, 1.0])), Err(Error::Unsupported(_))));
    }

    #[test]
    fn prox_examples() {
        let whole = ConvexSet::whole(1);
        let abs = ConvexFunction::l1(1, 1.0).unwrap();
        assert!((abs.prox(0.5, &v(&[2.0]), &whole).unwrap()[0] - 1.5).abs() < 1e-15);
        let sq = ConvexFunction::squared_distance(&v(&[0.0]), 1.0).unwrap();
        assert!((sq.prox(1.0, &v(&[4.0]), &whole).unwrap()[0] - 2.0).abs() < 1e-14);
        let cube = ConvexSet::cube(1, 1.0).unwrap();
        assert_eq!(ConvexFunction::zero(1).prox(3.0, &v(&[2.0]), &cube).unwrap(), v(&[1.0]));
        assert!(sq.prox(0.0, &v(&[1.0]), &whole).is_err());
    }

    #[test]
    fn quadratic_over_sets_matches_kkt_and_fallback() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = ConvexFunction::quadratic(q.clone(), v(&[-1.0, 3.0])).unwrap();
        // affine set: compare the KKT answer with the optimality conditions
        let line = ConvexSet::affine(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), v(&[2.0])).unwrap();
        let x = f.prox(1.0, &v(&[0.0, 0.0]), &line).unwrap();
        assert!((x.sum() - 2.0).abs() < 1e-12);
        let g = &q * &x + v(&[-1.0, 3.0]) + &x;
        assert!((g[0] - g[1]).abs() < 1e-10);
        // ball: projected gradient result satisfies the variational inequality
        let ball = ConvexSet::ball(Vector::zeros(2), 0.5).unwrap();
        let x = f.prox(1.0, &v(&[3.0, -3.0]), &ball).unwrap();
        let grad = &q * &x + v(&[-1.0, 3.0]) + (&x - v(&[3.0, -3.0]));
        for k in 0..64 {
            let th = k as f64 * std::f64::consts::TAU / 64.0;
            let y = v(&[0.5 * th.cos(), 0.5 * th.sin()]);
            assert!(grad.dot(&(&y - &x)) >= -1e-7);
        }
    }

    #[test]
    fn conjugate_constant_examples() {
        let c = conjugate_constants(2.0, None).unwrap();
        assert_eq!(c.smoothness, Some(0.5));
        let c = conjugate_constants(0.0, Some(4.0)).unwrap();
        assert_eq!(c.strong_convexity, 0.25);
        assert_eq!(c.smoothness, None);
        let f = ConvexFunction::squared_distance(&Vector::zeros(3), 1.0).unwrap();
        let c = conjugate_constants(f.strong_convexity(), f.smoothness()).unwrap();
        assert!((c.strong_convexity - 1.0).abs() < 1e-12);
        assert!((c.smoothness.unwrap() - 1.0).abs() < 1e-12);
        assert!(conjugate_constants(0.0, None).is_err());
    }

    #[test]
    fn constants_from_spectrum() {
        let q = DMatrix::from_diagonal(&v(&[1.0, 3.0, 2.0]));
        let f = ConvexFunction::quadratic(q, Vector::zeros(3)).unwrap();
        assert!((f.strong_convexity() - 1.0).abs() < 1e-12);
        assert!((f.smoothness().unwrap() - 3.0).abs() < 1e-12);
        let not_psd = DMatrix::from_diagonal(&v(&[1.0, -1.0]));
        assert!(ConvexFunction::quadratic(not_psd, Vector::zeros(2)).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(ConvexFunction::quadratic(asym, Vector::zeros(2)).is_err());
    }

    fn catalog(seed: &[f64]) -> Vec<ConvexFunction> {
        let n = 3;
        let a = DMatrix::from_iterator(4, n, seed.iter().copied().cycle().take(4 * n));
        vec![
            ConvexFunction::zero(n),
            ConvexFunction::quadratic(psd(seed, n), v(&seed[..3])).unwrap(),
            ConvexFunction::l1(n, 0.7).unwrap(),
            ConvexFunction::least_squares(a, v(&seed[1..5])).unwrap(),
            ConvexFunction::indicator(ConvexSet::cube(n, 0.5).unwrap()),
            ConvexFunction::indicator(ConvexSet::ball(v(&[0.1, 0.0, -0.2]), 1.0).unwrap()),
            ConvexFunction::indicator(ConvexSet::simplex(n, 1.0).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn moreau_identity(
            seed in prop::collection::vec(-2.0f64..2.0, 9),
            vv in prop::collection::vec(-5.0f64..5.0, 3),
            lambda in 0.05f64..5.0,
        ) {
            let x = Vector::from_vec(vv);
            let whole = ConvexSet::whole(3);
            for f in catalog(&seed) {
                let p = f.prox(lambda, &x, &whole).unwrap();
                let d = f.conjugate_prox(1.0 / lambda, &(&x / lambda)).unwrap();
                let err = (&p + d * lambda - &x).norm();
                prop_assert!(err <= 1e-8 * x.norm().max(1.0), "{:?}: {}", f.kind(), err);
            }
        }

        #[test]
        fn prox_is_firmly_nonexpansive(
            seed in prop::collection::vec(-2.0f64..2.0, 9),
            v1 in prop::collection::vec(-5.0f64..5.0, 3),
            v2 in prop::collection::vec(-5.0f64..5.0, 3),
            lambda in 0.05f64..5.0,
        ) {
            let (a, b) = (Vector::from_vec(v1), Vector::from_vec(v2));
            let sets = [ConvexSet::whole(3), ConvexSet::cube(3, 1.0).unwrap()];
            for f in catalog(&seed) {
                for set in &sets {
                    let (pa, pb) = match (f.prox(lambda, &a, set), f.prox(lambda, &b, set)) {
                        (Ok(pa), Ok(pb)) => (pa, pb),
                        _ => continue,
                    };
                    prop_assert!(set.contains(&pa, MEMBERSHIP_TOL));
                    let d = &pa - &pb;
                    prop_assert!(d.norm_squared() <= (&a - &b).dot(&d) + 1e-9);
                }
            }
        }

        #[test]
        fn gradient_monotonicity_bounds(
            seed in prop::collection::vec(-2.0f64..2.0, 9),
            x in prop::collection::vec(-3.0f64..3.0, 3),
            y in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            let (x, y) = (Vector::from_vec(x), Vector::from_vec(y));
            for f in catalog(&seed).into_iter().filter(|f| f.is_smooth()) {
                let d = &x - &y;
                let ip = (f.gradient(&x).unwrap() - f.gradient(&y).unwrap()).dot(&d);
                let tol = 1e-9 * (1.0 + d.norm_squared() * f.smoothness().unwrap());
                prop_assert!(ip >= f.strong_convexity() * d.norm_squared() - tol);
                prop_assert!(ip <= f.smoothness().unwrap() * d.norm_squared() + tol);
            }
        }

        #[test]
        fn gradient_matches_finite_differences(
            seed in prop::collection::vec(-2.0f64..2.0, 9),
            x in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            let x = Vector::from_vec(x);
            for f in catalog(&seed).into_iter().filter(|f| f.is_smooth()) {
                let g = f.gradient(&x).unwrap();
                let fd = central_difference(&f, &x);
                prop_assert!((&g - &fd).norm() <= 1e-4 * g.norm().max(1.0));
            }
        }

        #[test]
        fn projection_is_idempotent(x in prop::collection::vec(-5.0f64..5.0, 3)) {
            let x = Vector::from_vec(x);
            let sets = [
                ConvexSet::cube(3, 1.0).unwrap(),
                ConvexSet::ball(v(&[0.5, 0.0, 0.0]), 1.0).unwrap(),
                ConvexSet::halfspace(v(&[1.0, -2.0, 0.5]), 0.3).unwrap(),
                ConvexSet::affine(DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]), v(&[1.0])).unwrap(),
                ConvexSet::simplex(3, 2.0).unwrap(),
                ConvexSet::orthant(3),
            ];
            for set in &sets {
                let p = set.project(&x).unwrap();
                prop_assert!(set.contains(&p, 1e-9));
                prop_assert!((set.project(&p).unwrap() - &p).norm() <= 1e-12 * p.norm().max(1.0));
            }
        }
    }
}
