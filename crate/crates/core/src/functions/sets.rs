use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::Vector;

/// Closed convex subsets of `R^n` with exact Euclidean projections.
#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    WholeSpace,
    /// Coordinatewise bounds; infinite bounds are allowed.
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
    /// `{x : <normal, x> <= offset}`
    Halfspace { normal: Vector, offset: f64 },
    /// `{x : A x = b}`, with the pseudo-inverse of `A` cached.
    Affine {
        matrix: DMatrix<f64>,
        rhs: Vector,
        pinv: DMatrix<f64>,
    },
    /// `{x >= 0 : sum(x) = total}`
    Simplex { total: f64 },
    NonnegativeOrthant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSet {
    kind: SetKind,
    dim: usize,
}

fn finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl ConvexSet {
    pub fn whole(dim: usize) -> Self {
        Self { kind: SetKind::WholeSpace, dim }
    }

    pub fn orthant(dim: usize) -> Self {
        Self { kind: SetKind::NonnegativeOrthant, dim }
    }

    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::param("box bounds have different lengths"));
        }
        for (l, u) in lower.iter().zip(upper.iter()) {
            if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                return Err(Error::param(format!("empty box interval [{l}, {u}]")));
            }
        }
        let dim = lower.len();
        Ok(Self { kind: SetKind::Box { lower, upper }, dim })
    }

    /// `[-radius, radius]^dim`
    pub fn cube(dim: usize, radius: f64) -> Result<Self> {
        Self::boxed(Vector::from_element(dim, -radius), Vector::from_element(dim, radius))
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) || !finite(&center) {
            return Err(Error::param(format!("invalid ball radius {radius}")));
        }
        let dim = center.len();
        Ok(Self { kind: SetKind::Ball { center, radius }, dim })
    }

    pub fn halfspace(normal: Vector, offset: f64) -> Result<Self> {
        if normal.norm() == 0.0 || !finite(&normal) || !offset.is_finite() {
            return Err(Error::param("halfspace needs a finite nonzero normal"));
        }
        let dim = normal.len();
        Ok(Self { kind: SetKind::Halfspace { normal, offset }, dim })
    }

    pub fn affine(matrix: DMatrix<f64>, rhs: Vector) -> Result<Self> {
        if matrix.nrows() != rhs.len() || matrix.nrows() == 0 {
            return Err(Error::param("affine set: A and b have incompatible shapes"));
        }
        let pinv = matrix
            .clone()
            .pseudo_inverse(1e-12 * matrix.norm().max(1.0))
            .map_err(|e| Error::param(format!("affine set: {e}")))?;
        let x0 = &pinv * &rhs;
        let resid = (&matrix * &x0 - &rhs).norm();
        if resid > 1e-9 * rhs.norm().max(1.0) {
            return Err(Error::param(format!("affine set is empty: b is not in im A (residual {resid:e})")));
        }
        let dim = matrix.ncols();
        Ok(Self { kind: SetKind::Affine { matrix, rhs, pinv }, dim })
    }

    pub fn simplex(dim: usize, total: f64) -> Result<Self> {
        if dim == 0 || !(total >= 0.0 && total.is_finite()) {
            return Err(Error::param("simplex needs dim > 0 and a finite total >= 0"));
        }
        Ok(Self { kind: SetKind::Simplex { total }, dim })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_whole(&self) -> bool {
        matches!(self.kind, SetKind::WholeSpace)
    }

    /// `max ‖x‖` over the set, for compact sets.
    pub fn norm_bound(&self) -> Option<f64> {
        match &self.kind {
            SetKind::Box { lower, upper } => {
                let sq: f64 = lower
                    .iter()
                    .zip(upper.iter())
                    .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                    .sum();
                sq.is_finite().then(|| sq.sqrt())
            }
            SetKind::Ball { center, radius } => Some(center.norm() + radius),
            SetKind::Simplex { total } => Some(*total),
            _ => None,
        }
    }

    pub fn is_compact(&self) -> bool {
        self.norm_bound().is_some()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match &self.kind {
            SetKind::WholeSpace => true,
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            SetKind::Ball { center, radius } => (x - center).norm() <= radius + tol,
            SetKind::Halfspace { normal, offset } => normal.dot(x) <= offset + tol * normal.norm(),
            SetKind::Affine { matrix, rhs, .. } => (matrix * x - rhs).norm() <= tol * rhs.norm().max(1.0),
            SetKind::Simplex { total } => {
                x.iter().all(|v| *v >= -tol) && (x.sum() - total).abs() <= tol * (self.dim as f64)
            }
            SetKind::NonnegativeOrthant => x.iter().all(|v| *v >= -tol),
        }
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.dim {
            return Err(Error::param(format!(
                "projection onto a set in R^{} of a point in R^{}",
                self.dim,
                x.len()
            )));
        }
        Ok(match &self.kind {
            SetKind::WholeSpace => x.clone(),
            SetKind::Box { lower, upper } => {
                Vector::from_iterator(self.dim, x.iter().zip(lower.iter().zip(upper.iter())).map(|(v, (l, u))| v.clamp(*l, *u)))
            }
            SetKind::Ball { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center + d * (*radius / n)
                }
            }
            SetKind::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x - normal * (excess / normal.norm_squared())
                }
            }
            SetKind::Affine { matrix, rhs, pinv } => x - pinv * (matrix * x - rhs),
            SetKind::Simplex { total } => project_simplex(x, *total),
            SetKind::NonnegativeOrthant => x.map(|v| v.max(0.0)),
        })
    }
}

/// Sort-based projection onto `{x >= 0, sum x = total}`.
fn project_simplex(x: &Vector, total: f64) -> Vector {
    let mut sorted: Vec<f64> = x.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - total) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    x.map(|v| (v - theta).max(0.0))
}
