//! Averaged, nonexpansive and contractive operators on `R^n`.
//!
//! An operator `T` is α-averaged when `T = (1 - α) I + α G` for some
//! nonexpansive `G`. Operators here are single-valued closures carrying the
//! metadata the convergence analysis needs: the averagedness constant, an
//! optional contraction factor and an optional bound on the norm of the image.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;

/// Pure evaluation closure `R^n -> R^n`.
pub type Map = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Absolute slack used by every sampled inequality check.
pub const CHECK_SLACK: f64 = 1e-9;

pub fn map<F>(f: F) -> Map
where
    F: Fn(&Vector) -> Vector + Send + Sync + 'static,
{
    Arc::new(f)
}

pub fn identity() -> Map {
    map(|x: &Vector| x.clone())
}

#[derive(Clone)]
pub struct AveragedOperator {
    eval: Map,
    alpha: f64,
    contraction: Option<f64>,
    image_bound: Option<f64>,
    dim: usize,
}

impl fmt::Debug for AveragedOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AveragedOperator")
            .field("alpha", &self.alpha)
            .field("contraction", &self.contraction)
            .field("image_bound", &self.image_bound)
            .field("dim", &self.dim)
            .finish()
    }
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must lie in (0,1), got {v}")))
    }
}

impl AveragedOperator {
    /// Wrap a map that is already known (or declared) to be α-averaged.
    pub fn new(dim: usize, alpha: f64, eval: Map) -> Result<Self> {
        check_open_unit("alpha", alpha)?;
        if dim == 0 {
            return Err(Error::param("operator dimension must be positive"));
        }
        Ok(Self {
            eval,
            alpha,
            contraction: None,
            image_bound: None,
            dim,
        })
    }

    pub fn with_contraction(mut self, factor: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&factor) {
            return Err(Error::param(format!("contraction factor must lie in [0,1), got {factor}")));
        }
        self.contraction = Some(factor);
        Ok(self)
    }

    pub fn with_image_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::param(format!("image bound must be finite and >= 0, got {bound}")));
        }
        self.image_bound = Some(bound);
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn contraction(&self) -> Option<f64> {
        self.contraction
    }

    pub fn image_bound(&self) -> Option<f64> {
        self.image_bound
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The raw evaluation closure, without dimension or image-bound checks.
    pub fn as_map(&self) -> &Map {
        &self.eval
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.dim {
            return Err(Error::param(format!(
                "dimension mismatch: operator acts on R^{}, got R^{}",
                self.dim,
                x.len()
            )));
        }
        let y = (self.eval)(x);
        if y.len() != self.dim {
            return Err(Error::Contract(format!(
                "operator changed dimension from {} to {}",
                self.dim,
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step: None,
                msg: "operator produced a non-finite value".into(),
            });
        }
        if let Some(bound) = self.image_bound {
            let norm = y.norm();
            if norm > bound + CHECK_SLACK * bound.max(1.0) {
                return Err(Error::Contract(format!(
                    "image bound violated: |T(x)| = {norm} > {bound}"
                )));
            }
        }
        Ok(y)
    }

    /// The nonexpansive part `G(x) = x + (T(x) - x) / α`.
    pub fn nonexpansive_part(&self, x: &Vector) -> Result<Vector> {
        let t = self.apply(x)?;
        Ok(x + (t - x) / self.alpha)
    }

    pub fn residual(&self, x: &Vector) -> Result<ResidualPair> {
        let t = self.apply(x)?;
        Ok(ResidualPair::from_step(x, &t, self.alpha))
    }
}

/// Fixed-point residuals of `T` and of its nonexpansive part `G` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPair {
    pub g_residual: f64,
    pub t_residual: f64,
}

impl ResidualPair {
    /// Residuals of a step `x -> t` taken by an α-averaged map.
    pub fn from_step(x: &Vector, t: &Vector, alpha: f64) -> Self {
        let t_residual = (t - x).norm();
        Self {
            g_residual: t_residual / alpha,
            t_residual,
        }
    }
}

/// `T = (1 - α) I + α G` for a nonexpansive `g`.
pub fn relax(g: Map, alpha: f64, dim: usize) -> Result<AveragedOperator> {
    check_open_unit("alpha", alpha)?;
    let eval = map(move |x: &Vector| x * (1.0 - alpha) + g(x) * alpha);
    AveragedOperator::new(dim, alpha, eval)
}

/// Averagedness constant of `T1 ∘ T2`.
pub fn composed_alpha(a1: f64, a2: f64) -> f64 {
    (a1 + a2 - 2.0 * a1 * a2) / (1.0 - a1 * a2)
}

/// `T = T1 ∘ T2`. Contraction factors multiply, with a factor lacking one
/// counting as nonexpansive (`L = 1`); the image bound is inherited from `t1`.
pub fn compose_averaged(t1: &AveragedOperator, t2: &AveragedOperator) -> Result<AveragedOperator> {
    if t1.dim != t2.dim {
        return Err(Error::param(format!(
            "cannot compose operators on R^{} and R^{}",
            t1.dim, t2.dim
        )));
    }
    let alpha = composed_alpha(t1.alpha, t2.alpha);
    assert!(alpha > 0.0 && alpha < 1.0, "composition left (0,1): {alpha}");
    let contraction = match (t1.contraction, t2.contraction) {
        (None, None) => None,
        (a, b) => Some(a.unwrap_or(1.0) * b.unwrap_or(1.0)),
    };
    let (f1, f2) = (t1.eval.clone(), t2.eval.clone());
    Ok(AveragedOperator {
        eval: map(move |x: &Vector| f1(&f2(x))),
        alpha,
        contraction,
        image_bound: t1.image_bound,
        dim: t1.dim,
    })
}

pub fn fixed_point_residual(t: &AveragedOperator, x: &Vector) -> Result<ResidualPair> {
    t.residual(x)
}

/// Reflected resolvent `C = 2R - I`.
pub fn cayley_of_resolvent(r: Map) -> Map {
    map(move |x: &Vector| r(x) * 2.0 - x)
}

/// Outcome of a sampled averagedness audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragednessCheck {
    pub holds: bool,
    /// Smallest value of `rhs - lhs` over all pairs; negative means violation.
    pub worst_margin: f64,
}

/// Audit `‖Tx − Ty‖² ≤ ‖x − y‖² − ((1−α)/α)‖(I−T)x − (I−T)y‖²` on sample pairs.
pub fn check_averaged<F>(t: F, alpha: f64, pairs: &[(Vector, Vector)]) -> Result<AveragednessCheck>
where
    F: Fn(&Vector) -> Vector,
{
    check_open_unit("alpha", alpha)?;
    if pairs.is_empty() {
        return Err(Error::param("averagedness check needs at least one pair"));
    }
    let weight = (1.0 - alpha) / alpha;
    let mut worst = f64::INFINITY;
    for (x, y) in pairs {
        let (tx, ty) = (t(x), t(y));
        let lhs = (&tx - &ty).norm_squared();
        let gap = (x - &tx) - (y - &ty);
        let rhs = (x - y).norm_squared() - weight * gap.norm_squared();
        worst = worst.min(rhs - lhs);
    }
    Ok(AveragednessCheck {
        holds: worst >= -CHECK_SLACK,
        worst_margin: worst,
    })
}

/// Largest observed `‖Tx − Ty‖ − L‖x − y‖` over the pairs.
pub fn contraction_excess<F>(t: F, factor: f64, pairs: &[(Vector, Vector)]) -> f64
where
    F: Fn(&Vector) -> Vector,
{
    pairs
        .iter()
        .map(|(x, y)| (t(x) - t(y)).norm() - factor * (x - y).norm())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Both sides of `‖(1−θ)a + θb‖² = (1−θ)‖a‖² + θ‖b‖² − θ(1−θ)‖a − b‖²`.
pub fn convex_combination_identity(theta: f64, a: &Vector, b: &Vector) -> (f64, f64) {
    let lhs = (a * (1.0 - theta) + b * theta).norm_squared();
    let rhs = (1.0 - theta) * a.norm_squared() + theta * b.norm_squared()
        - theta * (1.0 - theta) * (a - b).norm_squared();
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn neg() -> Map {
        map(|x: &Vector| -x)
    }

    fn scale(c: f64) -> Map {
        map(move |x: &Vector| x * c)
    }

    #[test]
    fn relax_examples() {
        let t = relax(neg(), 0.5, 1).unwrap();
        assert_eq!(t.apply(&v(&[1.0])).unwrap(), v(&[0.0]));

        let t = relax(identity(), 0.3, 2).unwrap();
        let y = t.apply(&v(&[3.0, -2.0])).unwrap();
        assert!((y - v(&[3.0, -2.0])).norm() < 1e-15);

        // f = ½‖x‖², M = 1, λ = 0.5: gradient step is relax(I - 2∇f, λM/2)
        let g = map(|x: &Vector| x - x * 2.0);
        let t = relax(g, 0.25, 1).unwrap();
        assert!((t.apply(&v(&[4.0])).unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn relax_rejects_bad_alpha() {
        assert!(matches!(relax(identity(), 1.0, 1), Err(Error::Parameter(_))));
        assert!(matches!(relax(identity(), 0.0, 1), Err(Error::Parameter(_))));
        assert!(matches!(relax(identity(), -0.2, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn composition_constants() {
        assert!((composed_alpha(0.5, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert!((composed_alpha(1.0 / 3.0, 0.5) - 0.6).abs() < 1e-15);
        let lm = 0.3;
        assert!((composed_alpha(0.5, lm / 2.0) - 1.0 / (2.0 - lm / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn composition_propagates_metadata() {
        let t1 = AveragedOperator::new(2, 0.5, identity())
            .unwrap()
            .with_image_bound(3.0)
            .unwrap();
        let t2 = AveragedOperator::new(2, 0.5, scale(0.5)).unwrap().with_contraction(0.5).unwrap();
        let c = compose_averaged(&t1, &t2).unwrap();
        assert_eq!(c.contraction(), Some(0.5));
        assert_eq!(c.image_bound(), Some(3.0));
        let t3 = t2.clone().with_contraction(0.8).unwrap();
        assert!((compose_averaged(&t2, &t3).unwrap().contraction().unwrap() - 0.4).abs() < 1e-15);
        let plain = AveragedOperator::new(2, 0.5, identity()).unwrap();
        assert_eq!(compose_averaged(&plain, &plain).unwrap().contraction(), None);
        let other = AveragedOperator::new(3, 0.5, identity()).unwrap();
        assert!(matches!(compose_averaged(&plain, &other), Err(Error::Parameter(_))));
    }

    #[test]
    fn apply_examples_and_errors() {
        let half = AveragedOperator::new(1, 0.5, scale(0.5)).unwrap();
        assert_eq!(half.apply(&v(&[4.0])).unwrap(), v(&[2.0]));
        let t = relax(neg(), 0.5, 2).unwrap();
        assert_eq!(t.apply(&v(&[1.0, 1.0])).unwrap(), v(&[0.0, 0.0]));

        let ball = map(|x: &Vector| {
            let n = x.norm();
            if n > 1.0 {
                x / n
            } else {
                x.clone()
            }
        });
        let proj = AveragedOperator::new(2, 0.5, ball).unwrap().with_image_bound(1.0).unwrap();
        let id = AveragedOperator::new(2, 0.5, identity()).unwrap();
        let y = compose_averaged(&proj, &id).unwrap().apply(&v(&[3.0, 4.0])).unwrap();
        assert!((y - v(&[0.6, 0.8])).norm() < 1e-15);

        assert!(matches!(half.apply(&v(&[1.0, 2.0])), Err(Error::Parameter(_))));
        let blowup = AveragedOperator::new(1, 0.5, map(|x: &Vector| x * f64::INFINITY)).unwrap();
        assert!(matches!(blowup.apply(&v(&[1.0])), Err(Error::Numerical { .. })));
        let bounded = AveragedOperator::new(1, 0.5, identity())
            .unwrap()
            .with_image_bound(1.0)
            .unwrap();
        assert!(matches!(bounded.apply(&v(&[2.0])), Err(Error::Contract(_))));
    }

    #[test]
    fn residual_examples() {
        let t = relax(neg(), 0.5, 1).unwrap();
        let r = fixed_point_residual(&t, &v(&[1.0])).unwrap();
        assert_eq!((r.g_residual, r.t_residual), (2.0, 1.0));
        let r = fixed_point_residual(&t, &v(&[0.0])).unwrap();
        assert_eq!((r.g_residual, r.t_residual), (0.0, 0.0));
        let half = AveragedOperator::new(1, 0.5, scale(0.5)).unwrap();
        let r = fixed_point_residual(&half, &v(&[4.0])).unwrap();
        assert_eq!((r.g_residual, r.t_residual), (4.0, 2.0));
    }

    #[test]
    fn cayley_examples() {
        let lambda = 1.0;
        let c = cayley_of_resolvent(map(move |x: &Vector| x / (1.0 + lambda)));
        assert_eq!(c(&v(&[5.0, -1.0])), v(&[0.0, 0.0]));
        let c = cayley_of_resolvent(identity());
        assert_eq!(c(&v(&[2.5])), v(&[2.5]));
        let c = cayley_of_resolvent(map(|x: &Vector| x.map(|t| t.max(1.0))));
        assert_eq!(c(&v(&[0.0])), v(&[2.0]));
    }

    #[test]
    fn check_averaged_examples() {
        let pairs: Vec<_> = (0..50)
            .map(|i| {
                let s = i as f64;
                (v(&[s.sin(), s.cos()]), v(&[(2.0 * s).cos(), s * 0.1]))
            })
            .collect();
        let id = check_averaged(|x: &Vector| x.clone(), 0.5, &pairs).unwrap();
        assert!(id.holds);
        assert!(id.worst_margin.abs() < 1e-12);
        let n = check_averaged(|x: &Vector| -x, 0.5, &pairs).unwrap();
        assert!(!n.holds);
        let h = check_averaged(|x: &Vector| x * 0.5, 0.25, &pairs).unwrap();
        assert!(h.holds);
        assert!(check_averaged(|x: &Vector| x.clone(), 0.5, &[]).is_err());
    }
}
