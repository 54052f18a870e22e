//! Sampled time-varying problems: instances, streams, scenario generators and
//! empirical estimates of how fast the problems move.

mod config;
mod scenarios;

pub use config::{parse_real, Algorithm, Family, ScenarioConfig};
pub use scenarios::make_scenario;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ConvexFunction, ConvexSet, FunctionKind, SetKind};
use crate::operators::Vector;
use crate::oracle::ReferenceSolution;

/// `A x <= b` or `A x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub a: DMatrix<f64>,
    pub b: Vector,
}

/// `A x + B z = c`, the coupling of a two-block problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmCoupling {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: Vector,
}

/// Ground truth of a localization sample, kept for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub anchors: Vec<[f64; 2]>,
    pub truth: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub k: usize,
    pub t: f64,
    pub f: ConvexFunction,
    /// Composite term; for two-block problems this is the function of `z`.
    pub g: Option<ConvexFunction>,
    pub feasible_set: ConvexSet,
    pub linear_ineq: Option<LinearConstraint>,
    pub linear_eq: Option<LinearConstraint>,
    pub admm: Option<AdmmCoupling>,
    pub slater_point: Option<Vector>,
    pub snapshot: Option<Snapshot>,
}

impl ProblemInstance {
    pub fn new(k: usize, t: f64, f: ConvexFunction, feasible_set: ConvexSet) -> Self {
        Self {
            k,
            t,
            f,
            g: None,
            feasible_set,
            linear_ineq: None,
            linear_eq: None,
            admm: None,
            slater_point: None,
            snapshot: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// The composite term, or the zero function on the right space.
    pub fn g_or_zero(&self) -> ConvexFunction {
        match (&self.g, &self.admm) {
            (Some(g), _) => g.clone(),
            (None, Some(c)) => ConvexFunction::zero(c.b.ncols()),
            (None, None) => ConvexFunction::zero(self.dim()),
        }
    }

    /// `f(x) + g(x)` for single-block problems (`+∞` outside the feasible set).
    pub fn objective(&self, x: &Vector) -> Result<f64> {
        if !self.feasible_set.contains(x, crate::functions::MEMBERSHIP_TOL) {
            return Ok(f64::INFINITY);
        }
        let g = match &self.g {
            Some(g) => g.eval(x)?,
            None => 0.0,
        };
        Ok(self.f.eval(x)? + g)
    }

    /// Structural check that the instance carries what `algorithm` needs.
    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        let n = self.dim();
        if self.feasible_set.dim() != n {
            return Err(Error::config("feasible set and f have different dimensions"));
        }
        if let Some(g) = &self.g {
            if self.admm.is_none() && g.dim() != n {
                return Err(Error::config("g and f have different dimensions"));
            }
        }
        let needs_smooth_f = || {
            if self.f.is_smooth() {
                Ok(())
            } else {
                Err(Error::unsupported(format!("{algorithm} needs a smooth f (M < ∞)")))
            }
        };
        let needs_strong_f = || {
            if self.f.strong_convexity() > 0.0 {
                Ok(())
            } else {
                Err(Error::unsupported(format!("{algorithm} needs a strongly convex f (m > 0)")))
            }
        };
        match algorithm {
            Algorithm::ProjectedGradient => {
                needs_smooth_f()?;
                if self.g.as_ref().is_some_and(|g| !g.is_zero()) {
                    return Err(Error::config("projected gradient takes no composite term"));
                }
            }
            Algorithm::ProximalPoint => {
                if self.g.as_ref().is_some_and(|g| !g.is_zero()) {
                    return Err(Error::config("proximal point takes no composite term"));
                }
            }
            Algorithm::ForwardBackward => needs_smooth_f()?,
            Algorithm::DouglasRachford => {}
            Algorithm::DualAscentInequality => {
                needs_strong_f()?;
                let c = self
                    .linear_ineq
                    .as_ref()
                    .ok_or_else(|| Error::config("dual ascent (inequality) needs A x <= b"))?;
                check_shape(c, n)?;
                let xbar = self
                    .slater_point
                    .as_ref()
                    .ok_or_else(|| Error::config("dual ascent (inequality) needs a Slater point"))?;
                if xbar.len() != n || !self.feasible_set.contains(xbar, 0.0) {
                    return Err(Error::config("Slater point must lie in the feasible set"));
                }
                let slack = &c.b - &c.a * xbar;
                if slack.iter().any(|s| *s <= 0.0) {
                    return Err(Error::config("Slater point is not strictly feasible"));
                }
            }
            Algorithm::DualAscentEquality => {
                needs_strong_f()?;
                let c = self
                    .linear_eq
                    .as_ref()
                    .ok_or_else(|| Error::config("dual ascent (equality) needs A x = b"))?;
                check_shape(c, n)?;
            }
            Algorithm::Admm => {
                let c = self.admm.as_ref().ok_or_else(|| Error::config("ADMM needs a coupling A x + B z = c"))?;
                if c.a.ncols() != n || c.a.nrows() != c.c.len() || c.b.nrows() != c.c.len() {
                    return Err(Error::config("ADMM coupling has inconsistent shapes"));
                }
                if let Some(g) = &self.g {
                    if g.dim() != c.b.ncols() {
                        return Err(Error::config("g does not act on the z block"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_shape(c: &LinearConstraint, n: usize) -> Result<()> {
    if c.a.ncols() != n || c.a.nrows() != c.b.len() {
        return Err(Error::config("linear constraint has inconsistent shapes"));
    }
    Ok(())
}

/// How the tracking error aggregates the readout vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingForm {
    /// `‖x_k − x*_k‖`
    Norm,
    /// `Σ_i ‖x_(i),k − x*_(i)(k)‖²`, which for stacked blocks is `‖x_k − x*_k‖²`.
    SquaredSum,
}

impl TrackingForm {
    pub fn measure(self, x: &Vector, x_star: &Vector) -> f64 {
        let d = (x - x_star).norm();
        match self {
            TrackingForm::Norm => d,
            TrackingForm::SquaredSum => d * d,
        }
    }
}

/// Which recorded variable the tracking error looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Primal,
    /// The `z` block of a two-block problem (positions in localization).
    Auxiliary,
}

pub type Sampler = Arc<dyn Fn(usize) -> ProblemInstance + Send + Sync>;

/// `k ↦ instance_k` for `k = 1..=horizon`; samplers are pure in `k`.
#[derive(Clone)]
pub struct ProblemStream {
    name: String,
    family: Option<Family>,
    horizon: usize,
    period: f64,
    seed: u64,
    sampler: Sampler,
    pub tracking: TrackingForm,
    pub readout: Readout,
}

impl fmt::Debug for ProblemStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemStream")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("period", &self.period)
            .field("seed", &self.seed)
            .finish()
    }
}

impl ProblemStream {
    pub fn new<F>(name: impl Into<String>, horizon: usize, period: f64, seed: u64, sampler: F) -> Self
    where
        F: Fn(usize) -> ProblemInstance + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            family: None,
            horizon,
            period,
            seed,
            sampler: Arc::new(sampler),
            tracking: TrackingForm::Norm,
            readout: Readout::Primal,
        }
    }

    /// The same instance at every `k` (timestamps still advance).
    pub fn constant(name: impl Into<String>, instance: ProblemInstance, horizon: usize) -> Self {
        Self::new(name, horizon, 1.0, 0, move |k| ProblemInstance { k, t: k as f64, ..instance.clone() })
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = Some(family);
        self
    }

    pub fn with_tracking(mut self, tracking: TrackingForm, readout: Readout) -> Self {
        self.tracking = tracking;
        self.readout = readout;
        self
    }

    /// Same sampler, different number of samples.
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> Option<Family> {
        self.family
    }

    /// Number of samples; a run over the stream takes `horizon − 1` steps.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample(&self, k: usize) -> Result<ProblemInstance> {
        if k == 0 || k > self.horizon {
            return Err(Error::param(format!("sample index {k} outside 1..={}", self.horizon)));
        }
        Ok((self.sampler)(k))
    }
}

/// Measured counterparts of the path variation `δ`, the squared variation
/// `d` and the functional change `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationEstimate {
    /// Max consecutive distance between fixed points of the iterated operators.
    pub delta_hat: f64,
    /// Same, for the primal optimizers.
    pub primal_delta_hat: f64,
    /// Needs an iterate trajectory.
    pub d_hat: Option<f64>,
    /// Only defined when every sample shares one feasible set.
    pub sigma_hat: Option<f64>,
    pub delta_steps: Vec<f64>,
    /// `(‖x_{τ+1} − x*_{τ+1}‖² − ‖x_{τ+1} − x*_τ‖²)⁺` per step.
    pub d_steps: Vec<f64>,
    pub sigma_steps: Vec<f64>,
}

/// Probe points drawn inside a compact box when `σ` has no closed form.
const SIGMA_RANDOM_PROBES: usize = 64;

/// Estimate `δ`, `d` and `σ` from an oracle trajectory.
///
/// `states` are the iterates of the running algorithm (the variable the
/// operators act on) and `primal` its primal iterates; either may be omitted.
pub fn estimate_variation(
    stream: &ProblemStream,
    oracle: &[ReferenceSolution],
    states: Option<&[Vector]>,
    primal: Option<&[Vector]>,
) -> Result<VariationEstimate> {
    if oracle.is_empty() {
        return Err(Error::param("empty oracle trajectory"));
    }
    if oracle.len() > stream.horizon() {
        return Err(Error::param("oracle trajectory is longer than the stream"));
    }
    let steps = |get: &dyn Fn(&ReferenceSolution) -> &Vector| -> Vec<f64> {
        oracle.windows(2).map(|w| (get(&w[1]) - get(&w[0])).norm()).collect()
    };
    let delta_steps = steps(&|r| &r.state_star);
    let primal_steps = steps(&|r| &r.x_star);
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);

    let (d_hat, d_steps) = match states {
        None => (None, Vec::new()),
        Some(xs) => {
            if xs.len() > oracle.len() {
                return Err(Error::param(format!(
                    "oracle covers {} samples but the run has {} iterates",
                    oracle.len(),
                    xs.len()
                )));
            }
            let gaps: Vec<f64> = (0..xs.len().saturating_sub(1))
                .map(|tau| {
                    let next = &xs[tau + 1];
                    let a = (next - &oracle[tau + 1].state_star).norm_squared();
                    let b = (next - &oracle[tau].state_star).norm_squared();
                    (a - b).max(0.0)
                })
                .collect();
            (Some(max(&gaps).sqrt()), gaps)
        }
    };

    let (sigma_hat, sigma_steps) = match sigma_estimate(stream, oracle, primal)? {
        Some(s) => (Some(max(&s)), s),
        None => (None, Vec::new()),
    };

    Ok(VariationEstimate {
        delta_hat: max(&delta_steps),
        primal_delta_hat: max(&primal_steps),
        d_hat,
        sigma_hat,
        delta_steps,
        d_steps,
        sigma_steps,
    })
}

/// `max |h_{k+1}(x) − h_k(x)|` with `h_k = f_k + g_k − F*_k`, so that optimal
/// values are aligned across samples.
fn sigma_estimate(
    stream: &ProblemStream,
    oracle: &[ReferenceSolution],
    primal: Option<&[Vector]>,
) -> Result<Option<Vec<f64>>> {
    let instances = (1..=oracle.len()).map(|k| stream.sample(k)).collect::<Result<Vec<_>>>()?;
    let set = instances[0].feasible_set.clone();
    if instances.iter().any(|i| i.feasible_set != set || i.admm.is_some()) {
        return Ok(None);
    }
    let mut probes: Vec<Vector> = oracle.iter().map(|r| r.x_star.clone()).collect();
    if let Some(xs) = primal {
        probes.extend(xs.iter().cloned());
    }
    if let SetKind::Box { lower, upper } = set.kind() {
        if set.is_compact() {
            let mut rng = ChaCha8Rng::seed_from_u64(stream.seed());
            rng.set_stream(0x5167);
            for _ in 0..SIGMA_RANDOM_PROBES {
                probes.push(Vector::from_iterator(
                    set.dim(),
                    lower.iter().zip(upper.iter()).map(|(l, u)| rng.random_range(*l..=*u)),
                ));
            }
        }
    }
    let mut out = Vec::with_capacity(instances.len().saturating_sub(1));
    for w in 0..instances.len().saturating_sub(1) {
        let (a, b) = (&instances[w], &instances[w + 1]);
        let shift = oracle[w + 1].objective - oracle[w].objective;
        if let Some(exact) = affine_change_over_box(a, b, shift)? {
            out.push(exact);
            continue;
        }
        let mut worst: f64 = 0.0;
        for x in &probes {
            let (ha, hb) = (a.objective(x)?, b.objective(x)?);
            if ha.is_finite() && hb.is_finite() {
                worst = worst.max((hb - ha - shift).abs());
            }
        }
        out.push(worst);
    }
    Ok(Some(out))
}

/// When the change `h_{k+1} − h_k` is affine (same curvature, same composite
/// term) its maximum over a compact box is attained at a vertex.
fn affine_change_over_box(a: &ProblemInstance, b: &ProblemInstance, shift: f64) -> Result<Option<f64>> {
    let (lower, upper) = match a.feasible_set.kind() {
        SetKind::Box { lower, upper } if a.feasible_set.is_compact() => (lower, upper),
        _ => return Ok(None),
    };
    if a.g != b.g {
        return Ok(None);
    }
    let same_curvature = match (a.f.kind(), b.f.kind()) {
        (FunctionKind::Quadratic { hessian: h1, .. }, FunctionKind::Quadratic { hessian: h2, .. }) => h1 == h2,
        (FunctionKind::LeastSquares { matrix: m1, .. }, FunctionKind::LeastSquares { matrix: m2, .. }) => m1 == m2,
        _ => false,
    };
    if !same_curvature {
        return Ok(None);
    }
    let (_, qa, ca) = a.f.quadratic_form().expect("smooth");
    let (_, qb, cb) = b.f.quadratic_form().expect("smooth");
    let slope = qb - qa;
    let offset = cb - ca - shift;
    let (mut hi, mut lo) = (offset, offset);
    for i in 0..slope.len() {
        let (s, l, u) = (slope[i], lower[i], upper[i]);
        hi += (s * l).max(s * u);
        lo += (s * l).min(s * u);
    }
    Ok(Some(hi.abs().max(lo.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn sample_range_and_determinism() {
        let cfg = ScenarioConfig::from_pairs(&[("family", "moving_quadratic"), ("n", "2"), ("drift", "0.01")]).unwrap();
        let stream = make_scenario(&cfg).unwrap();
        assert!(stream.sample(0).is_err());
        assert!(stream.sample(stream.horizon() + 1).is_err());
        assert_eq!(stream.sample(5).unwrap(), stream.sample(5).unwrap());
    }

    #[test]
    fn slater_point_must_be_strict() {
        let f = ConvexFunction::squared_distance(&v(&[0.0]), 1.0).unwrap();
        let mut inst = ProblemInstance::new(1, 1.0, f, ConvexSet::whole(1));
        inst.linear_ineq = Some(LinearConstraint { a: DMatrix::from_element(1, 1, -1.0), b: v(&[-1.0]) });
        assert!(inst.validate(Algorithm::DualAscentInequality).is_err());
        inst.slater_point = Some(v(&[1.0]));
        assert!(inst.validate(Algorithm::DualAscentInequality).is_err());
        inst.slater_point = Some(v(&[2.0]));
        inst.validate(Algorithm::DualAscentInequality).unwrap();
    }

    #[test]
    fn nonsmooth_f_rejected_by_gradient_methods() {
        let inst = ProblemInstance::new(1, 1.0, ConvexFunction::l1(2, 1.0).unwrap(), ConvexSet::whole(2));
        assert!(matches!(inst.validate(Algorithm::ProjectedGradient), Err(Error::Unsupported(_))));
        inst.validate(Algorithm::ProximalPoint).unwrap();
    }
}
