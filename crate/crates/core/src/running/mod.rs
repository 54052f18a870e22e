//! Running fixed-point iterations `s_{k+1} = T_k(s_k)`.
//!
//! Each algorithm is a Mann-Krasnosel'skii iteration on its own state: the
//! primal point for gradient and proximal methods, the multiplier for dual
//! ascent, the Douglas-Rachford variable for D-R and ADMM. Primal (and for
//! ADMM auxiliary and dual) iterates are read out of the states.

mod builders;

pub use builders::*;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::ConvexSet;
use crate::operators::{compose_averaged, AveragedOperator, ResidualPair, Vector};
use crate::problems::{parse_real, Algorithm, ProblemInstance, ProblemStream, Readout, ScenarioConfig};

/// Iterates with a larger norm abort the run.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmmForm {
    /// z-first recursion whose state `β = p + λ(Ax − c)` may be projected.
    Bounded,
    /// The usual x-first recursion, state `ζ = p + λBz`.
    Standard,
}

/// Optional compact set `B` the iterates are projected onto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSpec {
    None,
    /// `[-r, r]^n`
    Box(f64),
    /// Euclidean ball of radius `r` around the origin.
    Ball(f64),
}

impl BoundSpec {
    pub fn set(&self, dim: usize) -> Result<Option<ConvexSet>> {
        match *self {
            BoundSpec::None => Ok(None),
            BoundSpec::Box(r) => ConvexSet::cube(dim, r).map(Some),
            BoundSpec::Ball(r) => ConvexSet::ball(Vector::zeros(dim), r).map(Some),
        }
    }
}

/// Initial `(x_1, z_1, p_1)` for ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmStart {
    pub x: Vector,
    pub z: Vector,
    pub p: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub algorithm: Algorithm,
    /// `None` picks the default step for the algorithm.
    pub lambda: Option<f64>,
    pub bound: BoundSpec,
    /// Fill value for every initial vector.
    pub init: f64,
    pub init_state: Option<Vector>,
    pub admm_start: Option<AdmmStart>,
    /// `None` is bounded when a bound is given, standard otherwise.
    pub admm_form: Option<AdmmForm>,
    /// `None` runs through the whole stream.
    pub steps: Option<usize>,
}

impl RunSettings {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            lambda: None,
            bound: BoundSpec::None,
            init: 0.0,
            init_state: None,
            admm_start: None,
            admm_form: None,
            steps: None,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = Some(steps);
        self
    }

    pub fn with_bound(mut self, bound: BoundSpec) -> Self {
        self.bound = bound;
        self
    }

    pub fn with_init_state(mut self, state: Vector) -> Self {
        self.init_state = Some(state);
        self
    }

    pub fn with_admm_form(mut self, form: AdmmForm) -> Self {
        self.admm_form = Some(form);
        self
    }

    pub fn with_admm_start(mut self, start: AdmmStart) -> Self {
        self.admm_start = Some(start);
        self
    }

    /// The `[algorithm]` section of a scenario file (plus its horizon).
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let radius = || -> Result<f64> {
            let r = cfg
                .real("bound_radius")?
                .ok_or_else(|| Error::config("a bound needs 'bound_radius'"))?;
            if r > 0.0 && r.is_finite() {
                Ok(r)
            } else {
                Err(Error::config(format!("bound_radius must be positive, got {r}")))
            }
        };
        let bound = match cfg.get("bound").unwrap_or("none") {
            "none" => BoundSpec::None,
            "box" => BoundSpec::Box(radius()?),
            "ball" => BoundSpec::Ball(radius()?),
            other => return Err(Error::config(format!("unknown bound '{other}' (none|box|ball)"))),
        };
        let admm_form = match cfg.get("admm_form").unwrap_or("auto") {
            "auto" => None,
            "bounded" => Some(AdmmForm::Bounded),
            "standard" => Some(AdmmForm::Standard),
            other => return Err(Error::config(format!("unknown admm_form '{other}' (auto|bounded|standard)"))),
        };
        // `init = v` fills every entry, `init = v1, v2, ...` is the full state
        let (init, init_state) = match cfg.get("init") {
            Some(text) if text.contains(',') => {
                let values = text.split(',').map(parse_real).collect::<Result<Vec<f64>>>()?;
                (0.0, Some(Vector::from_vec(values)))
            }
            _ => (cfg.real_or("init", 0.0)?, None),
        };
        Ok(Self {
            algorithm: cfg.algorithm()?,
            lambda: match cfg.real("lambda")? {
                Some(l) => Some(l),
                None => cfg.family()?.default_lambda(),
            },
            bound,
            init,
            init_state,
            admm_start: None,
            admm_form,
            steps: Some(cfg.steps()?),
        })
    }
}

/// Where and why a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub step: usize,
    pub error: Error,
}

/// Everything a run produced. Vectors indexed by sample hold `T + 1` entries
/// (`k = 1..=T+1`), per-step vectors hold `T`; an aborted run is shorter.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub stream: String,
    pub seed: u64,
    pub algorithm: Option<Algorithm>,
    pub lambda: Option<f64>,
    pub admm_form: Option<AdmmForm>,
    pub bound: Option<ConvexSet>,
    pub states: Vec<Vector>,
    pub primal: Vec<Vector>,
    pub auxiliary: Option<Vec<Vector>>,
    pub dual: Option<Vec<Vector>>,
    /// ADMM only: `ν_k`, the multiplier estimate paired with `(x_k, z_k)`.
    pub multiplier: Option<Vec<Vector>>,
    pub residuals: Vec<ResidualPair>,
    pub alphas: Vec<f64>,
    pub contractions: Vec<Option<f64>>,
    pub image_bounds: Vec<Option<f64>>,
    /// Seconds spent on each step.
    pub wall_times: Vec<f64>,
    pub aborted: Option<Abort>,
}

impl RunRecord {
    pub fn steps(&self) -> usize {
        self.residuals.len()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.aborted {
            Some(a) => Err(a.error),
            None => Ok(self),
        }
    }

    /// The iterates the tracking error is measured on.
    pub fn readout(&self, readout: Readout) -> &[Vector] {
        match (readout, &self.auxiliary) {
            (Readout::Auxiliary, Some(z)) => z,
            _ => &self.primal,
        }
    }
}

struct Trace {
    states: Vec<Vector>,
    residuals: Vec<ResidualPair>,
    alphas: Vec<f64>,
    contractions: Vec<Option<f64>>,
    image_bounds: Vec<Option<f64>>,
    wall_times: Vec<f64>,
    aborted: Option<Abort>,
}

impl Trace {
    fn new(x1: Vector) -> Self {
        Self {
            states: vec![x1],
            residuals: Vec::new(),
            alphas: Vec::new(),
            contractions: Vec::new(),
            image_bounds: Vec::new(),
            wall_times: Vec::new(),
            aborted: None,
        }
    }

    fn last(&self) -> &Vector {
        self.states.last().expect("trace starts with x1")
    }

    /// Record `s_{k+1}`, or the reason it is rejected.
    fn push(&mut self, k: usize, op: &AveragedOperator, next: Vector, start: Instant) -> bool {
        let norm = next.norm();
        if !(norm <= DIVERGENCE_NORM) {
            self.aborted = Some(Abort { step: k, error: Error::Divergence { step: k, norm } });
            return false;
        }
        self.residuals.push(ResidualPair::from_step(self.last(), &next, op.alpha()));
        self.alphas.push(op.alpha());
        self.contractions.push(op.contraction());
        self.image_bounds.push(op.image_bound());
        self.states.push(next);
        self.wall_times.push(start.elapsed().as_secs_f64());
        true
    }

    fn abort(&mut self, k: usize, error: Error) {
        self.aborted = Some(Abort { step: k, error: error.at_step(k) });
    }

    fn into_record(self) -> RunRecord {
        RunRecord {
            stream: String::new(),
            seed: 0,
            algorithm: None,
            lambda: None,
            admm_form: None,
            bound: None,
            primal: self.states.clone(),
            states: self.states,
            auxiliary: None,
            dual: None,
            multiplier: None,
            residuals: self.residuals,
            alphas: self.alphas,
            contractions: self.contractions,
            image_bounds: self.image_bounds,
            wall_times: self.wall_times,
            aborted: self.aborted,
        }
    }
}

fn mk_loop<F>(x1: &Vector, steps: usize, bound: Option<&ConvexSet>, mut op_at: F) -> Result<Trace>
where
    F: FnMut(usize) -> Result<AveragedOperator>,
{
    let proj = bound.map(projection_operator).transpose()?;
    let mut trace = Trace::new(x1.clone());
    for k in 1..=steps {
        let start = Instant::now();
        let step = op_at(k)
            .and_then(|op| match &proj {
                Some(p) => compose_averaged(p, &op),
                None => Ok(op),
            })
            .and_then(|op| op.apply(trace.last()).map(|y| (op, y)));
        match step {
            Ok((op, y)) => {
                if !trace.push(k, &op, y, start) {
                    break;
                }
            }
            Err(e) => {
                trace.abort(k, e);
                break;
            }
        }
    }
    Ok(trace)
}

/// `x_{k+1} = T_k(x_k)` for `k = 1..=steps`.
pub fn run_mk<F>(ops: F, x1: &Vector, steps: usize) -> Result<RunRecord>
where
    F: FnMut(usize) -> Result<AveragedOperator>,
{
    mk_loop(x1, steps, None, ops)?.into_record().into_result()
}

/// `x_{k+1} = Π_B(T_k(x_k))`; the recorded `α` is that of the composition.
pub fn run_bounded_mk<F>(ops: F, x1: &Vector, steps: usize, bound: &ConvexSet) -> Result<RunRecord>
where
    F: FnMut(usize) -> Result<AveragedOperator>,
{
    mk_loop(x1, steps, Some(bound), ops)?.into_record().into_result()
}

/// The step sizes a run uses when none is given.
pub fn default_lambda(algorithm: Algorithm, instances: &[ProblemInstance]) -> Result<f64> {
    match algorithm {
        Algorithm::ProjectedGradient | Algorithm::ForwardBackward => {
            let big_m = instances.iter().filter_map(|i| i.f.smoothness()).fold(0.0, f64::max);
            Ok(if big_m > 0.0 { 1.0 / big_m } else { 1.0 })
        }
        Algorithm::DualAscentInequality | Algorithm::DualAscentEquality => {
            let mode = dual_mode(algorithm);
            let mut best = f64::INFINITY;
            for inst in instances {
                let k = dual_constants_of(&inst.f, &mode.constraint(inst)?.a)?;
                best = best.min(1.0 / k.dual_smoothness());
            }
            Ok(best)
        }
        _ => Ok(1.0),
    }
}

fn dual_mode(algorithm: Algorithm) -> DualMode {
    if algorithm == Algorithm::DualAscentInequality {
        DualMode::Inequality
    } else {
        DualMode::Equality
    }
}

/// Dimension of the state the operators of `algorithm` act on.
pub fn state_dim(algorithm: Algorithm, inst: &ProblemInstance) -> Result<usize> {
    Ok(match algorithm {
        Algorithm::DualAscentInequality | Algorithm::DualAscentEquality => {
            dual_mode(algorithm).constraint(inst)?.b.len()
        }
        Algorithm::Admm => AdmmParts::of(inst)?.rows(),
        _ => inst.dim(),
    })
}

/// Settings with every default filled in.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub instances: Vec<ProblemInstance>,
    pub steps: usize,
    pub lambda: f64,
    pub bound: Option<ConvexSet>,
    pub admm_form: Option<AdmmForm>,
}

/// Sample and validate every instance a run touches, pick defaults and
/// reject invalid step sizes before the first iteration.
pub fn prepare(stream: &ProblemStream, settings: &RunSettings) -> Result<Prepared> {
    let steps = settings.steps.unwrap_or(stream.horizon().saturating_sub(1));
    if steps == 0 {
        return Err(Error::param("a run needs at least one step"));
    }
    if stream.horizon() < steps + 1 {
        return Err(Error::param(format!(
            "{steps} steps need {} samples but the stream has {}",
            steps + 1,
            stream.horizon()
        )));
    }
    let algorithm = settings.algorithm;
    let instances = (1..=steps + 1).map(|k| stream.sample(k)).collect::<Result<Vec<_>>>()?;
    for inst in &instances {
        inst.validate(algorithm)?;
    }
    let lambda = match settings.lambda {
        Some(l) => l,
        None => default_lambda(algorithm, &instances)?,
    };
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("step size must be positive and finite, got {lambda}")));
    }
    for inst in &instances {
        match algorithm {
            Algorithm::ProjectedGradient | Algorithm::ForwardBackward => {
                let big_m = inst.f.smoothness().unwrap_or(f64::INFINITY);
                if lambda >= gradient_step_limit(big_m) {
                    return Err(Error::param(format!(
                        "step {lambda} is not below 2/M = {} at k = {}",
                        2.0 / big_m,
                        inst.k
                    )));
                }
            }
            Algorithm::DualAscentInequality | Algorithm::DualAscentEquality => {
                let k = dual_constants_of(&inst.f, &dual_mode(algorithm).constraint(inst)?.a)?;
                if lambda * k.dual_smoothness() >= 2.0 {
                    return Err(Error::param(format!(
                        "dual step {lambda} is not below 2m/σ²max = {} at k = {}",
                        2.0 / k.dual_smoothness(),
                        inst.k
                    )));
                }
            }
            _ => {}
        }
    }
    let dim = state_dim(algorithm, &instances[0])?;
    let bound = settings.bound.set(dim)?;
    if algorithm == Algorithm::DualAscentInequality && bound.is_some() {
        return Err(Error::config("inequality dual ascent already projects onto its multiplier ball"));
    }
    let admm_form = (algorithm == Algorithm::Admm).then(|| {
        settings
            .admm_form
            .unwrap_or(if bound.is_some() { AdmmForm::Bounded } else { AdmmForm::Standard })
    });
    if admm_form == Some(AdmmForm::Standard) && bound.is_some() {
        return Err(Error::config("a bound needs the bounded ADMM form"));
    }
    if let Some(s) = &settings.init_state {
        if s.len() != dim {
            return Err(Error::param(format!("initial state has length {}, expected {dim}", s.len())));
        }
    }
    Ok(Prepared { instances, steps, lambda, bound, admm_form })
}

/// Run `settings.algorithm` over `stream`. Setup errors are returned as
/// `Err`; a failure mid-run yields the partial record with `aborted` set.
pub fn execute(stream: &ProblemStream, settings: &RunSettings) -> Result<RunRecord> {
    let prep = prepare(stream, settings)?;
    let dim = state_dim(settings.algorithm, &prep.instances[0])?;
    let s1 = settings
        .init_state
        .clone()
        .unwrap_or_else(|| Vector::from_element(dim, settings.init));
    let lambda = prep.lambda;
    let insts = &prep.instances;
    let bound = prep.bound.as_ref();

    let mut record = match settings.algorithm {
        Algorithm::ProjectedGradient => {
            mk_loop(&s1, prep.steps, bound, |k| projected_gradient_operator(&insts[k - 1], lambda))?.into_record()
        }
        Algorithm::ProximalPoint => {
            mk_loop(&s1, prep.steps, bound, |k| proximal_point_operator(&insts[k - 1], lambda))?.into_record()
        }
        Algorithm::ForwardBackward => {
            mk_loop(&s1, prep.steps, bound, |k| forward_backward_operator(&insts[k - 1], lambda))?.into_record()
        }
        Algorithm::DualAscentInequality | Algorithm::DualAscentEquality => {
            let mode = dual_mode(settings.algorithm);
            let in_range = bound.is_none() && in_range(&s1, insts, mode)?;
            let trace = mk_loop(&s1, prep.steps, bound, |k| dual_ascent_operator(&insts[k - 1], lambda, mode, in_range))?;
            let mut record = trace.into_record();
            record.primal = record
                .states
                .iter()
                .zip(insts)
                .map(|(p, inst)| lagrangian_minimizer(inst, mode, p))
                .collect::<Result<_>>()?;
            record.dual = Some(record.states.clone());
            record
        }
        Algorithm::DouglasRachford => {
            let trace = mk_loop(&s1, prep.steps, bound, |k| douglas_rachford_operator(&insts[k - 1], lambda))?;
            let mut record = trace.into_record();
            record.primal = record
                .states
                .iter()
                .zip(insts)
                .map(|(z, inst)| douglas_rachford_readout(inst, lambda, z))
                .collect::<Result<_>>()?;
            record
        }
        Algorithm::Admm => {
            let parts = AdmmParts::of(&insts[0])?;
            let start = settings.admm_start.clone().unwrap_or_else(|| AdmmStart {
                x: Vector::from_element(parts.coupling.a.ncols(), settings.init),
                z: Vector::from_element(parts.coupling.b.ncols(), settings.init),
                p: Vector::from_element(parts.rows(), settings.init),
            });
            match prep.admm_form.expect("set for ADMM") {
                AdmmForm::Bounded => run_admm_bounded(insts, prep.steps, lambda, bound, &start)?,
                AdmmForm::Standard => run_admm_standard(insts, prep.steps, lambda, &start)?,
            }
        }
    };
    record.stream = stream.name().to_string();
    record.seed = stream.seed();
    record.algorithm = Some(settings.algorithm);
    record.lambda = Some(lambda);
    record.admm_form = prep.admm_form;
    record.bound = prep.bound.clone();
    Ok(record)
}

/// `p_1 ∈ im A` with `A` the same at every sample, so equality dual ascent
/// stays on `p_1 + im A`.
fn in_range(p1: &Vector, insts: &[ProblemInstance], mode: DualMode) -> Result<bool> {
    if mode == DualMode::Inequality {
        return Ok(false);
    }
    let a = &mode.constraint(&insts[0])?.a;
    for inst in &insts[1..] {
        if &mode.constraint(inst)?.a != a {
            return Ok(false);
        }
    }
    let w = crate::linalg::svd_solve(a, p1)?;
    Ok((a * w - p1).norm() <= 1e-10 * p1.norm().max(1.0))
}

fn run_admm_bounded(
    insts: &[ProblemInstance],
    steps: usize,
    lambda: f64,
    bound: Option<&ConvexSet>,
    start: &AdmmStart,
) -> Result<RunRecord> {
    let first = AdmmParts::of(&insts[0])?;
    let beta1 = &start.p + (&first.coupling.a * &start.x - &first.coupling.c) * lambda;
    let trace = mk_loop(&beta1, steps, bound, |k| admm_bounded_operator(&insts[k - 1], lambda))?;
    let mut record = trace.into_record();
    let (mut xs, mut zs, mut ps, mut nus) =
        (vec![start.x.clone()], vec![start.z.clone()], vec![start.p.clone()], vec![start.p.clone()]);
    for k in 1..record.states.len() {
        let parts = AdmmParts::of(&insts[k - 1])?;
        let (z, x) = parts.bounded_substeps(lambda, &record.states[k - 1])?;
        let p = &record.states[k] - (&parts.coupling.a * &x - &parts.coupling.c) * lambda;
        let nu = &ps[k - 1] + parts.coupling_residual(&x, &z) * lambda;
        xs.push(x);
        zs.push(z);
        ps.push(p);
        nus.push(nu);
    }
    record.primal = xs;
    record.auxiliary = Some(zs);
    record.dual = Some(ps);
    record.multiplier = Some(nus);
    Ok(record)
}

fn run_admm_standard(insts: &[ProblemInstance], steps: usize, lambda: f64, start: &AdmmStart) -> Result<RunRecord> {
    let first = AdmmParts::of(&insts[0])?;
    let zeta1 = &start.p + &first.coupling.b * &start.z * lambda;
    let mut trace = Trace::new(zeta1);
    let (mut xs, mut zs, mut ps) = (vec![start.x.clone()], vec![start.z.clone()], vec![start.p.clone()]);
    for k in 1..=steps {
        let t0 = Instant::now();
        let step = admm_standard_operator(&insts[k - 1], lambda).and_then(|op| {
            let parts = AdmmParts::of(&insts[k - 1])?;
            let (x, z, p) = parts.standard_step(lambda, &zs[k - 1], &ps[k - 1])?;
            Ok((op, x, z, p, parts))
        });
        match step {
            Ok((op, x, z, p, parts)) => {
                let zeta = &p + &parts.coupling.b * &z * lambda;
                if !trace.push(k, &op, zeta, t0) {
                    break;
                }
                xs.push(x);
                zs.push(z);
                ps.push(p);
            }
            Err(e) => {
                trace.abort(k, e);
                break;
            }
        }
    }
    let mut record = trace.into_record();
    record.primal = xs;
    record.auxiliary = Some(zs);
    record.multiplier = Some(ps.clone());
    record.dual = Some(ps);
    Ok(record)
}

/// What a run declares about the operator of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMeta {
    pub alpha: f64,
    pub contraction: Option<f64>,
    pub image_bound: Option<f64>,
}

/// Rebuild the declared constants of the first `steps` operators of a run
/// started at `s1`, without iterating. Matches what `execute` records.
pub fn step_metadata(stream: &ProblemStream, settings: &RunSettings, s1: &Vector, steps: usize) -> Result<Vec<StepMeta>> {
    let prep = prepare(stream, settings)?;
    if steps > prep.steps {
        return Err(Error::param(format!("{steps} steps requested, the run has {}", prep.steps)));
    }
    let algorithm = settings.algorithm;
    let lambda = prep.lambda;
    let in_range = match algorithm {
        Algorithm::DualAscentInequality | Algorithm::DualAscentEquality => {
            prep.bound.is_none() && in_range(s1, &prep.instances, dual_mode(algorithm))?
        }
        _ => false,
    };
    let proj = prep.bound.as_ref().map(projection_operator).transpose()?;
    (1..=steps)
        .map(|k| {
            let inst = &prep.instances[k - 1];
            let op = match algorithm {
                Algorithm::ProjectedGradient => projected_gradient_operator(inst, lambda)?,
                Algorithm::ProximalPoint => proximal_point_operator(inst, lambda)?,
                Algorithm::ForwardBackward => forward_backward_operator(inst, lambda)?,
                Algorithm::DualAscentInequality | Algorithm::DualAscentEquality => {
                    dual_ascent_operator(inst, lambda, dual_mode(algorithm), in_range)?
                }
                Algorithm::DouglasRachford => douglas_rachford_operator(inst, lambda)?,
                Algorithm::Admm => match prep.admm_form.expect("set for ADMM") {
                    AdmmForm::Bounded => admm_bounded_operator(inst, lambda)?,
                    AdmmForm::Standard => admm_standard_operator(inst, lambda)?,
                },
            };
            let op = match &proj {
                Some(p) => compose_averaged(p, &op)?,
                None => op,
            };
            Ok(StepMeta { alpha: op.alpha(), contraction: op.contraction(), image_bound: op.image_bound() })
        })
        .collect()
}

/// `execute`, with a mid-run failure turned into an error.
pub fn run(stream: &ProblemStream, settings: &RunSettings) -> Result<RunRecord> {
    execute(stream, settings)?.into_result()
}

fn expect_algorithm(settings: &RunSettings, allowed: &[Algorithm]) -> Result<()> {
    if allowed.contains(&settings.algorithm) {
        Ok(())
    } else {
        Err(Error::config(format!("settings name {} here", settings.algorithm)))
    }
}

pub fn run_dual_ascent(stream: &ProblemStream, settings: &RunSettings) -> Result<RunRecord> {
    expect_algorithm(settings, &[Algorithm::DualAscentInequality, Algorithm::DualAscentEquality])?;
    run(stream, settings)
}

pub fn run_douglas_rachford(stream: &ProblemStream, settings: &RunSettings) -> Result<RunRecord> {
    expect_algorithm(settings, &[Algorithm::DouglasRachford])?;
    run(stream, settings)
}

pub fn run_admm(stream: &ProblemStream, settings: &RunSettings) -> Result<RunRecord> {
    expect_algorithm(settings, &[Algorithm::Admm])?;
    run(stream, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::ConvexFunction;
    use crate::operators::{check_averaged, map};
    use crate::oracle::{solution_trajectory, OracleSpec};
    use crate::problems::{make_scenario, LinearConstraint};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn scenario(pairs: &[(&str, &str)]) -> ProblemStream {
        make_scenario(&ScenarioConfig::from_pairs(pairs).unwrap()).unwrap()
    }

    fn random_pairs(dim: usize, count: usize, scale: f64, seed: u64) -> Vec<(Vector, Vector)> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || Vector::from_iterator(dim, (0..dim).map(|_| r.random_range(-scale..scale)));
        (0..count).map(|_| (draw(), draw())).collect()
    }

    #[test]
    fn halving_map_record() {
        let op = || AveragedOperator::new(2, 0.5, map(|x: &Vector| x * 0.5)).unwrap().with_contraction(0.5);
        let rec = run_mk(|_| op(), &v(&[4.0, 0.0]), 3).unwrap();
        assert_eq!(rec.states.len(), 4);
        assert_eq!(rec.states[3], v(&[0.5, 0.0]));
        assert_eq!(rec.residuals[0].t_residual, 2.0);
        assert_eq!(rec.residuals[0].g_residual, 4.0);
        assert_eq!(rec.contractions, vec![Some(0.5); 3]);
    }

    #[test]
    fn divergence_aborts_with_partial_record() {
        let op = || AveragedOperator::new(1, 0.5, map(|x: &Vector| x * 1e4));
        let trace = mk_loop(&v(&[1.0]), 10, None, |_| op()).unwrap();
        let rec = trace.into_record();
        assert_eq!(rec.states.len(), 4);
        assert!(matches!(rec.aborted, Some(Abort { step: 4, error: Error::Divergence { step: 4, .. } })));
        assert!(matches!(run_mk(|_| op(), &v(&[1.0]), 10), Err(Error::Divergence { .. })));
    }

    #[test]
    fn non_finite_output_is_a_numerical_error_at_its_step() {
        let op = |k: usize| {
            AveragedOperator::new(1, 0.5, map(move |x: &Vector| if k == 2 { x * f64::NAN } else { x.clone() }))
        };
        let err = run_mk(op, &v(&[1.0]), 5).unwrap_err();
        assert!(matches!(err, Error::Numerical { step: Some(2), .. }));
    }

    #[test]
    fn invalid_step_is_rejected_before_running() {
        let stream = scenario(&[("family", "static_quadratic"), ("horizon", "5")]);
        let too_big = RunSettings::new(Algorithm::ProjectedGradient).with_lambda(1.0);
        assert!(matches!(prepare(&stream, &too_big), Err(Error::Parameter(_))));
        let negative = RunSettings::new(Algorithm::ProximalPoint).with_lambda(-1.0);
        assert!(prepare(&stream, &negative).is_err());
        let wrong = RunSettings::new(Algorithm::DualAscentEquality);
        assert!(prepare(&stream, &wrong).is_err());
    }

    #[test]
    fn settings_from_config() {
        let cfg = ScenarioConfig::parse(
            "[scenario]\nfamily = localization_lite\nhorizon = 7\n[algorithm]\nbound = ball\nbound_radius = 50\nadmm_form = bounded\n",
        )
        .unwrap();
        let s = RunSettings::from_config(&cfg).unwrap();
        assert_eq!(s.algorithm, Algorithm::Admm);
        assert_eq!(s.lambda, Some(0.3));
        assert_eq!(s.bound, BoundSpec::Ball(50.0));
        assert_eq!(s.admm_form, Some(AdmmForm::Bounded));
        assert_eq!(s.steps, Some(7));
        let vector = ScenarioConfig::parse("[scenario]\nfamily = static_quadratic\nn = 2\n[algorithm]\ninit = 1, -pi\n").unwrap();
        let s = RunSettings::from_config(&vector).unwrap();
        assert_eq!(s.init_state, Some(v(&[1.0, -std::f64::consts::PI])));
        let missing = ScenarioConfig::parse("[scenario]\nfamily = static_quadratic\n[algorithm]\nbound = box\n").unwrap();
        assert!(RunSettings::from_config(&missing).is_err());
    }

    #[test]
    fn dual_constants_examples() {
        let k = dual_constants(&DMatrix::identity(2, 2), 1.0, Some(2.0)).unwrap();
        assert_eq!(k.dual_smoothness(), 1.0);
        assert_eq!(k.dual_strong_convexity(k.sigma_min), 0.5);
        let k = dual_constants(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), 1.0, Some(1.0)).unwrap();
        let r2 = 2f64.sqrt();
        assert!((k.sigma_max - r2).abs() < 1e-15 && (k.sigma_min - r2).abs() < 1e-15 && (k.sigma_zero - r2).abs() < 1e-15);
        let k = dual_constants(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]), 1.0, Some(1.0)).unwrap();
        assert_eq!(k.sigma_min, 0.0);
        assert!((k.sigma_zero - r2).abs() < 1e-15);
        assert!(dual_constants(&DMatrix::zeros(2, 2), 1.0, Some(1.0)).is_err());
    }

    #[test]
    fn inequality_dual_iterates_stay_in_the_multiplier_ball() {
        let stream = scenario(&[("family", "tv_inequality_qp"), ("horizon", "60")]);
        let rec = run(&stream, &RunSettings::new(Algorithm::DualAscentInequality)).unwrap();
        for (p, bound) in rec.states[1..].iter().zip(&rec.image_bounds) {
            assert!(p.iter().all(|v| *v >= 0.0));
            assert!(p.norm() <= bound.unwrap() * (1.0 + 1e-12));
        }
        // composition with the ball: 1/(2 − λσ²max/(2m))
        let inst = stream.sample(1).unwrap();
        let k = dual_constants_of(&inst.f, &inst.linear_ineq.unwrap().a).unwrap();
        let expected = 1.0 / (2.0 - rec.lambda.unwrap() * k.dual_smoothness() / 2.0);
        assert!((rec.alphas[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn admm_bounded_alpha_is_two_thirds() {
        let stream = scenario(&[("family", "tv_admm_consensus"), ("horizon", "5")]);
        let settings = RunSettings::new(Algorithm::Admm).with_bound(BoundSpec::Box(1e3));
        let rec = run(&stream, &settings).unwrap();
        assert_eq!(rec.admm_form, Some(AdmmForm::Bounded));
        assert!(rec.alphas.iter().all(|a| (a - 2.0 / 3.0).abs() < 1e-15));
        let standard = AdmmForm::Standard;
        assert!(run(&stream, &settings.clone().with_admm_form(standard)).is_err());
    }

    #[test]
    fn admm_contraction_example() {
        // f strongly convex with m = 1, M = 2, A = I, λ = 1 → L = ½(1 + max{0, 1/3}) = 2/3
        let f = ConvexFunction::quadratic(DMatrix::from_diagonal(&v(&[1.0, 2.0])), v(&[0.0, 0.0])).unwrap();
        let mut inst = ProblemInstance::new(1, 1.0, f, ConvexSet::whole(2));
        inst.admm = Some(crate::problems::AdmmCoupling {
            a: DMatrix::identity(2, 2),
            b: -DMatrix::identity(2, 2),
            c: v(&[0.0, 0.0]),
        });
        let op = admm_standard_operator(&inst, 1.0).unwrap();
        assert!((op.contraction().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    /// The realized operator of every algorithm is averaged with its declared α.
    #[test]
    fn declared_alphas_pass_spot_checks() {
        let cases: Vec<(Vec<(&str, &str)>, RunSettings)> = vec![
            (vec![("family", "static_quadratic"), ("radius", "1")], RunSettings::new(Algorithm::ProjectedGradient).with_lambda(0.9)),
            (vec![("family", "moving_quadratic")], RunSettings::new(Algorithm::ProximalPoint)),
            (vec![("family", "tv_lasso")], RunSettings::new(Algorithm::ForwardBackward)),
            (vec![("family", "tv_inequality_qp")], RunSettings::new(Algorithm::DualAscentInequality)),
            (vec![("family", "tv_equality_qp")], RunSettings::new(Algorithm::DualAscentEquality)),
            (vec![("family", "static_quadratic")], RunSettings::new(Algorithm::DouglasRachford).with_bound(BoundSpec::Ball(5.0))),
            (vec![("family", "tv_admm_consensus")], RunSettings::new(Algorithm::Admm)),
            (vec![("family", "tv_admm_consensus"), ("reg", "0.5")], RunSettings::new(Algorithm::Admm).with_admm_form(AdmmForm::Bounded)),
        ];
        for (pairs, settings) in cases {
            let mut pairs = pairs.clone();
            pairs.push(("horizon", "20"));
            let stream = scenario(&pairs);
            let prep = prepare(&stream, &settings).unwrap();
            for k in [1, 10, 20] {
                let inst = &prep.instances[k - 1];
                let spec = OracleSpec::new(settings.algorithm, prep.lambda)
                    .with_admm_form(prep.admm_form.unwrap_or(AdmmForm::Standard));
                let mut op = spec.operator(inst).unwrap();
                if let Some(b) = &prep.bound {
                    op = compose_averaged(&projection_operator(b).unwrap(), &op).unwrap();
                }
                let pairs = random_pairs(op.dim(), 200, 5.0, k as u64);
                let check = check_averaged(|x| (op.as_map())(x), op.alpha(), &pairs).unwrap();
                assert!(check.holds, "{} at k = {k}: margin {}", settings.algorithm, check.worst_margin);
                if let Some(l) = op.contraction() {
                    let excess = crate::operators::contraction_excess(|x| (op.as_map())(x), l, &pairs);
                    assert!(excess <= 1e-9, "{} contraction excess {excess}", settings.algorithm);
                }
            }
        }
    }

    /// On a static stream every contraction shows up step by step.
    #[test]
    fn static_streams_contract_at_the_declared_rate() {
        let cases: Vec<(Vec<(&str, &str)>, RunSettings)> = vec![
            (vec![("family", "static_quadratic")], RunSettings::new(Algorithm::ProjectedGradient).with_lambda(0.1)),
            (vec![("family", "static_quadratic")], RunSettings::new(Algorithm::ProximalPoint)),
            (vec![("family", "static_quadratic")], RunSettings::new(Algorithm::ForwardBackward)),
            (vec![("family", "static_quadratic")], RunSettings::new(Algorithm::DouglasRachford).with_lambda(0.7)),
            (vec![("family", "tv_inequality_qp"), ("amplitude", "0")], RunSettings::new(Algorithm::DualAscentInequality)),
            (vec![("family", "tv_equality_qp"), ("static", "true")], RunSettings::new(Algorithm::DualAscentEquality)),
            (vec![("family", "tv_admm_consensus"), ("amplitude", "0")], RunSettings::new(Algorithm::Admm)),
            (vec![("family", "tv_admm_consensus"), ("amplitude", "0"), ("reg", "1")], RunSettings::new(Algorithm::Admm).with_admm_form(AdmmForm::Bounded)),
        ];
        for (pairs, settings) in cases {
            let mut pairs = pairs.clone();
            pairs.push(("horizon", "60"));
            let stream = scenario(&pairs);
            let rec = run(&stream, &settings).unwrap();
            let oracle = solution_trajectory(&stream, &OracleSpec::for_record(&rec).unwrap(), 1).unwrap();
            let star = &oracle[0].state_star;
            for k in 0..rec.steps() {
                let l = rec.contractions[k].expect("contraction declared");
                let before = (&rec.states[k] - star).norm();
                let after = (&rec.states[k + 1] - star).norm();
                assert!(after <= l * before + 1e-9, "{} step {k}: {after} > {l}·{before}", settings.algorithm);
            }
        }
    }

    #[test]
    fn equality_dual_on_the_range_uses_sigma_zero() {
        // A with dependent rows: σ_min = 0, but p stays in im A from p1 = 0
        let f = ConvexFunction::squared_distance(&v(&[1.0, -1.0, 0.5]), 1.0).unwrap();
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        let mut inst = ProblemInstance::new(1, 1.0, f, ConvexSet::whole(3));
        inst.linear_eq = Some(LinearConstraint { b: &a * v(&[0.3, 0.2, 0.0]), a });
        let stream = ProblemStream::constant("rank_deficient", inst, 40);
        let rec = run(&stream, &RunSettings::new(Algorithm::DualAscentEquality)).unwrap();
        assert!(rec.contractions.iter().all(|c| c.is_some()));
        let off = RunSettings::new(Algorithm::DualAscentEquality).with_init_state(v(&[1.0, 0.0]));
        let rec = run(&stream, &off).unwrap();
        assert!(rec.contractions.iter().all(|c| c.is_none()));
    }

    #[test]
    fn step_metadata_matches_the_record() {
        let cases = [
            (vec![("family", "tv_lasso")], RunSettings::new(Algorithm::ForwardBackward)),
            (vec![("family", "tv_inequality_qp")], RunSettings::new(Algorithm::DualAscentInequality)),
            (vec![("family", "tv_equality_qp")], RunSettings::new(Algorithm::DualAscentEquality)),
            (vec![("family", "static_quadratic")], RunSettings::new(Algorithm::DouglasRachford).with_bound(BoundSpec::Box(3.0))),
            (vec![("family", "tv_admm_consensus")], RunSettings::new(Algorithm::Admm)),
            (vec![("family", "localization_lite")], RunSettings::new(Algorithm::Admm).with_bound(BoundSpec::Ball(100.0)).with_lambda(0.3)),
        ];
        for (pairs, settings) in cases {
            let mut pairs = pairs.clone();
            pairs.push(("horizon", "12"));
            let stream = scenario(&pairs);
            let rec = run(&stream, &settings).unwrap();
            let meta = step_metadata(&stream, &settings, &rec.states[0], rec.steps()).unwrap();
            for (k, m) in meta.iter().enumerate() {
                assert_eq!(m.alpha, rec.alphas[k]);
                assert_eq!(m.contraction, rec.contractions[k]);
                assert_eq!(m.image_bound, rec.image_bounds[k]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn huge_bound_leaves_iterates_unchanged(seed in 0u64..1000) {
            let s = seed.to_string();
            let stream = scenario(&[("family", "moving_quadratic"), ("n", "4"), ("horizon", "30"), ("seed", &s)]);
            let plain = run(&stream, &RunSettings::new(Algorithm::ProjectedGradient)).unwrap();
            let boxed = run(&stream, &RunSettings::new(Algorithm::ProjectedGradient).with_bound(BoundSpec::Box(1e3))).unwrap();
            prop_assert_eq!(&plain.states, &boxed.states);
            prop_assert!(boxed.alphas.iter().zip(&plain.alphas).all(|(b, a)| b > a));
        }

        #[test]
        fn forward_backward_reduces_to_gradient_and_prox(seed in 0u64..1000) {
            let s = seed.to_string();
            let stream = scenario(&[("family", "static_quadratic"), ("n", "5"), ("radius", "0.5"), ("horizon", "30"), ("seed", &s)]);
            let pg = run(&stream, &RunSettings::new(Algorithm::ProjectedGradient)).unwrap();
            let fb = run(&stream, &RunSettings::new(Algorithm::ForwardBackward)).unwrap();
            for (a, b) in pg.states.iter().zip(&fb.states) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
            // f = 0 with the old f moved into g
            let inst = stream.sample(1).unwrap();
            let mut swapped = inst.clone();
            swapped.g = Some(inst.f.clone());
            swapped.f = ConvexFunction::zero(inst.dim());
            let pp = run(&ProblemStream::constant("pp", inst, 31), &RunSettings::new(Algorithm::ProximalPoint)).unwrap();
            let fb = run(&ProblemStream::constant("fb", swapped, 31), &RunSettings::new(Algorithm::ForwardBackward).with_lambda(1.0)).unwrap();
            for (a, b) in pp.states.iter().zip(&fb.states) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
        }

        #[test]
        fn admm_forms_agree_under_the_half_step_shift(seed in 0u64..1000) {
            let s = seed.to_string();
            let stream = scenario(&[("family", "tv_admm_consensus"), ("reg", "0.3"), ("horizon", "40"), ("seed", &s)]);
            let bounded = run(&stream, &RunSettings::new(Algorithm::Admm).with_admm_form(AdmmForm::Bounded)).unwrap();
            let (bz, bp) = (bounded.auxiliary.as_ref().unwrap(), bounded.dual.as_ref().unwrap());
            let start = AdmmStart { x: bounded.primal[0].clone(), z: bz[1].clone(), p: bp[1].clone() };
            let standard = run(&stream, &RunSettings::new(Algorithm::Admm).with_admm_form(AdmmForm::Standard).with_admm_start(start)).unwrap();
            let (sz, sp) = (standard.auxiliary.as_ref().unwrap(), standard.dual.as_ref().unwrap());
            for k in 1..40 {
                prop_assert!((&bounded.primal[k] - &standard.primal[k]).norm() <= 1e-10);
                prop_assert!((&bz[k] - &sz[k - 1]).norm() <= 1e-10);
                prop_assert!((&bp[k] - &sp[k - 1]).norm() <= 1e-10);
            }
        }

        /// Finite-difference curvature of −q lies in [σ²min/M, σ²max/m].
        #[test]
        fn dual_curvature_within_constants(seed in 0u64..10_000) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let n = r.random_range(1..=5usize);
            let rows = r.random_range(1..=5usize);
            let g = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
            let q = &g * g.transpose() + DMatrix::identity(n, n) * 0.5;
            let q = (&q + q.transpose()) * 0.5;
            let f = ConvexFunction::quadratic(q, Vector::from_fn(n, |_, _| r.random_range(-1.0..1.0))).unwrap();
            let a = DMatrix::from_fn(rows, n, |_, _| r.random_range(-1.0..1.0));
            let b = Vector::from_fn(rows, |_, _| r.random_range(-1.0..1.0));
            let k = dual_constants_of(&f, &a).unwrap();
            let whole = ConvexSet::whole(n);
            let grad = |p: &Vector| -> Vector { -(&a * f.argmin_linear(&(a.transpose() * p), &whole).unwrap() - &b) };
            let p = Vector::from_fn(rows, |_, _| r.random_range(-1.0..1.0));
            let d = Vector::from_fn(rows, |_, _| r.random_range(-1.0..1.0));
            let h = 1e-4;
            let curv = d.dot(&(grad(&(&p + &d * h)) - grad(&(&p - &d * h)))) / (2.0 * h * d.norm_squared());
            let lo = k.dual_strong_convexity(k.sigma_min);
            let hi = k.dual_smoothness();
            prop_assert!(curv >= lo * 0.95 - 1e-9 && curv <= hi * 1.05 + 1e-9, "{lo} <= {curv} <= {hi}");
        }
    }
}
