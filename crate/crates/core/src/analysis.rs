//! Theoretical bound curves, measured metrics and their comparison.
//!
//! The bound functions are plain formulas in the problem constants. The
//! `measure_and_verify` pipeline feeds them the measured surrogates: `δ̂` from
//! the oracle trajectory, `X` from the declared image bounds, `d̂` and `σ̂`
//! from the run itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::ReferenceSolution;
use crate::problems::{estimate_variation, Algorithm, ProblemStream, Readout, VariationEstimate};
use crate::running::RunRecord;
use crate::Vector;

pub use crate::running::{dual_constants, DualConstants};

/// Absolute part of the verdict slack.
pub const SLACK_ABS: f64 = 1e-6;
/// Relative part of the verdict slack.
pub const SLACK_REL: f64 = 1e-6;
/// Tail sum below which a variation sequence counts as summable.
pub const SUMMABLE_TOL: f64 = 1e-6;
/// Final `‖G(x) − x‖` below which the residual counts as vanished.
pub const VANISHED_RESIDUAL: f64 = 1e-6;

/// `min_k (1 − α_k)/α_k`.
pub fn a_bar(alphas: &[f64]) -> f64 {
    alphas.iter().map(|a| (1.0 - a) / a).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FprBound {
    /// Right-hand side after `T` steps for the weighted average
    /// `(1/T) Σ α_k(1−α_k)‖G_k x_k − x_k‖²`.
    pub value: f64,
    /// Same right-hand side for every prefix `T' = 1..=T`.
    pub curve: Vec<f64>,
    /// Limit of the weighted form as `T → ∞`.
    pub asymptote: f64,
    /// Bound on `(1/T) Σ ‖T_k x_k − x_k‖²`, from weights `(1−α_k)/α_k ≥ ā`.
    pub t_residual_value: f64,
    pub t_residual_asymptote: f64,
}

fn fpr_bound(alphas: &[f64], init_dist: f64, floor: f64) -> FprBound {
    let init2 = init_dist * init_dist;
    let t = alphas.len().max(1);
    let curve: Vec<f64> = (1..=alphas.len()).map(|tp| init2 / tp as f64 + floor).collect();
    let value = init2 / t as f64 + floor;
    let abar = a_bar(alphas);
    FprBound {
        value,
        curve,
        asymptote: floor,
        t_residual_value: value / abar,
        t_residual_asymptote: floor / abar,
    }
}

/// Averaged fixed-point residual bound with path variation `δ` and image
/// bound `X`: `(1/T)‖x₁ − x*₁‖² + δ(4X + δ)`. The horizon is `alphas.len()`.
pub fn bound_fpr_image(alphas: &[f64], x_bound: f64, delta: f64, init_dist: f64) -> FprBound {
    fpr_bound(alphas, init_dist, delta * (4.0 * x_bound + delta))
}

/// Averaged fixed-point residual bound with squared variation `d`:
/// `(1/T)‖x₁ − x*₁‖² + d²`.
pub fn bound_fpr_drift(alphas: &[f64], d: f64, init_dist: f64) -> FprBound {
    fpr_bound(alphas, init_dist, d * d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingBound {
    /// `b_k` for `k = 1..=T+1`, with `T = contractions.len()`.
    pub curve: Vec<f64>,
    /// `δ/(1 − L̄)` with `L̄` the largest factor.
    pub asymptote: f64,
}

/// `‖x_k − x*_k‖ ≤ L̂_k‖x₁ − x*₁‖ + (1 − L̄^{k−1})/(1 − L̄)·δ` where
/// `L̂_k = L₁⋯L_{k−1}` and `L̄ = max_{j<k} L_j`.
pub fn bound_tracking_contraction(contractions: &[f64], delta: f64, init_dist: f64) -> TrackingBound {
    let mut curve = Vec::with_capacity(contractions.len() + 1);
    curve.push(init_dist);
    let (mut prod, mut worst) = (1.0, 0.0f64);
    for (j, &l) in contractions.iter().enumerate() {
        prod *= l;
        worst = worst.max(l);
        let steps = (j + 1) as i32;
        let geometric = if worst == 1.0 { steps as f64 } else { (1.0 - worst.powi(steps)) / (1.0 - worst) };
        curve.push(prod * init_dist + geometric * delta);
    }
    let asymptote = if delta == 0.0 { 0.0 } else { delta / (1.0 - worst) };
    TrackingBound { curve, asymptote }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingCheck {
    /// Sum over the second half of the sequence.
    pub tail_sum: f64,
    pub summable: bool,
}

/// Finite-horizon surrogate for `Σ δ_k < ∞`: the tail over the second half
/// of the horizon is below `tol`.
pub fn bound_vanishing(deltas: &[f64], tol: f64) -> VanishingCheck {
    let tail_sum: f64 = deltas[deltas.len() / 2..].iter().sum();
    VanishingCheck { tail_sum, summable: tail_sum <= tol }
}

/// Constants of the averaged objective-gap bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    pub lambda: f64,
    /// Smoothness of the smooth part per step; `0` for proximal point.
    pub smoothness: Vec<f64>,
    pub x_bound: f64,
    pub delta: f64,
    pub sigma: f64,
    pub a_bar: f64,
    pub init_dist: f64,
}

impl ObjectiveParams {
    /// `1` when `λM_k ≤ 1` for every `k`, else `1 + (λ max M − 1)/ā`.
    pub fn constant(&self) -> f64 {
        let big_m = self.smoothness.iter().copied().fold(0.0, f64::max);
        if self.lambda * big_m <= 1.0 {
            1.0
        } else {
            1.0 + (self.lambda * big_m - 1.0) / self.a_bar
        }
    }
}

/// `(1/T) Σ F_{k+1}(x_{k+1}) − F*_{k+1} ≤ C/(2λT)‖x₁ − x*₁‖² + Cδ/(2λ)(4X + δ) + σ`
/// for `T = 1..=horizon`.
pub fn bound_objective_gap(params: &ObjectiveParams, horizon: usize) -> Vec<f64> {
    let c = params.constant();
    let l = params.lambda;
    let tail = c * params.delta / (2.0 * l) * (4.0 * params.x_bound + params.delta) + params.sigma;
    (1..=horizon)
        .map(|t| c / (2.0 * l * t as f64) * params.init_dist * params.init_dist + tail)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    /// `min (bound − measured)` over the checked indices.
    pub worst_margin: f64,
    pub checked: usize,
}

impl Verdict {
    /// `measured ≤ bound + slack` at every index.
    pub fn compare(name: &str, measured: &[f64], bound: &[f64]) -> Self {
        let mut holds = true;
        let mut worst = f64::INFINITY;
        for (m, b) in measured.iter().zip(bound) {
            worst = worst.min(b - m);
            if !(*m <= b + SLACK_ABS + SLACK_REL * b.abs()) {
                holds = false;
            }
        }
        Verdict { name: name.to_string(), holds, worst_margin: worst, checked: measured.len().min(bound.len()) }
    }
}

/// Measured and theoretical curves of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub stream: String,
    pub algorithm: Option<Algorithm>,
    pub lambda: Option<f64>,
    pub steps: usize,
    pub variation: VariationEstimate,
    /// Largest declared image bound, when every step declares one.
    pub x_bound: Option<f64>,
    pub alphas: Vec<f64>,
    pub contractions: Vec<Option<f64>>,
    pub a_bar: f64,
    /// `‖s₁ − s*₁‖` on the iterated state.
    pub init_dist: f64,
    /// `‖s_k − s*_k‖`, `k = 1..=T+1`.
    pub state_error: Vec<f64>,
    /// Readout vs. oracle in the stream's tracking form, `k = 1..=T+1`.
    pub tracking_error: Vec<f64>,
    /// `‖p_k − p*_k‖` when the run carries multipliers.
    pub dual_error: Option<Vec<f64>>,
    /// `α_k(1 − α_k)‖G_k s_k − s_k‖²`, `k = 1..=T`.
    pub weighted_fpr: Vec<f64>,
    /// Prefix means of `weighted_fpr`.
    pub weighted_fpr_avg: Vec<f64>,
    /// `F_k(x_k) − F*_k`, `k = 1..=T+1`, for single-block primal methods.
    pub objective_gap: Option<Vec<f64>>,
    /// Prefix means of `F_{k+1}(x_{k+1}) − F*_{k+1}`, `T' = 1..=T`.
    pub objective_gap_avg: Option<Vec<f64>>,
    pub bound_tracking: Option<TrackingBound>,
    pub bound_fpr_image: Option<FprBound>,
    pub bound_fpr_drift: Option<FprBound>,
    pub bound_objective: Option<Vec<f64>>,
    pub objective_constant: Option<f64>,
    /// `(σmax_k/m_k)‖p_k − p*_k‖` for dual ascent.
    pub bound_primal_recovery: Option<Vec<f64>>,
    pub vanishing: VanishingCheck,
    pub final_g_residual: Option<f64>,
    pub verdicts: Vec<Verdict>,
}

impl BoundReport {
    pub fn all_hold(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Mean tracking error over the last 20% of the samples.
    pub fn steady_state(&self) -> f64 {
        steady_state_mean(&self.tracking_error)
    }
}

/// Mean of the last 20% (at least one entry).
pub fn steady_state_mean(curve: &[f64]) -> f64 {
    let tail = &curve[tail_start(curve.len())..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Variance of the last 20%.
pub fn steady_state_variance(curve: &[f64]) -> f64 {
    let tail = &curve[tail_start(curve.len())..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tail.len() as f64
}

fn tail_start(len: usize) -> usize {
    len - (len / 5).max(1).min(len)
}

fn prefix_means(values: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            sum / (i + 1) as f64
        })
        .collect()
}

/// Measure `record` against the oracle trajectory and check every bound
/// whose hypotheses the run satisfies.
///
/// Thm-1(b) style tracking needs a declared contraction at every step; the
/// `δ(4X + δ)` residual bound needs declared image bounds containing every
/// fixed point (or `δ̂ = 0`); the objective bound needs a single-block primal
/// method over a fixed feasible set without an extra bound `B`.
pub fn measure_and_verify(
    stream: &ProblemStream,
    record: &RunRecord,
    oracle: &[ReferenceSolution],
) -> Result<BoundReport> {
    let steps = record.steps();
    let samples = steps + 1;
    if record.states.len() != samples || record.alphas.len() != steps {
        return Err(Error::param("record is inconsistent with its step count"));
    }
    if oracle.len() < samples {
        return Err(Error::param(format!(
            "oracle covers {} samples, the record needs {samples}",
            oracle.len()
        )));
    }
    let oracle = &oracle[..samples];
    let variation = estimate_variation(stream, oracle, Some(&record.states), Some(&record.primal))?;
    let delta = variation.delta_hat;

    let state_error: Vec<f64> =
        record.states.iter().zip(oracle).map(|(s, r)| (s - &r.state_star).norm()).collect();
    let init_dist = state_error[0];
    let readout = record.readout(stream.readout);
    let tracking_error: Vec<f64> = readout
        .iter()
        .zip(oracle)
        .map(|(x, r)| {
            let star = match (stream.readout, &r.z_star) {
                (Readout::Auxiliary, Some(z)) => z,
                _ => &r.x_star,
            };
            stream.tracking.measure(x, star)
        })
        .collect();
    let dual_error = match &record.dual {
        Some(ps) if oracle.iter().all(|r| r.p_star.is_some()) => Some(
            ps.iter()
                .zip(oracle)
                .map(|(p, r)| (p - r.p_star.as_ref().expect("checked")).norm())
                .collect::<Vec<f64>>(),
        ),
        _ => None,
    };

    let weighted_fpr: Vec<f64> = record
        .residuals
        .iter()
        .zip(&record.alphas)
        .map(|(r, a)| a * (1.0 - a) * r.g_residual * r.g_residual)
        .collect();
    let weighted_fpr_avg = prefix_means(&weighted_fpr);
    let abar = a_bar(&record.alphas);
    let mut verdicts = Vec::new();

    // image bound X and whether it contains the fixed points
    let x_bound = record
        .image_bounds
        .iter()
        .map(|b| b.ok_or(()))
        .collect::<std::result::Result<Vec<f64>, ()>>()
        .ok()
        .map(|bs| bs.into_iter().fold(0.0, f64::max));
    let contains_stars = |x: f64, pick: &dyn Fn(&ReferenceSolution) -> &Vector| {
        oracle.iter().all(|r| pick(r).norm() <= x * (1.0 + 1e-9) + 1e-12)
    };
    let thm1a_x = match x_bound {
        Some(x) if contains_stars(x, &|r| &r.state_star) => Some(x),
        _ if delta == 0.0 => Some(0.0),
        _ => None,
    };

    let bound_tracking = match record.contractions.iter().copied().collect::<Option<Vec<f64>>>() {
        Some(ls) if !ls.is_empty() => {
            let b = bound_tracking_contraction(&ls, delta, init_dist);
            verdicts.push(Verdict::compare("tracking_contraction", &state_error, &b.curve));
            // one-step form ‖s_{k+1} − s*_{k+1}‖ ≤ L_k‖s_k − s*_k‖ + δ
            let one_step: Vec<f64> = ls.iter().zip(&state_error).map(|(l, e)| l * e + delta).collect();
            verdicts.push(Verdict::compare("tracking_step", &state_error[1..], &one_step));
            Some(b)
        }
        _ => None,
    };

    let bound_fpr_image = thm1a_x.map(|x| {
        let b = bound_fpr_image(&record.alphas, x, delta, init_dist);
        verdicts.push(Verdict::compare("fpr_image", &weighted_fpr_avg, &b.curve));
        b
    });
    let bound_fpr_drift = variation.d_hat.map(|d| {
        let b = bound_fpr_drift(&record.alphas, d, init_dist);
        verdicts.push(Verdict::compare("fpr_drift", &weighted_fpr_avg, &b.curve));
        b
    });

    let instances = (1..=samples).map(|k| stream.sample(k)).collect::<Result<Vec<_>>>()?;
    let primal_method = record.algorithm.is_some_and(|a| a.is_primal());
    let objective_gap = if primal_method {
        Some(
            record
                .primal
                .iter()
                .zip(&instances)
                .zip(oracle)
                .map(|((x, inst), r)| Ok(inst.objective(x)? - r.objective))
                .collect::<Result<Vec<f64>>>()?,
        )
    } else {
        None
    };
    let objective_gap_avg = objective_gap.as_ref().map(|g| prefix_means(&g[1..]));

    let mut objective_constant = None;
    let bound_objective = match (&objective_gap_avg, variation.sigma_hat, record.lambda) {
        (Some(avg), Some(sigma), Some(lambda)) if record.bound.is_none() => {
            let primal_x = match x_bound {
                Some(x) if contains_stars(x, &|r| &r.x_star) => Some(x),
                _ if variation.primal_delta_hat == 0.0 => Some(0.0),
                _ => None,
            };
            primal_x.map(|x| {
                let smoothness = instances[..steps]
                    .iter()
                    .map(|i| match record.algorithm {
                        Some(Algorithm::ProximalPoint) => 0.0,
                        _ => i.f.smoothness().unwrap_or(0.0),
                    })
                    .collect();
                let params = ObjectiveParams {
                    lambda,
                    smoothness,
                    x_bound: x,
                    delta: variation.primal_delta_hat,
                    sigma,
                    a_bar: abar,
                    init_dist,
                };
                objective_constant = Some(params.constant());
                let b = bound_objective_gap(&params, steps);
                verdicts.push(Verdict::compare("objective_average", avg, &b));
                b
            })
        }
        _ => None,
    };

    let bound_primal_recovery = match (record.algorithm, &dual_error) {
        (Some(alg @ (Algorithm::DualAscentInequality | Algorithm::DualAscentEquality)), Some(de)) => {
            let primal_error: Vec<f64> =
                record.primal.iter().zip(oracle).map(|(x, r)| (x - &r.x_star).norm()).collect();
            let mut bound = Vec::with_capacity(samples);
            for (inst, e) in instances.iter().zip(de) {
                let a = match alg {
                    Algorithm::DualAscentInequality => &inst.linear_ineq,
                    _ => &inst.linear_eq,
                }
                .as_ref()
                .ok_or_else(|| Error::param("dual ascent record on an instance without constraints"))?;
                let k = dual_constants(&a.a, inst.f.strong_convexity(), inst.f.smoothness())?;
                bound.push(k.sigma_max / k.m * e);
            }
            verdicts.push(Verdict::compare("primal_recovery", &primal_error, &bound));
            Some(bound)
        }
        _ => None,
    };

    Ok(BoundReport {
        stream: record.stream.clone(),
        algorithm: record.algorithm,
        lambda: record.lambda,
        steps,
        vanishing: bound_vanishing(&variation.delta_steps, SUMMABLE_TOL),
        variation,
        x_bound,
        alphas: record.alphas.clone(),
        contractions: record.contractions.clone(),
        a_bar: abar,
        init_dist,
        state_error,
        tracking_error,
        dual_error,
        weighted_fpr,
        weighted_fpr_avg,
        objective_gap,
        objective_gap_avg,
        bound_tracking,
        bound_fpr_image,
        bound_fpr_drift,
        bound_objective,
        objective_constant,
        bound_primal_recovery,
        final_g_residual: record.residuals.last().map(|r| r.g_residual),
        verdicts,
    })
}
