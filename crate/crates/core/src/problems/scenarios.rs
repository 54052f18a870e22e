use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    AdmmCoupling, Family, LinearConstraint, ProblemInstance, ProblemStream, Readout, ScenarioConfig, Snapshot,
    TrackingForm,
};
use crate::error::{Error, Result};
use crate::functions::{ConvexFunction, ConvexSet};
use crate::operators::Vector;

/// One independent random stream per scenario component, so that adding a
/// component never perturbs the draws of another.
fn rng(seed: u64, component: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(component);
    r
}

fn gaussian_vector(r: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| r.sample::<f64, _>(StandardNormal)))
}

fn gaussian_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| r.sample::<f64, _>(StandardNormal)))
}

/// `U diag(linspace(m, M)) Uᵀ` with a random orthogonal `U`.
fn spectrum_matrix(r: &mut ChaCha8Rng, n: usize, m: f64, big_m: f64) -> DMatrix<f64> {
    let u = gaussian_matrix(r, n, n).qr().q();
    let eig = Vector::from_iterator(
        n,
        (0..n).map(|i| if n == 1 { m } else { m + (big_m - m) * i as f64 / (n - 1) as f64 }),
    );
    let q = &u * DMatrix::from_diagonal(&eig) * u.transpose();
    (&q + q.transpose()) * 0.5
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(format!("'{name}' must be positive, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(Error::config(format!("'{name}' must be at least {min}, got {v}")))
    }
}

fn curvature_keys(cfg: &ScenarioConfig, m: f64, big_m: f64) -> Result<(f64, f64)> {
    let m = positive("m", cfg.real_or("m", m)?)?;
    let big_m = positive("M", cfg.real_or("M", big_m)?)?;
    if m > big_m {
        return Err(Error::config(format!("m = {m} exceeds M = {big_m}")));
    }
    Ok((m, big_m))
}

fn optional_cube(cfg: &ScenarioConfig, n: usize) -> Result<ConvexSet> {
    match cfg.real("radius")? {
        Some(r) => ConvexSet::cube(n, positive("radius", r)?),
        None => Ok(ConvexSet::whole(n)),
    }
}

/// `½ (x − c)ᵀ Q (x − c)` as a quadratic with the Hessian's constants reused.
fn centered(base: &ConvexFunction, q: &DMatrix<f64>, c: &Vector) -> ConvexFunction {
    let qc = q * c;
    base.with_linear_term(-&qc, 0.5 * c.dot(&qc)).expect("quadratic base")
}

/// Build the stream described by `cfg`. It holds `horizon + 1` samples so
/// the optimizer after the last running step is defined.
pub fn make_scenario(cfg: &ScenarioConfig) -> Result<ProblemStream> {
    cfg.validate()?;
    let family = cfg.family()?;
    let steps = cfg.steps()?;
    let seed = cfg.seed()?;
    let period = positive("period", cfg.real_or("period", 1.0)?)?;
    let samples = steps + 1;
    let stream = match family {
        Family::StaticQuadratic => static_quadratic(cfg, samples, period, seed)?,
        Family::MovingQuadratic => moving_quadratic(cfg, samples, period, seed)?,
        Family::TvLasso => tv_lasso(cfg, samples, period, seed)?,
        Family::TvInequalityQp => tv_inequality_qp(cfg, samples, period, seed)?,
        Family::TvEqualityQp => tv_equality_qp(cfg, samples, period, seed)?,
        Family::TvAdmmConsensus => tv_admm_consensus(cfg, samples, period, seed)?,
        Family::LocalizationLite => localization_lite(cfg, samples, period, seed)?,
    };
    Ok(stream.with_family(family))
}

fn static_quadratic(cfg: &ScenarioConfig, samples: usize, period: f64, seed: u64) -> Result<ProblemStream> {
    let n = at_least("n", cfg.usize_or("n", 10)?, 1)?;
    let (m, big_m) = curvature_keys(cfg, 1.0, 2.0)?;
    let q = spectrum_matrix(&mut rng(seed, 1), n, m, big_m);
    let center = gaussian_vector(&mut rng(seed, 2), n);
    let set = optional_cube(cfg, n)?;
    let base = ConvexFunction::quadratic(q.clone(), Vector::zeros(n))?;
    let f = centered(&base, &q, &center);
    Ok(ProblemStream::new("static_quadratic", samples, period, seed, move |k| {
        ProblemInstance::new(k, period * k as f64, f.clone(), set.clone())
    }))
}

fn moving_quadratic(cfg: &ScenarioConfig, samples: usize, period: f64, seed: u64) -> Result<ProblemStream> {
    let n = at_least("n", cfg.usize_or("n", 2)?, 1)?;
    let (m, big_m) = curvature_keys(cfg, 1.0, 2.0)?;
    let drift = cfg.real_or("drift", 0.01)?;
    if !(drift >= 0.0) {
        return Err(Error::config("drift must be nonnegative"));
    }
    let geometric = cfg.get("schedule") == Some("geometric");
    let ratio = cfg.real_or("ratio", 0.5)?;
    if geometric && !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config("geometric ratio must lie in (0,1)"));
    }
    let q = spectrum_matrix(&mut rng(seed, 1), n, m, big_m);
    let set = optional_cube(cfg, n)?;
    let base = ConvexFunction::quadratic(q.clone(), Vector::zeros(n))?;
    Ok(ProblemStream::new("moving_quadratic", samples, period, seed, move |k| {
        // c_k = s_k e1; constant drift gives s_k = drift·k, geometric gives
        // steps s_{k+1} − s_k = drift·ratio^k
        let s = if geometric {
            (1..k).map(|j| drift * ratio.powi(j as i32)).sum::<f64>()
        } else {
            drift * k as f64
        };
        let mut c = Vector::zeros(n);
        c[0] = s;
        ProblemInstance::new(k, period * k as f64, centered(&base, &q, &c), set.clone())
    }))
}

fn tv_lasso(cfg: &ScenarioConfig, samples: usize, period: f64, seed: u64) -> Result<ProblemStream> {
    let n = at_least("n", cfg.usize_or("n", 8)?, 2)?;
    let rows = at_least("rows", cfg.usize_or("rows", 5)?, 1)?;
    let sparsity = cfg.usize_or("sparsity", 3)?.min(n);
    let weight = positive("weight", cfg.real_or("weight", 0.1)?)?;
    let radius = positive("radius", cfg.real_or("radius", 2.0)?)?;
    let amplitude = cfg.real_or("amplitude", 0.5)?;
    let omega = cfg.real_or("omega", 0.05)?;

    let a = gaussian_matrix(&mut rng(seed, 1), rows, n) / (rows as f64).sqrt();
    let mut r = rng(seed, 2);
    let mut support: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        support.swap(i, r.random_range(0..=i));
    }
    support.truncate(sparsity);
    let scale: Vec<f64> = (0..sparsity)
        .map(|_| {
            let mag = r.random_range(0.5..1.5);
            if r.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let phase: Vec<f64> = (0..sparsity).map(|_| r.random_range(0.0..TAU)).collect();
    let noise = gaussian_vector(&mut rng(seed, 3), rows) * 0.01;

    let set = ConvexSet::cube(n, radius)?;
    let base = ConvexFunction::least_squares(a.clone(), Vector::zeros(rows))?;
    let g = ConvexFunction::l1(n, weight)?;
    Ok(ProblemStream::new("tv_lasso", samples, period, seed, move |k| {
        let t = period * k as f64;
        let mut truth = Vector::zeros(n);
        for (j, &i) in support.iter().enumerate() {
            truth[i] = scale[j] * (1.0 + amplitude * (omega * t + phase[j]).sin());
        }
        let target = &a * truth + &noise;
        let mut inst = ProblemInstance::new(k, t, base.with_target(target).expect("shape"), set.clone());
        inst.g = Some(g.clone());
        inst
    }))
}

fn circle_offset(n: usize, amplitude: f64, angle: f64) -> Vector {
    let mut d = Vector::zeros(n);
    d[0] = amplitude * angle.cos();
    if n > 1 {
        d[1] = amplitude * angle.sin();
    }
    d
}

fn tv_inequality_qp(cfg: &ScenarioConfig, samples: usize, period: f64, seed: u64) -> Result<ProblemStream> {
    let n = at_least("n", cfg.usize_or("n", 4)?, 1)?;
    let rows = at_least("rows", cfg.usize_or("rows", 3)?, 1)?;
    let (m, big_m) = curvature_keys(cfg, 1.0, 4.0)?;
    let amplitude = cfg.real_or("amplitude", 1.0)?;
    let omega = cfg.real_or("omega", 0.05)?;

    let q = spectrum_matrix(&mut rng(seed, 1), n, m, big_m);
    let a = gaussian_matrix(&mut rng(seed, 2), rows, n);
    let mut r = rng(seed, 3);
    // x̄ = 0 is strictly feasible with slack at least 0.5
    let b = Vector::from_iterator(rows, (0..rows).map(|_| r.random_range(0.5..1.0)));
    let c0 = gaussian_vector(&mut rng(seed, 4), n) * 1.5;
    let base = ConvexFunction::quadratic(q.clone(), Vector::zeros(n))?;
    let constraint = LinearConstraint { a, b };
    Ok(ProblemStream::new("tv_inequality_qp", samples, period, seed, move |k| {
        let t = period * k as f64;
        let c = &c0 + circle_offset(n, amplitude, omega * t);
        let mut inst = ProblemInstance::new(k, t, centered(&base, &q, &c), ConvexSet::whole(n));
        inst.linear_ineq = Some(constraint.clone());
        inst.slater_point = Some(Vector::zeros(n));
        inst
    }))
}

fn tv_equality_qp(cfg: &ScenarioConfig, samples: usize, period: f64, seed: u64) -> Result<ProblemStream> {
    let n = at_least("n", cfg.usize_or("n", 4)?, 1)?;
    let rows = at_least("rows", cfg.usize_or("rows", 2)?, 1)?;
    let (m, big_m) = curvature_keys(cfg, 1.0, 4.0)?;
    let amplitude = cfg.real_or("amplitude", 1.0)?;
    let omega = cfg.real_or("omega", 0.05)?;
    let frozen = cfg.bool_or("static", false)?;

    let q = spectrum_matrix(&mut rng(seed, 1), n, m, big_m);
    let a = gaussian_matrix(&mut rng(seed, 2), rows, n);
    let c0 = gaussian_vector(&mut rng(seed, 3), n);
    let y0 = gaussian_vector(&mut rng(seed, 4), n);
    let base = ConvexFunction::quadratic(q.clone(), Vector::zeros(n))?;
    Ok(ProblemStream::new("tv_equality_qp", samples, period, seed, move |k| {
        let t = period * k as f64;
        let angle = if frozen { 0.0 } else { omega * t };
        let c = &c0 + circle_offset(n, amplitude, angle);
        // b_k = A y_k keeps b_k in the range of A
        let y = &y0 + circle_offset(n, amplitude, angle + 1.0);
        let mut inst = ProblemInstance::new(k, t, centered(&base, &q, &c), ConvexSet::whole(n));
        inst.linear_eq = Some(LinearConstraint { a: a.clone(), b: &a * y });
        inst
    }))
}

/// Consensus form: `min Σ_i f_i(x_i) + g(z)` s.t. `x_i = z`.
fn consensus_coupling(agents: usize, n: usize) -> AdmmCoupling {
    let mut b = DMatrix::zeros(agents * n, n);
    for i in 0..agents {
        for j in 0..n {
            b[(i * n + j, j)] = -1.0;
        }
    }
    AdmmCoupling { a: DMatrix::identity(agents * n, agents * n), b, c: Vector::zeros(agents * n) }
}

fn tv_admm_consensus(cfg: &ScenarioConfig, samples: usize, period: f64, seed: u64) -> Result<ProblemStream> {
    let agents = at_least("agents", cfg.usize_or("agents", 4)?, 1)?;
    let n = at_least("n", cfg.usize_or("n", 2)?, 1)?;
    let amplitude = cfg.real_or("amplitude", 1.0)?;
    let omega = cfg.real_or("omega", 0.05)?;
    let reg = cfg.real_or("reg", 0.0)?;
    if reg < 0.0 {
        return Err(Error::config("reg must be nonnegative"));
    }

    let mut r = rng(seed, 1);
    let weights: Vec<f64> = (0..agents).map(|_| r.random_range(0.5..2.0)).collect();
    let phases: Vec<f64> = (0..agents).map(|_| r.random_range(0.0..TAU)).collect();
    let centers: Vec<Vector> = (0..agents).map(|i| gaussian_vector(&mut rng(seed, 10 + i as u64), n)).collect();
    let dim = agents * n;
    let diag = Vector::from_iterator(dim, (0..dim).map(|i| weights[i / n]));
    let q = DMatrix::from_diagonal(&diag);
    let base = ConvexFunction::quadratic(q.clone(), Vector::zeros(dim))?;
    let g = if reg > 0.0 {
        ConvexFunction::squared_distance(&Vector::zeros(n), reg)?
    } else {
        ConvexFunction::zero(n)
    };
    let coupling = consensus_coupling(agents, n);
    Ok(ProblemStream::new("tv_admm_consensus", samples, period, seed, move |k| {
        let t = period * k as f64;
        let mut c = Vector::zeros(dim);
        for i in 0..agents {
            let ci = &centers[i] + circle_offset(n, amplitude, omega * t + phases[i]);
            c.rows_mut(i * n, n).copy_from(&ci);
        }
        let mut inst = ProblemInstance::new(k, t, centered(&base, &q, &c), ConvexSet::whole(dim));
        inst.g = Some(g.clone());
        inst.admm = Some(coupling.clone());
        inst
    }))
}

fn rotate(p: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Range-only localization, convexified.
///
/// Nodes and anchors rotate about the origin at angular speed `ω`. Every
/// range `r` (true distance plus fixed Gaussian noise) is paired with the
/// unit direction of the true geometry at time `t`, turning the range term
/// into the quadratic `½‖x_i − x_j − r u_ij(t)‖²`. Because ranges are
/// rotation invariant, the sampled optimizers rotate rigidly with the
/// network and `ω = 0` gives a static problem.
///
/// The problem is split for consensus ADMM: node `i` keeps copies of its
/// own position and of its neighbours' positions (the `x` block, `A = I`),
/// the `z` block holds one position per node, and `x − E z = 0` ties each
/// copy to its owner. Each edge term is shared half-and-half by its two
/// endpoints; anchor terms belong to the node alone.
fn localization_lite(cfg: &ScenarioConfig, samples: usize, period: f64, seed: u64) -> Result<ProblemStream> {
    let nodes = at_least("nodes", cfg.usize_or("nodes", 8)?, 1)?;
    let anchors = at_least("anchors", cfg.usize_or("anchors", 5)?, 1)?;
    let noise = cfg.real_or("noise", 0.1)?;
    let max_degree = at_least("max_degree", cfg.usize_or("max_degree", 3)?, 1)?;
    let omega = cfg.real_or("omega", std::f64::consts::PI / 100.0)?;
    let half = positive("half_width", cfg.real_or("half_width", 0.5)?)?;
    if noise < 0.0 {
        return Err(Error::config("noise must be nonnegative"));
    }

    let mut r = rng(seed, 1);
    let mut draw = || [r.random_range(-half..half), r.random_range(-half..half)];
    let node_pos: Vec<[f64; 2]> = (0..nodes).map(|_| draw()).collect();
    let anchor_pos: Vec<[f64; 2]> = (0..anchors).map(|_| draw()).collect();
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();

    // nearest-first edges, capped degree
    let mut pairs: Vec<(usize, usize)> = (0..nodes).flat_map(|i| (i + 1..nodes).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(a, b), &(c, d)| dist(node_pos[a], node_pos[b]).total_cmp(&dist(node_pos[c], node_pos[d])));
    let mut degree = vec![0usize; nodes];
    let mut edges = Vec::new();
    for (i, j) in pairs {
        if degree[i] < max_degree && degree[j] < max_degree {
            degree[i] += 1;
            degree[j] += 1;
            edges.push((i, j));
        }
    }
    let nearest_anchor: Vec<usize> = (0..nodes)
        .map(|i| {
            (0..anchors)
                .min_by(|&a, &b| dist(node_pos[i], anchor_pos[a]).total_cmp(&dist(node_pos[i], anchor_pos[b])))
                .expect("at least one anchor")
        })
        .collect();

    // noise is drawn once per link, from a per-link stream
    let edge_range: Vec<f64> = edges
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| {
            dist(node_pos[i], node_pos[j]) + noise * rng(seed, 100 + e as u64).sample::<f64, _>(StandardNormal)
        })
        .collect();
    let anchor_range: Vec<f64> = (0..nodes)
        .map(|i| {
            dist(node_pos[i], anchor_pos[nearest_anchor[i]])
                + noise * rng(seed, 10_000 + i as u64).sample::<f64, _>(StandardNormal)
        })
        .collect();
    let unit = |a: [f64; 2], b: [f64; 2]| {
        let d = dist(a, b).max(1e-12);
        [(a[0] - b[0]) / d, (a[1] - b[1]) / d]
    };
    let edge_dir: Vec<[f64; 2]> = edges.iter().map(|&(i, j)| unit(node_pos[i], node_pos[j])).collect();
    let anchor_dir: Vec<[f64; 2]> = (0..nodes).map(|i| unit(node_pos[i], anchor_pos[nearest_anchor[i]])).collect();

    // local copy layout: node i owns [own, neighbours...]
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for &(i, j) in &edges {
        neighbours[i].push(j);
        neighbours[j].push(i);
    }
    let mut offset = vec![0usize; nodes];
    let mut copies: Vec<usize> = Vec::new(); // owner of each copy
    for i in 0..nodes {
        offset[i] = copies.len();
        copies.push(i);
        copies.extend(neighbours[i].iter().copied());
    }
    let slot = move |i: usize, j: usize| -> usize {
        if i == j {
            offset[i]
        } else {
            offset[i] + 1 + neighbours[i].iter().position(|&v| v == j).expect("neighbour")
        }
    };
    let dim_x = 2 * copies.len();
    let dim_z = 2 * nodes;

    // Hessian: edge terms contribute ¼‖a − b‖² at each endpoint, anchors ½‖a‖²
    let mut h = DMatrix::zeros(dim_x, dim_x);
    let add_pair = |h: &mut DMatrix<f64>, s: usize, t: usize, w: f64| {
        for d in 0..2 {
            let (a, b) = (2 * s + d, 2 * t + d);
            h[(a, a)] += w;
            h[(b, b)] += w;
            h[(a, b)] -= w;
            h[(b, a)] -= w;
        }
    };
    for &(i, j) in &edges {
        for owner in [i, j] {
            add_pair(&mut h, slot(owner, i), slot(owner, j), 0.5);
        }
    }
    for i in 0..nodes {
        let s = slot(i, i);
        h[(2 * s, 2 * s)] += 1.0;
        h[(2 * s + 1, 2 * s + 1)] += 1.0;
    }
    let base = ConvexFunction::quadratic(h.clone(), Vector::zeros(dim_x))?;
    let mut e = DMatrix::zeros(dim_x, dim_z);
    for (c, &owner) in copies.iter().enumerate() {
        e[(2 * c, 2 * owner)] = 1.0;
        e[(2 * c + 1, 2 * owner + 1)] = 1.0;
    }
    let coupling = AdmmCoupling { a: DMatrix::identity(dim_x, dim_x), b: -e, c: Vector::zeros(dim_x) };
    let g = ConvexFunction::zero(dim_z);

    Ok(ProblemStream::new("localization_lite", samples, period, seed, move |k| {
        let t = period * k as f64;
        let angle = omega * t;
        let anchors_t: Vec<[f64; 2]> = anchor_pos.iter().map(|&p| rotate(p, angle)).collect();
        // linear term of Σ ½ w ‖(a − b) − v‖² is w·(−v at a, +v at b)
        let mut lin = Vector::zeros(dim_x);
        let mut constant = 0.0;
        for (ei, &(i, j)) in edges.iter().enumerate() {
            let u = rotate(edge_dir[ei], angle);
            let v = [edge_range[ei] * u[0], edge_range[ei] * u[1]];
            for owner in [i, j] {
                let (a, b) = (slot(owner, i), slot(owner, j));
                for d in 0..2 {
                    lin[2 * a + d] -= 0.5 * v[d];
                    lin[2 * b + d] += 0.5 * v[d];
                }
                constant += 0.25 * (v[0] * v[0] + v[1] * v[1]);
            }
        }
        for i in 0..nodes {
            let u = rotate(anchor_dir[i], angle);
            let a = anchors_t[nearest_anchor[i]];
            let target = [a[0] + anchor_range[i] * u[0], a[1] + anchor_range[i] * u[1]];
            let s = slot(i, i);
            for d in 0..2 {
                lin[2 * s + d] -= target[d];
            }
            constant += 0.5 * (target[0] * target[0] + target[1] * target[1]);
        }
        let mut inst = ProblemInstance::new(
            k,
            t,
            base.with_linear_term(lin, constant).expect("quadratic"),
            ConvexSet::whole(dim_x),
        );
        inst.g = Some(g.clone());
        inst.admm = Some(coupling.clone());
        inst.snapshot = Some(Snapshot {
            anchors: anchors_t,
            truth: node_pos.iter().map(|&p| rotate(p, angle)).collect(),
        });
        inst
    })
    .with_tracking(TrackingForm::SquaredSum, Readout::Auxiliary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pairs: &[(&str, &str)]) -> ScenarioConfig {
        ScenarioConfig::from_pairs(pairs).unwrap()
    }

    #[test]
    fn moving_quadratic_center() {
        let s = make_scenario(&cfg(&[("family", "moving_quadratic"), ("drift", "0.01"), ("n", "2")])).unwrap();
        let inst = s.sample(5).unwrap();
        let x = inst.f.argmin_linear(&Vector::zeros(2), &inst.feasible_set).unwrap();
        assert!((x - Vector::from_column_slice(&[0.05, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn every_family_validates_for_its_algorithm() {
        for family in Family::ALL {
            let s = make_scenario(&cfg(&[("family", family.name()), ("horizon", "5")])).unwrap();
            assert_eq!(s.horizon(), 6);
            for k in 1..=s.horizon() {
                s.sample(k).unwrap().validate(family.default_algorithm()).unwrap();
            }
        }
    }

    #[test]
    fn localization_is_rotation_equivariant() {
        let s = make_scenario(&cfg(&[("family", "localization_lite"), ("omega", "0.3"), ("horizon", "3")])).unwrap();
        let (a, b) = (s.sample(1).unwrap(), s.sample(2).unwrap());
        assert!(a.f.strong_convexity() > 0.0);
        let sa = a.snapshot.unwrap();
        let sb = b.snapshot.unwrap();
        for (p, q) in sa.truth.iter().zip(&sb.truth) {
            let r = rotate(*p, 0.3);
            assert!((r[0] - q[0]).abs() < 1e-12 && (r[1] - q[1]).abs() < 1e-12);
        }
        let still = make_scenario(&cfg(&[("family", "localization_lite"), ("omega", "0"), ("horizon", "3")])).unwrap();
        assert_eq!(still.sample(1).unwrap().f, still.sample(3).unwrap().f);
    }

    #[test]
    fn inconsistent_configs_are_rejected() {
        assert!(make_scenario(&cfg(&[("family", "static_quadratic"), ("m", "3"), ("M", "2")])).is_err());
        assert!(make_scenario(&cfg(&[("family", "static_quadratic"), ("n", "0")])).is_err());
        assert!(make_scenario(&cfg(&[("family", "moving_quadratic"), ("schedule", "geometric"), ("ratio", "2")])).is_err());
        assert!(make_scenario(&cfg(&[("family", "static_quadratic"), ("horizon", "0")])).is_err());
    }
}
