//! Randomized checks of the regularity estimates behind the Hölder-free
//! smoothness of the unstable distribution, and a fit of the constants in
//! the final inequality on one local stable leaf.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    bracket, compute_splitting, contraction_bound, contraction_factor, fitted_rate, geometric_potential_at,
    graph_distance, pushforward, splitting_along_orbit, stable_companion, GraphMap, Subspace,
};
use super::leaves::companion_through;
use crate::error::{Error, Result};
use crate::modulus::{empirical_modulus, Modulus};
use crate::rng::{stream, symmetric, uniform_point};
use crate::systems::{Frame, Mat2, Point, SmoothSystem, Vec2};

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub lemma: u8,
    pub system: String,
    pub samples: usize,
    pub fitted_constants: BTreeMap<String, f64>,
    /// Largest violation of the checked inequality (`≤ 0` or within the
    /// stated tolerance when it holds).
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl LemmaReport {
    fn new(lemma: u8, system: String, samples: usize, max_violation: f64, tolerance: f64) -> Self {
        LemmaReport {
            lemma,
            system,
            samples,
            fitted_constants: BTreeMap::new(),
            max_violation,
            tolerance,
            passed: max_violation <= tolerance,
        }
    }

    fn constant(mut self, name: &str, value: f64) -> Self {
        self.fitted_constants.insert(name.to_string(), value);
        self
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NEG_INFINITY, f64::max)
}

fn random_point(s: &dyn SmoothSystem, rng: &mut impl Rng) -> Point {
    let p = uniform_point(rng);
    if s.on_torus() {
        p
    } else {
        Point::new(0.05 + 0.9 * p.x1(), 0.05 + 0.9 * p.x2())
    }
}

/// Graph-map distance contracts under `df` by at most `‖df|_{E^s}‖‖df⁻¹|_{E^u}‖`,
/// for random pairs of lines near `E^u` at random points.
pub fn verify_lemma1(s: &dyn SmoothSystem, samples: usize, seed: u64) -> Result<LemmaReport> {
    let rows: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let x = random_point(s, &mut rng);
            let frame = compute_splitting(s, x, 60, 1e-12)?.frame();
            let df = s.differential(x);
            let l1 = symmetric(&mut rng, 0.5);
            let mut l2 = symmetric(&mut rng, 0.5);
            if l2 == l1 {
                l2 += 0.1;
            }
            let e = GraphMap { frame, l: l1 }.subspace(x);
            let f = GraphMap { frame, l: l2 }.subspace(x);
            Ok((contraction_factor(&df, &frame, &e, &f)?, contraction_bound(&df, &frame)))
        })
        .collect::<Result<_>>()?;
    let violation = max_of(rows.iter().map(|(f, b)| f - b));
    let max_bound = max_of(rows.iter().map(|r| r.1));
    // In two dimensions the factor equals the bound, so only the splitting's rounding separates them.
    let tol = 1e-9 * max_bound.max(1e-3);
    Ok(LemmaReport::new(1, s.descriptor().name, samples, violation, tol)
        .constant("max_factor", max_of(rows.iter().map(|r| r.0)))
        .constant("max_bound", max_bound))
}

/// `d(B E^u, E^u) ≤ ε` for random `B` with `‖A − B‖ ≤ ε ≤ eps_max`, distances
/// in the eigen-splitting of the hyperbolic matrix `A`.
pub fn verify_lemma2(a: &Mat2, samples: usize, eps_max: f64, seed: u64) -> Result<LemmaReport> {
    let frame = eigen_frame(a)?;
    let eu = Subspace::new(Point::new(0.0, 0.0), frame.uv())?;
    let rows: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let eps = eps_max * (1.0 - rng.random::<f64>());
            let raw = Mat2::from_fn(|_, _| symmetric(&mut rng, 1.0));
            let norm = raw.svd(false, false).singular_values.max();
            let b = a + raw * (eps / norm);
            let d = graph_distance(&pushforward(&b, &eu)?, &eu, &frame)?;
            Ok((d, eps))
        })
        .collect::<Result<_>>()?;
    let violation = max_of(rows.iter().map(|(d, e)| d - e));
    Ok(LemmaReport::new(2, "matrix".into(), samples, violation, 1e-15)
        .constant("max_ratio", max_of(rows.iter().map(|(d, e)| d / e)))
        .constant("eps_max", eps_max))
}

/// Unit eigenvectors of a hyperbolic `2×2` matrix, expanding first.
pub fn eigen_frame(a: &Mat2) -> Result<Frame> {
    let tr = a.trace();
    let det = a.determinant();
    let disc = tr * tr / 4.0 - det;
    if disc <= 0.0 {
        return Err(Error::invalid("matrix has no real eigen-splitting"));
    }
    let r = disc.sqrt();
    let (l1, l2) = (tr / 2.0 + r, tr / 2.0 - r);
    let (big, small) = if l1.abs() >= l2.abs() { (l1, l2) } else { (l2, l1) };
    if !(big.abs() > 1.0 && small.abs() < 1.0) {
        return Err(Error::invalid("matrix is not hyperbolic"));
    }
    let vec_for = |l: f64| -> Vec2 {
        let c1 = Vec2::new(a[(0, 1)], l - a[(0, 0)]);
        let c2 = Vec2::new(l - a[(1, 1)], a[(1, 0)]);
        if c1.norm() >= c2.norm() {
            c1
        } else {
            c2
        }
    };
    Frame::new(vec_for(big), vec_for(small))
}

fn rotate(v: Vec2, theta: f64) -> Vec2 {
    let (sn, cs) = theta.sin_cos();
    Vec2::new(cs * v[0] - sn * v[1], sn * v[0] + cs * v[1])
}

/// Distances measured in a reference splitting and in one perturbed by
/// angles up to `ε` agree within a factor `δ(ε)` that decreases to 1.
pub fn verify_lemma3(samples: usize, eps_list: &[f64], seed: u64) -> Result<LemmaReport> {
    if eps_list.len() < 2 {
        return Err(Error::invalid("need at least two perturbation sizes"));
    }
    let frame = Frame::cat_eigen();
    let origin = Point::new(0.0, 0.0);
    let mut deltas = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let worst = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i as u64);
                let (tu, ts) = (symmetric(&mut rng, 1.0), symmetric(&mut rng, 1.0));
                let other = Frame::new(rotate(frame.uv(), eps * tu), rotate(frame.sv(), eps * ts))?;
                let (l1, l2) = (symmetric(&mut rng, 0.5), symmetric(&mut rng, 0.5));
                let e = GraphMap { frame, l: l1 }.subspace(origin);
                let f = GraphMap { frame, l: l2 }.subspace(origin);
                let d0 = graph_distance(&e, &f, &frame)?;
                if d0 == 0.0 {
                    return Ok(1.0);
                }
                let r = graph_distance(&e, &f, &other)? / d0;
                Ok(r.max(1.0 / r))
            })
            .collect::<Result<Vec<f64>>>()?;
        deltas.push((eps, max_of(worst.into_iter())));
    }
    let mut sorted = deltas.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Violations: δ must increase strictly with ε, and the smallest ε must
    // give δ within 10ε of 1.
    let mut violation = sorted.windows(2).map(|w| w[0].1 - w[1].1).fold(f64::NEG_INFINITY, f64::max);
    let (e_min, d_min) = sorted[0];
    violation = violation.max(d_min - 1.0 - 10.0 * e_min);
    let mut report = LemmaReport::new(3, "cat-map".into(), samples * eps_list.len(), violation, 0.0);
    report.passed = violation < 0.0;
    for (eps, delta) in deltas {
        report = report.constant(&format!("delta({eps})"), delta);
    }
    Ok(report)
}

/// `Σ_{k<n} c^{n−k} ω(d(fᵏx, fᵏy)) ≤ c/(λ−c) · ω(λⁿ d(x, y))` for random
/// stable-leaf pairs, random moduli and `c ∈ (0, λ)`, where `λ` is the
/// measured contraction of the pair.
pub fn verify_lemma4(s: &dyn SmoothSystem, samples: usize, seed: u64) -> Result<LemmaReport> {
    let rows: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let x = random_point(s, &mut rng);
            let t = 0.01 + 0.09 * rng.random::<f64>();
            let t = if rng.random::<bool>() { t } else { -t };
            let n = rng.random_range(1..=20usize);
            let pair = stable_companion(s, x, t, n)?;
            let d = pair.distances(s);
            let lambda = max_of((1..=n).map(|k| (d[k] / d[0]).powf(1.0 / k as f64)));
            if !(lambda < 1.0) {
                return Err(Error::Precondition(format!("stable-leaf pair does not contract (λ = {lambda})")));
            }
            let c = lambda * (0.05 + 0.9 * rng.random::<f64>());
            let omega = if rng.random::<bool>() {
                Modulus::power(0.2 + 0.8 * rng.random::<f64>())?
            } else {
                Modulus::log_power(1.5 + 1.5 * rng.random::<f64>())?
            };
            let lhs: f64 = (0..n).map(|k| c.powi((n - k) as i32) * omega.value(d[k])).sum();
            let rhs = c / (lambda - c) * omega.value(lambda.powi(n as i32) * d[0]);
            Ok((lhs / rhs - 1.0, lambda))
        })
        .collect::<Result<_>>()?;
    let violation = max_of(rows.iter().map(|r| r.0));
    Ok(LemmaReport::new(4, s.descriptor().name, samples, violation, 1e-9)
        .constant("max_lambda", max_of(rows.iter().map(|r| r.1))))
}

/// `|φ^u(x) − φ^u(y)| ≤ 2 ω(K d(x, y))` for random close pairs, with `ω` the
/// least concave majorant of the variation of `φ^u` along stable and
/// unstable leaves through the bracket `[x, y]`, and `K` the fitted
/// local-product constant.
pub fn verify_lemma5(s: &dyn SmoothSystem, samples: usize, radius: f64, seed: u64) -> Result<LemmaReport> {
    if !(radius > 0.0) {
        return Err(Error::invalid("pair radius must be positive"));
    }
    struct Row {
        d: f64,
        gap: f64,
        leaf_s: (f64, f64),
        leaf_u: (f64, f64),
        k: f64,
    }
    let rows: Vec<Row> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let x = random_point(s, &mut rng);
            let angle = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            let r = radius * (0.2 + 0.8 * rng.random::<f64>());
            let y = s.translate(x, Vec2::new(angle.cos(), angle.sin()) * r);
            let z = bracket(s, x, y)?;
            let (gx, gy, gz) = (geometric_potential_at(s, x)?, geometric_potential_at(s, y)?, geometric_potential_at(s, z)?);
            let d = s.metric(x, y);
            let (ds, du) = (s.metric(x, z), s.metric(z, y));
            Ok(Row { d, gap: (gx - gy).abs(), leaf_s: (ds, (gx - gz).abs()), leaf_u: (du, (gz - gy).abs()), k: ds.max(du) / d })
        })
        .collect::<Result<_>>()?;
    let k = max_of(rows.iter().map(|r| r.k));
    let leaf_pairs: Vec<(f64, f64)> =
        rows.iter().flat_map(|r| [r.leaf_s, r.leaf_u]).filter(|p| p.0 > 0.0).collect();
    let omega = empirical_modulus(&leaf_pairs)?;
    let violation = max_of(rows.iter().map(|r| r.gap - 2.0 * omega.value(k * r.d)));
    let declared = Modulus::log_power(2.0)?.fit_constant(&leaf_pairs);
    Ok(LemmaReport::new(5, s.descriptor().name, samples, violation, 1e-12)
        .constant("K", k)
        .constant("omega_at_radius", omega.value(radius))
        .constant("log_power2_constant", declared))
}

#[derive(Clone, Debug, Serialize)]
pub struct MainInequalityRow {
    pub sample: usize,
    pub n: usize,
    pub point_distance: f64,
    pub subspace_distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MainInequalityReport {
    pub lambda: f64,
    pub delta: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    /// Worst per-sample fitted decay rate of `d(E^u_{fⁿx}, E^u_{fⁿy})`.
    pub rate: Option<f64>,
    pub max_violation: f64,
    pub rows: Vec<MainInequalityRow>,
}

/// Fits `M₁ = 1`, `M₂`, `M₃` in
/// `d(E^u_{fⁿx}, E^u_{fⁿy}) ≤ M₁ (δλ)^{2n} d(E^u_x, E^u_y) + M₂ ω(M₃ λⁿ d(x, y))`
/// for `y` on the local stable leaf of `x0` and `n ≤ n_max`, with `ω` the
/// declared modulus of `df`.
pub fn verify_main_inequality(
    s: &dyn SmoothSystem,
    x0: Point,
    leaf_samples: &[Point],
    n_max: usize,
) -> Result<MainInequalityReport> {
    if leaf_samples.is_empty() || n_max == 0 {
        return Err(Error::invalid("need at least one leaf sample and n_max >= 1"));
    }
    let (_, frames) = splitting_along_orbit(s, x0, n_max)?;
    let mut rows = Vec::new();
    let mut lambda: f64 = 0.0;
    let mut rates = Vec::new();
    let mut d0s = Vec::new();
    for (i, &y) in leaf_samples.iter().enumerate() {
        let pair = companion_through(s, x0, y, n_max, 0.5).map_err(|e| match e {
            Error::Precondition(msg) => Error::Precondition(format!("sample {i} is not on the local stable leaf: {msg}")),
            other => other,
        })?;
        let dist = pair.distances(s);
        if dist[0] == 0.0 {
            continue;
        }
        let mut v = compute_splitting(s, pair.ys[0], 60, 1e-12)?.unstable.v();
        let mut history = Vec::new();
        for n in 0..=n_max {
            let eu_x = Subspace::new(pair.xs[n], frames[n].uv())?;
            let eu_y = Subspace::new(pair.ys[n], v)?;
            let gap = graph_distance(&eu_y, &eu_x, &frames[n])?;
            rows.push(MainInequalityRow { sample: i, n, point_distance: dist[n], subspace_distance: gap });
            if n >= 1 {
                lambda = lambda.max((dist[n] / dist[0]).powf(1.0 / n as f64));
                history.push(gap);
            }
            if n < n_max {
                v = s.differential(pair.ys[n]) * v;
                v /= v.norm();
            }
        }
        d0s.push((i, dist[0]));
        if let Some(r) = fitted_rate_from(&history) {
            rates.push(r);
        }
    }
    if !(lambda < 1.0) {
        return Err(Error::Precondition(format!("leaf samples do not contract (λ = {lambda})")));
    }
    let omega = s.modulus_of_df();
    let (delta, m1) = (1.0, 1.0);
    let initial: BTreeMap<usize, f64> =
        rows.iter().filter(|r| r.n == 0).map(|r| (r.sample, r.subspace_distance)).collect();
    let base: BTreeMap<usize, f64> = d0s.into_iter().collect();
    let excess = |r: &MainInequalityRow| {
        let first = initial[&r.sample];
        r.subspace_distance - m1 * (delta * lambda).powi(2 * r.n as i32) * first
    };
    let r_max = base.values().fold(0.0f64, |m, &d| m.max(d));
    let mut best = (f64::INFINITY, f64::INFINITY, 1.0);
    for j in 0..=40 {
        let m3 = 10f64.powf(-2.0 + 4.0 * j as f64 / 40.0);
        let mut m2: f64 = 0.0;
        for r in &rows {
            let e = excess(r);
            if e <= 0.0 {
                continue;
            }
            let w = omega.value(m3 * lambda.powi(r.n as i32) * base[&r.sample]);
            m2 = m2.max(if w > 0.0 { e / w } else { f64::INFINITY });
        }
        let size = m2 * omega.value(m3 * r_max);
        let size = if m2 == 0.0 { 0.0 } else { size };
        if size < best.0 {
            best = (size, m2, m3);
        }
    }
    let (_, m2, m3) = best;
    let max_violation = max_of(rows.iter().map(|r| {
        let bound = m1 * (delta * lambda).powi(2 * r.n as i32) * initial[&r.sample]
            + if m2 == 0.0 { 0.0 } else { m2 * omega.value(m3 * lambda.powi(r.n as i32) * base[&r.sample]) };
        r.subspace_distance - bound
    }));
    let rate = rates.into_iter().reduce(f64::max);
    Ok(MainInequalityReport { lambda, delta, m1, m2, m3, rate, max_violation, rows })
}

/// Decay rate over the entries of a `n = 1, 2, …` sequence above the rounding floor.
fn fitted_rate_from(history: &[f64]) -> Option<f64> {
    let cut: Vec<f64> = history.iter().copied().take_while(|&h| h > 1e-13).collect();
    fitted_rate(&cut)
}
