//! Topological pressure from separated sets, Bowen-ball volumes, and the
//! attractor criterion `P(φ^u) = 0`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grassmann::{log_unstable_jacobian, splitting_along_orbit};
use crate::rng;
use crate::systems::{Point, SmoothSystem};

/// Rows whose separated set holds more than this fraction of the candidate
/// cloud are limited by the cloud's resolution rather than by the dynamics.
pub const SATURATION_FRACTION: f64 = 0.1;

const ORDER_SEED: u64 = 0x5eed;

/// The dynamical metric `d_n` at scale `ε`.
#[derive(Clone, Copy, Debug)]
pub struct DynMetricContext<'a> {
    pub system: &'a dyn SmoothSystem,
    pub n: usize,
    pub epsilon: f64,
}

impl<'a> DynMetricContext<'a> {
    pub fn new(system: &'a dyn SmoothSystem, n: usize, epsilon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(DynMetricContext { system, n, epsilon })
    }
}

/// `d_n(x, y) = max_{0≤k<n} d(fᵏx, fᵏy)`.
pub fn dyn_distance(ctx: &DynMetricContext<'_>, x: Point, y: Point) -> f64 {
    let s = ctx.system;
    let (mut a, mut b) = (x, y);
    let mut d = s.metric(a, b);
    for _ in 1..ctx.n {
        a = s.apply(a);
        b = s.apply(b);
        d = d.max(s.metric(a, b));
    }
    d
}

fn forward_orbits(s: &dyn SmoothSystem, candidates: &[Point], n: usize) -> Vec<Vec<Point>> {
    candidates
        .par_iter()
        .map(|&x| {
            let mut o = Vec::with_capacity(n);
            let mut p = x;
            for k in 0..n {
                if k > 0 {
                    p = s.apply(p);
                }
                o.push(p);
            }
            o
        })
        .collect()
}

/// A greedy maximal `(n, ε)`-separated subset of a candidate cloud. By
/// maximality every candidate lies within `d_n`-distance `ε` of it, so it is
/// also `(n, ε)`-spanning for the cloud.
#[derive(Clone, Debug, Serialize)]
pub struct SeparatedSet {
    pub points: Vec<Point>,
    /// Positions of the chosen points in the candidate list.
    pub indices: Vec<usize>,
    pub candidates: usize,
}

pub fn separated_set(ctx: &DynMetricContext<'_>, candidates: &[Point]) -> SeparatedSet {
    let orbits = forward_orbits(ctx.system, candidates, ctx.n);
    let indices = greedy_separated(ctx.system, &orbits, ctx.n, ctx.epsilon);
    SeparatedSet { points: indices.iter().map(|&i| candidates[i]).collect(), indices, candidates: candidates.len() }
}

/// Greedy selection in a fixed pseudo-random order of the candidates, which
/// keeps the packing statistics independent of how the exclusion region is
/// oriented relative to the candidate layout. Candidates are bucketed by their
/// positions at times `0` and `n − 1` on a grid of cell size at least `ε`;
/// points within `d_n`-distance `ε` share neighbouring cells at both times,
/// so only chosen points in the 81 adjacent buckets need a full comparison.
fn greedy_separated(s: &dyn SmoothSystem, orbits: &[Vec<Point>], n: usize, eps: f64) -> Vec<usize> {
    let torus = s.on_torus();
    let per_side = (1.0 / eps).floor().max(1.0) as i64;
    let cell_size = if torus { 1.0 / per_side as f64 } else { eps };
    let wrap = |i: i64| if torus { i.rem_euclid(per_side) } else { i };
    let cell = |p: Point| [wrap((p.0[0] / cell_size).floor() as i64), wrap((p.0[1] / cell_size).floor() as i64)];
    let around = |c: [i64; 2]| {
        let mut out: Vec<[i64; 2]> = Vec::with_capacity(9);
        for di in -1..=1 {
            for dj in -1..=1 {
                let v = [wrap(c[0] + di), wrap(c[1] + dj)];
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    };
    let mut order: Vec<usize> = (0..orbits.len()).collect();
    order.shuffle(&mut rng::stream(ORDER_SEED, 0));
    let mut grid: HashMap<[i64; 4], Vec<usize>> = HashMap::new();
    let mut chosen = Vec::new();
    for i in order {
        let orbit = &orbits[i];
        let (c0, c1) = (cell(orbit[0]), cell(orbit[n - 1]));
        let (near0, near1) = (around(c0), around(c1));
        let covered = near0.iter().any(|a| {
            near1.iter().any(|b| {
                grid.get(&[a[0], a[1], b[0], b[1]]).is_some_and(|members| {
                    members.iter().any(|&j| orbit.iter().zip(&orbits[j]).take(n).all(|(p, q)| s.metric(*p, *q) <= eps))
                })
            })
        });
        if !covered {
            grid.entry([c0[0], c0[1], c1[0], c1[1]]).or_default().push(i);
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// A potential evaluated through its Birkhoff sums along orbit segments.
#[derive(Clone)]
pub enum OrbitPotential {
    Constant(f64),
    /// `φ^u + shift`.
    Geometric { shift: f64 },
    Custom(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for OrbitPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrbitPotential::Constant(c) => write!(f, "Constant({c})"),
            OrbitPotential::Geometric { shift } => write!(f, "Geometric {{ shift: {shift} }}"),
            OrbitPotential::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl OrbitPotential {
    pub fn zero() -> Self {
        OrbitPotential::Constant(0.0)
    }

    pub fn geometric() -> Self {
        OrbitPotential::Geometric { shift: 0.0 }
    }

    pub fn name(&self) -> String {
        match self {
            OrbitPotential::Constant(c) => format!("constant({c})"),
            OrbitPotential::Geometric { shift } if *shift == 0.0 => "geometric".into(),
            OrbitPotential::Geometric { shift } => format!("geometric{shift:+}"),
            OrbitPotential::Custom(_) => "custom".into(),
        }
    }

    /// `S_n φ(x) = Σ_{k<n} φ(fᵏ x)`.
    pub fn birkhoff_sum(&self, s: &dyn SmoothSystem, x: Point, n: usize) -> Result<f64> {
        match self {
            OrbitPotential::Constant(c) => Ok(c * n as f64),
            OrbitPotential::Geometric { shift } => {
                let (xs, frames) = splitting_along_orbit(s, x, n.saturating_sub(1))?;
                let total: f64 = xs.iter().zip(&frames).map(|(p, fr)| -(s.differential(*p) * fr.uv()).norm().ln()).sum();
                Ok(total + shift * n as f64)
            }
            OrbitPotential::Custom(f) => {
                let mut p = x;
                let mut total = 0.0;
                for k in 0..n {
                    if k > 0 {
                        p = s.apply(p);
                    }
                    total += f(p);
                }
                Ok(total)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureRow {
    pub n: usize,
    pub epsilon: f64,
    pub separated: usize,
    /// `log Σ_{x∈E} e^{S_n φ(x)}` over the separated set `E`.
    pub log_sum: f64,
    /// `log_sum / n`.
    pub per_n: f64,
    pub saturated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PressureEstimate {
    pub rows: Vec<PressureRow>,
    /// `(n, log P_n / n)` at the smallest tested ε.
    pub per_n: Vec<(usize, f64)>,
    pub extrapolated: f64,
    /// Spread (max − min) of the values averaged into `extrapolated`.
    pub spread: f64,
    pub method: String,
    /// Top-quartile average of `log P_n / n` at the smallest ε, reported for comparison.
    pub windowed_average: f64,
    pub epsilon_used: f64,
    pub sample_size: usize,
    pub warnings: Vec<String>,
}

/// Pressure estimate from greedy separated sets of the candidate cloud.
///
/// At the smallest ε the growth rate is read off as the mean increment
/// `(log P_{n'} − log P_n)/(n' − n)` over the top quartile of consecutive
/// unsaturated rows. The increments cancel the `log(1/ε²)` offset that makes
/// `log P_n / n` converge only like `1/n`.
pub fn pressure_estimate(
    s: &dyn SmoothSystem,
    potential: &OrbitPotential,
    eps_list: &[f64],
    n_list: &[usize],
    candidates: &[Point],
) -> Result<PressureEstimate> {
    let est = pressure_estimates(s, std::slice::from_ref(potential), eps_list, n_list, candidates)?;
    Ok(est.into_iter().next().expect("one potential in, one estimate out"))
}

/// As `pressure_estimate`, sharing the separated sets between potentials.
pub fn pressure_estimates(
    s: &dyn SmoothSystem,
    potentials: &[OrbitPotential],
    eps_list: &[f64],
    n_list: &[usize],
    candidates: &[Point],
) -> Result<Vec<PressureEstimate>> {
    if eps_list.is_empty() || n_list.is_empty() || candidates.is_empty() {
        return Err(Error::invalid("ε list, n list and candidate cloud must be non-empty"));
    }
    if n_list.contains(&0) {
        return Err(Error::invalid("n must be at least 1"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("ε values must be positive"));
    }
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let n_max = *ns.last().expect("non-empty");
    let orbits = forward_orbits(s, candidates, n_max);
    let tasks: Vec<(f64, usize)> = eps_list.iter().flat_map(|&e| ns.iter().map(move |&n| (e, n))).collect();
    let chosen: Vec<Vec<usize>> = tasks.par_iter().map(|&(e, n)| greedy_separated(s, &orbits, n, e)).collect();
    let mut out = Vec::with_capacity(potentials.len());
    for pot in potentials {
        let mut rows = Vec::with_capacity(tasks.len());
        for (&(epsilon, n), idx) in tasks.iter().zip(&chosen) {
            let sums = idx.par_iter().map(|&i| pot.birkhoff_sum(s, candidates[i], n)).collect::<Result<Vec<f64>>>()?;
            let log_sum = log_sum_exp(&sums);
            rows.push(PressureRow {
                n,
                epsilon,
                separated: idx.len(),
                log_sum,
                per_n: log_sum / n as f64,
                saturated: idx.len() as f64 > SATURATION_FRACTION * candidates.len() as f64,
            });
        }
        out.push(extrapolate(rows, candidates.len()));
    }
    Ok(out)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn top_quartile(n: usize) -> usize {
    n.div_ceil(4).max(1)
}

fn extrapolate(rows: Vec<PressureRow>, sample_size: usize) -> PressureEstimate {
    let eps = rows.iter().map(|r| r.epsilon).fold(f64::INFINITY, f64::min);
    let mut at_eps: Vec<&PressureRow> = rows.iter().filter(|r| r.epsilon == eps).collect();
    at_eps.sort_by_key(|r| r.n);
    let per_n: Vec<(usize, f64)> = at_eps.iter().map(|r| (r.n, r.per_n)).collect();
    let mut warnings = Vec::new();

    let q = top_quartile(per_n.len());
    let window: Vec<f64> = per_n[per_n.len() - q..].iter().map(|p| p.1).collect();
    let windowed_average = window.iter().sum::<f64>() / window.len() as f64;

    let unsaturated: Vec<&&PressureRow> = at_eps.iter().filter(|r| !r.saturated).collect();
    let increments: Vec<f64> = unsaturated.windows(2).map(|w| (w[1].log_sum - w[0].log_sum) / (w[1].n - w[0].n) as f64).collect();
    let (extrapolated, spread, method) = if increments.is_empty() {
        warnings.push("fewer than two unsaturated rows; fell back to the windowed average of log P_n / n".into());
        (windowed_average, spread_of(&window), "windowed-average".to_string())
    } else {
        let q = top_quartile(increments.len());
        let tail = &increments[increments.len() - q..];
        (tail.iter().sum::<f64>() / q as f64, spread_of(tail), format!("mean of top {q} increments over {} unsaturated rows", unsaturated.len()))
    };
    if at_eps.iter().any(|r| r.saturated) {
        warnings.push(format!(
            "{} rows at ε = {eps} exceed {SATURATION_FRACTION} of the candidate cloud and were left out of the extrapolation",
            at_eps.iter().filter(|r| r.saturated).count()
        ));
    }
    if increments.windows(2).any(|w| (w[1] - w[0]).abs() > 0.25 * (w[0].abs() + w[1].abs()).max(0.1)) {
        warnings.push("per-n increments are far from steady".into());
    }
    PressureEstimate { rows, per_n, extrapolated, spread, method, windowed_average, epsilon_used: eps, sample_size, warnings }
}

fn spread_of(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// `res × res` grid of cell centres on the unit square.
pub fn grid_candidates(res: usize) -> Vec<Point> {
    let h = 1.0 / res as f64;
    (0..res * res).map(|k| Point::new((k / res) as f64 * h + 0.5 * h, (k % res) as f64 * h + 0.5 * h)).collect()
}

/// One uniform point in each cell of a `res × res` grid, keyed by `(seed, cell)`.
///
/// Rational grids are invariant under integer toral automorphisms, so their
/// separated-set counts move in lattice steps; jittering removes that.
pub fn jittered_grid(res: usize, seed: u64) -> Vec<Point> {
    let h = 1.0 / res as f64;
    (0..res * res)
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let u = rng::uniform_point(&mut r);
            Point::new(((k / res) as f64 + u.0[0]) * h, ((k % res) as f64 + u.0[1]) * h)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VolumeEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
}

/// Monte-Carlo volume of `B_n(x, ε)` from uniform samples of the cube of
/// half-width `ε` around `x`.
pub fn bowen_ball_volume(s: &dyn SmoothSystem, x: Point, n: usize, eps: f64, samples: u64, seed: u64) -> Result<VolumeEstimate> {
    let ctx = DynMetricContext::new(s, n, eps)?;
    if samples < 1000 {
        return Err(Error::invalid(format!("need at least 1000 samples, got {samples}")));
    }
    let hits: u64 = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let y = s.translate(x, crate::systems::Vec2::new(rng::symmetric(&mut r, eps), rng::symmetric(&mut r, eps)));
            u64::from(dyn_distance(&ctx, x, y) <= eps)
        })
        .sum();
    if hits == 0 {
        return Err(Error::BelowResolution(format!("no sample of {samples} landed in B_{n}(x, {eps})")));
    }
    let cube = (2.0 * eps).powi(2);
    let p = hits as f64 / samples as f64;
    Ok(VolumeEstimate { estimate: cube * p, stderr: cube * (p * (1.0 - p) / samples as f64).sqrt(), hits, samples })
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeRow {
    pub n: usize,
    pub volume: f64,
    pub stderr: f64,
    pub unstable_jacobian: f64,
    pub product: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeProfile {
    pub rows: Vec<VolumeRow>,
    /// `max / min` of `vol · J^u fⁿ` over the rows.
    pub ratio: f64,
}

/// `vol(B_n(x, ε)) · J^u fⁿ(x)` along a list of `n`.
pub fn volume_profile(s: &dyn SmoothSystem, x: Point, n_list: &[usize], eps: f64, samples: u64, seed: u64) -> Result<VolumeProfile> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let v = bowen_ball_volume(s, x, n, eps, samples, seed)?;
        let j = log_unstable_jacobian(s, x, n)?.exp();
        rows.push(VolumeRow { n, volume: v.estimate, stderr: v.stderr, unstable_jacobian: j, product: v.estimate * j });
    }
    let max = rows.iter().map(|r| r.product).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.product).fold(f64::INFINITY, f64::min);
    Ok(VolumeProfile { rows, ratio: max / min })
}

#[derive(Clone, Debug, Serialize)]
pub struct AttractorConfig {
    pub eps_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub threshold: f64,
    /// Added to `φ^u`; non-zero values give a potential the criterion should reject.
    pub shift: f64,
}

impl Default for AttractorConfig {
    fn default() -> Self {
        AttractorConfig { eps_list: vec![0.02], n_list: (1..=12).collect(), threshold: 0.05, shift: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AttractorReport {
    pub estimate: PressureEstimate,
    pub threshold: f64,
    pub consistent_with_attractor: bool,
    pub verdict: String,
}

/// Estimates `P(φ^u)` and compares `|P|` with the threshold.
pub fn attractor_criterion(s: &dyn SmoothSystem, candidates: &[Point], config: &AttractorConfig) -> Result<AttractorReport> {
    let pot = OrbitPotential::Geometric { shift: config.shift };
    let estimate = pressure_estimate(s, &pot, &config.eps_list, &config.n_list, candidates)?;
    let ok = estimate.extrapolated.abs() < config.threshold;
    let verdict = if ok { "consistent with attractor" } else { "not consistent with attractor" };
    Ok(AttractorReport { estimate, threshold: config.threshold, consistent_with_attractor: ok, verdict: verdict.into() })
}
