//! Lines in the tangent plane as graphs over a reference splitting, the
//! action of the differential on them, and the hyperbolic splitting obtained
//! by iterating that action.

mod leaves;
mod lemmas;

pub use leaves::{
    bracket, companion_through, distortion_ratio, splitting_along_orbit, stable_companion, stable_leaf_point,
    unstable_leaf_point, CompanionOrbit, LEAF_DEPTH,
};
pub use lemmas::{
    verify_lemma1, verify_lemma2, verify_lemma3, verify_lemma4, verify_lemma5, verify_main_inequality, LemmaReport,
    MainInequalityReport,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::systems::{Frame, Inverse, Mat2, Point, SmoothSystem, Vec2};

/// Below this `|a|` (for a unit direction `a u + b s`) a line counts as
/// parallel to the stable factor.
const TRANSVERSALITY_FLOOR: f64 = 1e-12;

/// A line through the origin of `T_x M`, stored as a unit direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Subspace {
    pub base: Point,
    pub dir: [f64; 2],
}

impl Subspace {
    pub fn new(base: Point, v: Vec2) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid("subspace direction must be a finite non-zero vector"));
        }
        Ok(Subspace { base, dir: [v[0] / n, v[1] / n] })
    }

    pub fn v(&self) -> Vec2 {
        Vec2::new(self.dir[0], self.dir[1])
    }

    pub fn with_base(self, base: Point) -> Self {
        Subspace { base, ..self }
    }
}

/// The linear map `L : E^u_ref → E^s_ref` whose graph is a line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphMap {
    pub frame: Frame,
    pub l: f64,
}

impl GraphMap {
    pub fn of(e: &Subspace, frame: &Frame) -> Result<Self> {
        let (a, b) = frame.decompose(e.v());
        let scale = a.hypot(b);
        if a.abs() <= TRANSVERSALITY_FLOOR * scale {
            return Err(Error::NotTransverse);
        }
        Ok(GraphMap { frame: *frame, l: b / a })
    }

    pub fn subspace(&self, base: Point) -> Subspace {
        Subspace::new(base, self.frame.uv() + self.l * self.frame.sv()).expect("u + l s is non-zero for independent u, s")
    }
}

/// `‖L_E − L_F‖` in the given reference splitting.
pub fn graph_distance(e: &Subspace, f: &Subspace, frame: &Frame) -> Result<f64> {
    Ok((GraphMap::of(e, frame)?.l - GraphMap::of(f, frame)?.l).abs())
}

/// `|sin θ|` for the angle `θ` between the lines; a frame-free cross-check.
pub fn principal_angle_distance(e: &Subspace, f: &Subspace) -> f64 {
    let (a, b) = (e.v(), f.v());
    (a[0] * b[1] - a[1] * b[0]).abs()
}

fn check_invertible(df: &Mat2) -> Result<()> {
    let det = df.determinant();
    if det == 0.0 || !det.is_finite() || df.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(())
}

/// `df · E`, renormalized. The base point is left to the caller.
pub fn pushforward(df: &Mat2, e: &Subspace) -> Result<Subspace> {
    check_invertible(df)?;
    Subspace::new(e.base, df * e.v())
}

pub fn push_frame(df: &Mat2, frame: &Frame) -> Result<Frame> {
    check_invertible(df)?;
    Frame::new(df * frame.uv(), df * frame.sv())
}

/// `d(df E, df F)/d(E, F)` with distances measured in `frame` and its image.
pub fn contraction_factor(df: &Mat2, frame: &Frame, e: &Subspace, f: &Subspace) -> Result<f64> {
    let before = graph_distance(e, f, frame)?;
    if before == 0.0 {
        return Err(Error::invalid("contraction factor is undefined for E = F"));
    }
    let after = graph_distance(&pushforward(df, e)?, &pushforward(df, f)?, &push_frame(df, frame)?)?;
    Ok(after / before)
}

/// The bound `‖df|_{E^s}‖ · ‖df⁻¹|_{E^u}‖` for an invariant reference splitting.
pub fn contraction_bound(df: &Mat2, frame: &Frame) -> f64 {
    (df * frame.sv()).norm() / (df * frame.uv()).norm()
}

#[derive(Clone, Debug)]
pub struct SplittingOptions {
    pub n_iter: usize,
    pub tol: f64,
    pub unstable_seed: Vec2,
    pub stable_seed: Vec2,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        SplittingOptions { n_iter: 60, tol: 1e-10, unstable_seed: Vec2::new(1.0, 0.0), stable_seed: Vec2::new(0.0, 1.0) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Splitting {
    pub unstable: Subspace,
    pub stable: Subspace,
    pub residual_u: f64,
    pub residual_s: f64,
    pub iterations_u: usize,
    pub iterations_s: usize,
    /// Residual after each pushforward count `1, 2, …`.
    pub history_u: Vec<f64>,
    pub history_s: Vec<f64>,
}

impl Splitting {
    pub fn frame(&self) -> Frame {
        Frame::new(self.unstable.v(), self.stable.v()).expect("a converged splitting is transverse")
    }

    /// Fitted `r` in `residual(n) ≈ C rⁿ` for the unstable iteration.
    pub fn rate_u(&self) -> Option<f64> {
        fitted_rate(&self.history_u)
    }

    pub fn rate_s(&self) -> Option<f64> {
        fitted_rate(&self.history_s)
    }
}

/// Least-squares `r` in `hₙ ≈ C rⁿ` over the entries above the rounding floor.
pub fn fitted_rate(history: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        history.iter().enumerate().filter(|(_, &h)| h > 1e-14).map(|(i, &h)| ((i + 1) as f64, h.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
    Some((num / den).exp())
}

pub fn compute_splitting(s: &dyn SmoothSystem, x: Point, n_iter: usize, tol: f64) -> Result<Splitting> {
    compute_splitting_with(s, x, &SplittingOptions { n_iter, tol, ..Default::default() })
}

/// `E^u` by pushing the seed forward along the backward orbit ending at `x`,
/// `E^s` the same way under `f⁻¹`.
pub fn compute_splitting_with(s: &dyn SmoothSystem, x: Point, opts: &SplittingOptions) -> Result<Splitting> {
    if opts.n_iter == 0 {
        return Err(Error::invalid("n_iter must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let (unstable, residual_u, history_u) = iterate_line(s, x, opts.unstable_seed, opts.n_iter, opts.tol)?;
    let (stable, residual_s, history_s) = iterate_line(&Inverse(s), x, opts.stable_seed, opts.n_iter, opts.tol)?;
    Ok(Splitting {
        unstable,
        stable,
        residual_u,
        residual_s,
        iterations_u: history_u.len(),
        iterations_s: history_s.len(),
        history_u,
        history_s,
    })
}

fn iterate_line(s: &dyn SmoothSystem, x: Point, seed: Vec2, n_iter: usize, tol: f64) -> Result<(Subspace, f64, Vec<f64>)> {
    let seed = Subspace::new(x, seed)?;
    let mut back = Vec::with_capacity(n_iter + 1);
    back.push(x);
    for k in 0..n_iter {
        back.push(s.apply_inv(back[k]));
    }
    // Differentials along the orbit back[n] → … → back[0] = x.
    let dfs: Vec<Mat2> = back.iter().map(|&p| s.differential(p)).collect();
    let mut prev = seed;
    let mut history = Vec::with_capacity(n_iter);
    for n in 1..=n_iter {
        let mut v = seed.v();
        for k in (1..=n).rev() {
            v = dfs[k] * v;
            v /= v.norm();
        }
        let cur = Subspace::new(x, v)?;
        let frame = Frame::new(cur.v(), Vec2::new(-cur.dir[1], cur.dir[0]))?;
        let residual = graph_distance(&prev, &cur, &frame)?;
        history.push(residual);
        if residual < tol {
            return Ok((cur, residual, history));
        }
        prev = cur;
    }
    let residual = *history.last().unwrap_or(&f64::NAN);
    Err(Error::NotConverged { what: "splitting iteration", iterations: n_iter, residual })
}

/// `φ^u(x) = −log ‖df_x u‖` for a unit vector `u` spanning `E^u`.
pub fn geometric_potential(s: &dyn SmoothSystem, x: Point, eu: &Subspace) -> f64 {
    -(s.differential(x) * eu.v()).norm().ln()
}

/// `φ^u(x)` with `E^u` computed at `x`.
pub fn geometric_potential_at(s: &dyn SmoothSystem, x: Point) -> Result<f64> {
    let sp = compute_splitting(s, x, 60, 1e-12)?;
    Ok(geometric_potential(s, x, &sp.unstable))
}

/// `log J^u fⁿ(x) = −Σ_{k<n} φ^u(fᵏ x)`.
pub fn log_unstable_jacobian(s: &dyn SmoothSystem, x: Point, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let sp = compute_splitting(s, x, 60, 1e-12)?;
    let mut v = sp.unstable.v();
    let mut p = x;
    let mut total = 0.0;
    for _ in 0..n {
        let w = s.differential(p) * v;
        let norm = w.norm();
        total += norm.ln();
        v = w / norm;
        p = s.apply(p);
    }
    Ok(total)
}

pub fn unstable_jacobian(s: &dyn SmoothSystem, x: Point, n: usize) -> Result<f64> {
    Ok(log_unstable_jacobian(s, x, n)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{make_cat_map, make_perturbed_automorphism, orbit, LinearPlaneMap};
    use approx::assert_relative_eq;

    fn origin() -> Point {
        Point::new(0.0, 0.0)
    }

    fn line(v: (f64, f64)) -> Subspace {
        Subspace::new(origin(), Vec2::new(v.0, v.1)).unwrap()
    }

    #[test]
    fn graph_distance_examples() {
        let frame = Frame::coordinate_axes();
        let e = line((1.0, 0.4));
        assert_eq!(graph_distance(&e, &e, &frame).unwrap(), 0.0);
        assert_relative_eq!(graph_distance(&line((1.0, 0.0)), &line((1.0, 0.3)), &frame).unwrap(), 0.3, epsilon = 1e-15);
        let (t1, t2) = (0.3f64, -0.7f64);
        let d = graph_distance(&line((t1.cos(), t1.sin())), &line((t2.cos(), t2.sin())), &frame).unwrap();
        assert_relative_eq!(d, (t1.tan() - t2.tan()).abs(), max_relative = 1e-14);
    }

    #[test]
    fn graph_distance_rejects_stable_lines() {
        let frame = Frame::coordinate_axes();
        assert!(matches!(graph_distance(&line((0.0, 1.0)), &line((1.0, 0.0)), &frame), Err(Error::NotTransverse)));
    }

    #[test]
    fn graph_map_round_trip() {
        let frame = Frame::cat_eigen();
        let e = line((0.3, 0.8));
        let g = GraphMap::of(&e, &frame).unwrap();
        let back = g.subspace(origin());
        assert!(principal_angle_distance(&e, &back) < 1e-12);
    }

    #[test]
    fn pushforward_examples() {
        let a = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let eu = Subspace::new(origin(), Frame::cat_eigen().uv()).unwrap();
        assert!(principal_angle_distance(&pushforward(&a, &eu).unwrap(), &eu) < 1e-15);
        let e = line((0.2, 0.9));
        assert!(principal_angle_distance(&pushforward(&Mat2::identity(), &e).unwrap(), &e) < 1e-16);
        let h = pushforward(&a, &line((1.0, 0.0))).unwrap();
        assert!(principal_angle_distance(&h, &line((2.0, 1.0))) < 1e-15);
        assert!(matches!(pushforward(&Mat2::zeros(), &e), Err(Error::Singular)));
    }

    #[test]
    fn contraction_examples() {
        let a = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let lambda2 = ((5f64.sqrt() - 1.0) / 2.0).powi(4);
        let frame = Frame::cat_eigen();
        let e = GraphMap { frame, l: 0.2 }.subspace(origin());
        let f = GraphMap { frame, l: -0.1 }.subspace(origin());
        assert!(contraction_factor(&a, &frame, &e, &f).unwrap() <= lambda2 + 1e-12);
        let c = Mat2::identity() * 3.0;
        assert_relative_eq!(contraction_factor(&c, &frame, &e, &f).unwrap(), 1.0, max_relative = 1e-12);
        let d = Mat2::new(2.0, 0.0, 0.0, 0.5);
        let axes = Frame::coordinate_axes();
        assert_relative_eq!(contraction_factor(&d, &axes, &line((1.0, 0.3)), &line((1.0, -0.2))).unwrap(), 0.25, max_relative = 1e-12);
        assert!(contraction_factor(&d, &axes, &e, &e).is_err());
    }

    #[test]
    fn splitting_cat_map() {
        let c = make_cat_map();
        let sp = compute_splitting(&c, Point::new(0.3, 0.6), 50, 1e-10).unwrap();
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let expected = Subspace::new(origin(), Vec2::new(1.0, g)).unwrap();
        assert!(principal_angle_distance(&sp.unstable, &expected) < 1e-10);
        let expected_s = Subspace::new(origin(), Vec2::new(-g, 1.0)).unwrap();
        assert!(principal_angle_distance(&sp.stable, &expected_s) < 1e-10);
        let rate = sp.rate_u().unwrap();
        assert!(rate < 0.2, "{rate}");
    }

    #[test]
    fn splitting_seeded_on_the_eigenline_stops_at_once() {
        let c = make_cat_map();
        let opts = SplittingOptions { unstable_seed: Frame::cat_eigen().uv(), ..Default::default() };
        let sp = compute_splitting_with(&c, Point::new(0.1, 0.2), &opts).unwrap();
        assert_eq!(sp.iterations_u, 1);
        assert!(sp.residual_u < 1e-15);
    }

    #[test]
    fn splitting_diagonal_map() {
        let d = LinearPlaneMap::new(Mat2::new(2.0, 0.0, 0.0, 0.5)).unwrap();
        let opts = SplittingOptions { n_iter: 40, tol: 1e-10, unstable_seed: Vec2::new(1.0, 1.0), ..Default::default() };
        let sp = compute_splitting_with(&d, Point::new(0.5, 0.5), &opts).unwrap();
        assert!(principal_angle_distance(&sp.unstable, &line((1.0, 0.0))) < 1e-10);
        assert!(principal_angle_distance(&sp.stable, &line((0.0, 1.0))) < 1e-10);
    }

    #[test]
    fn splitting_reports_non_convergence() {
        let c = make_cat_map();
        let r = compute_splitting(&c, Point::new(0.3, 0.6), 3, 1e-14);
        assert!(matches!(r, Err(Error::NotConverged { iterations: 3, .. })));
    }

    #[test]
    fn potential_and_jacobian_cat_map() {
        let c = make_cat_map();
        let lp = (3.0 + 5f64.sqrt()) / 2.0;
        let x = Point::new(0.4, 0.1);
        assert_relative_eq!(geometric_potential_at(&c, x).unwrap(), -lp.ln(), max_relative = 1e-12);
        assert_relative_eq!(unstable_jacobian(&c, x, 3).unwrap(), lp.powi(3), max_relative = 1e-12);
        assert_eq!(unstable_jacobian(&c, x, 0).unwrap(), 1.0);
        let d = LinearPlaneMap::new(Mat2::new(2.0, 0.0, 0.0, 0.5)).unwrap();
        assert_relative_eq!(geometric_potential(&d, x, &line((1.0, 0.0))), -(2f64.ln()), max_relative = 1e-15);
        let rot = LinearPlaneMap::new(Mat2::new(0.6, -0.8, 0.8, 0.6)).unwrap();
        assert!(geometric_potential(&rot, x, &line((0.3, 0.7))).abs() < 1e-15);
    }

    #[test]
    fn jacobian_is_birkhoff_sum_of_potential() {
        let f = make_perturbed_automorphism(0.01, 1).unwrap();
        let x = Point::new(0.21, 0.73);
        let n = 6;
        let sum: f64 = orbit(&f, x, n as i64).unwrap()[..n].iter().map(|&p| geometric_potential_at(&f, p).unwrap()).sum();
        assert!((log_unstable_jacobian(&f, x, n).unwrap() + sum).abs() < 1e-10);
    }

    #[test]
    fn splitting_perturbed_converges_fast() {
        let f = make_perturbed_automorphism(0.01, 1).unwrap();
        let sp = compute_splitting(&f, Point::new(0.3, 0.6), 60, 1e-12).unwrap();
        assert!(sp.rate_u().unwrap() < 0.5);
        assert!(sp.rate_s().unwrap() < 0.5);
    }
}
