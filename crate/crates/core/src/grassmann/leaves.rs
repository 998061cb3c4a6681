//! Pairs of orbits that stay close for many steps, local stable and
//! unstable leaves, the bracket `[x, y]` and the distortion of the unstable
//! Jacobian along close orbits.
//!
//! Forward iteration amplifies rounding errors along the unstable direction,
//! so two independently computed orbits separate after a few dozen steps even
//! when the true orbits do not. Close orbit pairs are therefore computed as
//! a boundary value problem in displacement coordinates: the stable
//! component of the displacement is propagated forward and the unstable one
//! backward, both of which are contracting.

use serde::Serialize;

use super::{compute_splitting, Subspace};
use crate::error::{Error, Result};
use crate::systems::{Frame, Inverse, Mat2, Point, SmoothSystem, Vec2};

/// Number of steps used to pin down a local leaf.
pub const LEAF_DEPTH: usize = 24;

const WARMUP: usize = 40;
const MAX_SWEEPS: usize = 80;

/// Displacements below this size in the unstable coordinate count as lying
/// on the local stable leaf.
const LEAF_SNAP: f64 = 1e-12;

fn seeds() -> (Vec2, Vec2) {
    (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0))
}

/// Forward orbit `x₀ … xₙ` with the splitting at every point: `E^u` pushed
/// forward from `WARMUP` steps in the past, `E^s` pulled back from `WARMUP`
/// steps past the end.
pub fn splitting_along_orbit(s: &dyn SmoothSystem, x: Point, n: usize) -> Result<(Vec<Point>, Vec<Frame>)> {
    let (su, ss) = seeds();
    frames_with_seeds(s, x, n, su, ss)
}

fn frames_with_seeds(s: &dyn SmoothSystem, x: Point, n: usize, seed_u: Vec2, seed_s: Vec2) -> Result<(Vec<Point>, Vec<Frame>)> {
    let mut back = vec![x];
    for k in 0..WARMUP {
        back.push(s.apply_inv(back[k]));
    }
    let mut u = seed_u / seed_u.norm();
    for p in back[1..].iter().rev() {
        u = s.differential(*p) * u;
        u /= u.norm();
    }
    let mut xs = vec![x];
    for k in 0..n + WARMUP {
        xs.push(s.apply(xs[k]));
    }
    let dfs: Vec<Mat2> = xs.iter().map(|&p| s.differential(p)).collect();
    let mut us = Vec::with_capacity(n + 1);
    for df in &dfs[..=n] {
        us.push(u);
        u = df * u;
        u /= u.norm();
    }
    let mut sv = seed_s / seed_s.norm();
    let mut ss = vec![Vec2::zeros(); n + 1];
    for k in (0..n + WARMUP).rev() {
        sv = dfs[k].try_inverse().ok_or(Error::Singular)? * sv;
        sv /= sv.norm();
        if k <= n {
            ss[k] = sv;
        }
    }
    let frames = us.iter().zip(&ss).map(|(u, s)| Frame::new(*u, *s)).collect::<Result<Vec<_>>>()?;
    xs.truncate(n + 1);
    Ok((xs, frames))
}

/// Two orbit segments `xs`, `ys` with `y_{k+1} = f(y_k)` up to rounding.
#[derive(Clone, Debug, Serialize)]
pub struct CompanionOrbit {
    pub xs: Vec<Point>,
    pub ys: Vec<Point>,
    /// Unstable / stable coordinates of `y_k − x_k` in the splitting at `x_k`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `max_k |f(y_k) − y_{k+1}|`.
    pub consistency: f64,
}

impl CompanionOrbit {
    pub fn distances(&self, s: &dyn SmoothSystem) -> Vec<f64> {
        self.xs.iter().zip(&self.ys).map(|(x, y)| s.metric(*x, *y)).collect()
    }
}

struct Sweep<'a> {
    s: &'a dyn SmoothSystem,
    xs: &'a [Point],
    frames: &'a [Frame],
}

impl Sweep<'_> {
    fn w(&self, k: usize, a: f64, b: f64) -> Vec2 {
        a * self.frames[k].uv() + b * self.frames[k].sv()
    }

    fn forward(&self, k: usize, w: Vec2) -> Vec2 {
        self.s.displacement(self.xs[k + 1], self.s.apply(self.s.translate(self.xs[k], w)))
    }

    fn backward(&self, k: usize, w: Vec2) -> Vec2 {
        self.s.displacement(self.xs[k], self.s.apply_inv(self.s.translate(self.xs[k + 1], w)))
    }

    /// Solves for the displacements with `b₀` and `aₙ` prescribed.
    fn solve(&self, b0: f64, an: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.xs.len() - 1;
        let mut a = vec![0.0; n + 1];
        let mut b = vec![0.0; n + 1];
        b[0] = b0;
        a[n] = an;
        for _ in 0..MAX_SWEEPS {
            let mut change: f64 = 0.0;
            for k in 0..n {
                let (_, nb) = self.frames[k + 1].decompose(self.forward(k, self.w(k, a[k], b[k])));
                change = change.max((nb - b[k + 1]).abs());
                b[k + 1] = nb;
            }
            for k in (0..n).rev() {
                let (na, _) = self.frames[k].decompose(self.backward(k, self.w(k + 1, a[k + 1], b[k + 1])));
                change = change.max((na - a[k]).abs());
                a[k] = na;
            }
            let size = a.iter().chain(&b).fold(0.0f64, |m, v| m.max(v.abs()));
            if change <= 4.0 * f64::EPSILON * size || size == 0.0 {
                break;
            }
        }
        let consistency = (0..n)
            .map(|k| (self.forward(k, self.w(k, a[k], b[k])) - self.w(k + 1, a[k + 1], b[k + 1])).norm())
            .fold(0.0, f64::max);
        (a, b, consistency)
    }

    fn finish(&self, a: Vec<f64>, b: Vec<f64>, consistency: f64) -> CompanionOrbit {
        let ys = (0..self.xs.len()).map(|k| self.s.translate(self.xs[k], self.w(k, a[k], b[k]))).collect();
        CompanionOrbit { xs: self.xs.to_vec(), ys, a, b, consistency }
    }
}

/// The orbit of the point on the local stable leaf of `x` whose stable
/// coordinate is `offset`, followed for `n` steps.
pub fn stable_companion(s: &dyn SmoothSystem, x: Point, offset: f64, n: usize) -> Result<CompanionOrbit> {
    let (xs, frames) = splitting_along_orbit(s, x, n)?;
    companion_on_leaf(s, &xs, &frames, offset)
}

fn companion_on_leaf(s: &dyn SmoothSystem, xs: &[Point], frames: &[Frame], offset: f64) -> Result<CompanionOrbit> {
    if xs.len() < 2 {
        return Err(Error::invalid("companion orbits need n >= 1"));
    }
    let sweep = Sweep { s, xs, frames };
    let (a, b, c) = sweep.solve(offset, 0.0);
    Ok(sweep.finish(a, b, c))
}

/// The orbit of `y` next to the orbit of `x` for `n` steps, requiring
/// `d(fᵏx, fᵏy) ≤ eps` for `k < n`.
pub fn companion_through(s: &dyn SmoothSystem, x: Point, y: Point, n: usize, eps: f64) -> Result<CompanionOrbit> {
    let (xs, frames) = splitting_along_orbit(s, x, n.max(1))?;
    let sweep = Sweep { s, xs: &xs, frames: &frames };
    let (a0, b0) = frames[0].decompose(s.displacement(x, y));
    let (mut a, mut b, mut c) = sweep.solve(b0, 0.0);
    if (a[0] - a0).abs() > LEAF_SNAP {
        let stretch: f64 = (0..xs.len() - 1).map(|k| (s.differential(xs[k]) * frames[k].uv()).norm()).product();
        let mut an = 0.0;
        for _ in 0..8 {
            an += (a0 - a[0]) * stretch;
            if !(an.abs() <= eps) {
                return Err(Error::Precondition(format!(
                    "point leaves the Bowen ball: unstable offset {an:.3e} at step {n} exceeds eps = {eps}"
                )));
            }
            (a, b, c) = sweep.solve(b0, an);
            if (a[0] - a0).abs() <= 1e-15 * a0.abs().max(1e-3) {
                break;
            }
        }
    }
    let out = sweep.finish(a, b, c);
    let dn = out.distances(s)[..n.max(1)].iter().fold(0.0f64, |m, &d| m.max(d));
    if dn > eps {
        return Err(Error::Precondition(format!("d_n(x, y) = {dn:.3e} exceeds eps = {eps}")));
    }
    Ok(out)
}

/// Point of `W^s_loc(x)` with stable coordinate `t`.
pub fn stable_leaf_point(s: &dyn SmoothSystem, x: Point, t: f64) -> Result<Point> {
    if t == 0.0 {
        return Ok(x);
    }
    Ok(stable_companion(s, x, t, LEAF_DEPTH)?.ys[0])
}

/// Point of `W^u_loc(y)` with unstable coordinate `t`.
pub fn unstable_leaf_point(s: &dyn SmoothSystem, y: Point, t: f64) -> Result<Point> {
    if t == 0.0 {
        return Ok(y);
    }
    let inv = Inverse(s);
    let (su, ss) = seeds();
    let (xs, frames) = frames_with_seeds(&inv, y, LEAF_DEPTH, ss, su)?;
    Ok(companion_on_leaf(&inv, &xs, &frames, t)?.ys[0])
}

/// `[x, y] = W^s_loc(x) ∩ W^u_loc(y)`: Newton iteration on the two leaf
/// parameters, seeded by intersecting the tangent lines.
pub fn bracket(s: &dyn SmoothSystem, x: Point, y: Point) -> Result<Point> {
    let (_, fx) = splitting_along_orbit(s, x, 1)?;
    let (_, fy) = splitting_along_orbit(s, y, 1)?;
    let d = s.displacement(x, y);
    let m = Mat2::from_columns(&[fx[0].sv(), -fy[0].uv()]);
    let sol = m.try_inverse().ok_or(Error::NotTransverse)? * d;
    let (mut t, mut r) = (sol[0], sol[1]);
    let residual = |t: f64, r: f64| -> Result<(Point, Vec2)> {
        let p = stable_leaf_point(s, x, t)?;
        let q = unstable_leaf_point(s, y, r)?;
        Ok((p, s.displacement(p, q)))
    };
    let h = 1e-7;
    let mut last = f64::NAN;
    for _ in 0..30 {
        let (p, res) = residual(t, r)?;
        last = res.norm();
        if last < 1e-10 {
            return Ok(p);
        }
        let (_, rt) = residual(t + h, r)?;
        let (_, rr) = residual(t, r + h)?;
        let jac = Mat2::from_columns(&[(rt - res) / h, (rr - res) / h]);
        let step = jac.try_inverse().ok_or(Error::Singular)? * res;
        t -= step[0];
        r -= step[1];
    }
    Err(Error::NotConverged { what: "bracket Newton iteration", iterations: 30, residual: last })
}

fn log_jacobian_along(s: &dyn SmoothSystem, points: &[Point], eu: &Subspace) -> f64 {
    let mut v = eu.v();
    let mut total = 0.0;
    for &p in points {
        let w = s.differential(p) * v;
        let norm = w.norm();
        total += norm.ln();
        v = w / norm;
    }
    total
}

/// `J^u fⁿ(x) / J^u fⁿ(y)` for `y` in the Bowen ball `B_n(x, eps)`.
pub fn distortion_ratio(s: &dyn SmoothSystem, x: Point, y: Point, n: usize, eps: f64) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let pair = companion_through(s, x, y, n, eps)?;
    let eu_x = compute_splitting(s, pair.xs[0], 60, 1e-12)?.unstable;
    let eu_y = compute_splitting(s, pair.ys[0], 60, 1e-12)?.unstable;
    let jx = log_jacobian_along(s, &pair.xs[..n], &eu_x);
    let jy = log_jacobian_along(s, &pair.ys[..n], &eu_y);
    Ok((jx - jy).exp())
}
