//! Model hyperbolic systems on the 2-torus and the unit square.

use std::f64::consts::PI;
use std::fmt::Debug;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::modulus::Modulus;

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Longest orbit `orbit` will materialize.
pub const MAX_ORBIT_LEN: usize = 10_000_000;

/// A point of the phase space. Torus points are kept in `[0, 1)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; 2]);

impl Point {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Point([x1, x2])
    }

    pub fn x1(self) -> f64 {
        self.0[0]
    }

    pub fn x2(self) -> f64 {
        self.0[1]
    }

    pub fn vec(self) -> Vec2 {
        Vec2::new(self.0[0], self.0[1])
    }

    pub fn from_vec(v: Vec2) -> Self {
        Point([v[0], v[1]])
    }

    /// Reduces both coordinates to `[0, 1)`.
    pub fn wrapped(self) -> Self {
        Point([wrap_unit(self.0[0]), wrap_unit(self.0[1])])
    }
}

pub(crate) fn wrap_unit(t: f64) -> f64 {
    let r = t - t.floor();
    // `t - floor(t)` can round up to exactly 1 for tiny negative t.
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn wrap_centered(t: f64) -> f64 {
    t - t.round()
}

/// JSON descriptor `{name, params}` of a built-in system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDescriptor {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl SystemDescriptor {
    pub fn named(name: &str) -> Self {
        SystemDescriptor { name: name.to_string(), params: Default::default() }
    }

    pub fn build(&self) -> Result<Box<dyn SmoothSystem>> {
        let p = &self.params;
        let allow = |keys: &[&str]| -> Result<()> {
            match p.keys().find(|k| !keys.contains(&k.as_str())) {
                Some(k) => Err(Error::Config(format!("unknown param `{k}` for system `{}`", self.name))),
                None => Ok(()),
            }
        };
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match p.get(key) {
                Some(v) => v.as_f64().ok_or_else(|| Error::Config(format!("system param `{key}` must be a number"))),
                None => default.ok_or_else(|| Error::Config(format!("system `{}` needs param `{key}`", self.name))),
            }
        };
        let matrix = |key: &str| -> Result<Mat2> {
            let v: [[f64; 2]; 2] = serde_json::from_value(
                p.get(key).cloned().ok_or_else(|| Error::Config(format!("system `{}` needs param `{key}`", self.name)))?,
            )
            .map_err(|e| Error::Config(format!("param `{key}` must be a 2x2 matrix: {e}")))?;
            Ok(Mat2::new(v[0][0], v[0][1], v[1][0], v[1][1]))
        };
        match self.name.as_str() {
            "cat-map" => {
                allow(&[])?;
                Ok(Box::new(LinearTorusMap::cat_map()))
            }
            "linear-torus" => {
                allow(&["matrix"])?;
                Ok(Box::new(LinearTorusMap::new(matrix("matrix")?)?))
            }
            "linear-plane" => {
                allow(&["matrix"])?;
                Ok(Box::new(LinearPlaneMap::new(matrix("matrix")?)?))
            }
            "identity" => {
                allow(&[])?;
                Ok(Box::new(Identity))
            }
            "perturbed-automorphism" => {
                allow(&["eps", "n_conj"])?;
                let n = num("n_conj", Some(1.0))?;
                if n.fract() != 0.0 || n < 1.0 {
                    return Err(Error::Config(format!("n_conj must be a positive integer, got {n}")));
                }
                Ok(Box::new(PerturbedAutomorphism::new(num("eps", None)?, n as u32)?))
            }
            "baker" => {
                allow(&["p"])?;
                Ok(Box::new(BakerMap::new(num("p", Some(0.5))?)?))
            }
            other => Err(Error::Config(format!("unknown system `{other}`"))),
        }
    }
}

/// An invertible map on a two-dimensional model phase space.
pub trait SmoothSystem: Send + Sync + Debug {
    fn descriptor(&self) -> SystemDescriptor;

    fn dim(&self) -> usize {
        2
    }

    /// True when coordinates are taken mod 1.
    fn on_torus(&self) -> bool;

    fn apply(&self, x: Point) -> Point;

    fn apply_inv(&self, x: Point) -> Point;

    fn differential(&self, x: Point) -> Mat2;

    /// Differential of the inverse map at `x`, i.e. `(df_{f⁻¹x})⁻¹`.
    fn differential_inv(&self, x: Point) -> Mat2 {
        let m = self.differential(self.apply_inv(x));
        m.try_inverse().unwrap_or_else(|| Mat2::from_element(f64::NAN))
    }

    /// Declared modulus of continuity of `x ↦ df_x`.
    fn modulus_of_df(&self) -> Modulus;

    /// Displacement from `a` to `b`; on the torus the shortest representative.
    fn displacement(&self, a: Point, b: Point) -> Vec2 {
        let d = b.vec() - a.vec();
        if self.on_torus() {
            Vec2::new(wrap_centered(d[0]), wrap_centered(d[1]))
        } else {
            d
        }
    }

    /// `x + v`, reduced to the phase space.
    fn translate(&self, x: Point, v: Vec2) -> Point {
        let p = Point::from_vec(x.vec() + v);
        if self.on_torus() {
            p.wrapped()
        } else {
            p
        }
    }

    fn metric(&self, a: Point, b: Point) -> f64 {
        self.displacement(a, b).norm()
    }
}

/// The inverse of a system, viewed as a system.
#[derive(Debug)]
pub struct Inverse<'a>(pub &'a dyn SmoothSystem);

impl SmoothSystem for Inverse<'_> {
    fn descriptor(&self) -> SystemDescriptor {
        let inner = self.0.descriptor();
        let mut params = serde_json::Map::new();
        params.insert("of".into(), serde_json::to_value(inner).unwrap_or_default());
        SystemDescriptor { name: "inverse".into(), params }
    }

    fn on_torus(&self) -> bool {
        self.0.on_torus()
    }

    fn apply(&self, x: Point) -> Point {
        self.0.apply_inv(x)
    }

    fn apply_inv(&self, x: Point) -> Point {
        self.0.apply(x)
    }

    fn differential(&self, x: Point) -> Mat2 {
        self.0.differential_inv(x)
    }

    fn differential_inv(&self, x: Point) -> Mat2 {
        // The inverse of f⁻¹ is f, whose differential at x is df_x.
        self.0.differential(x)
    }

    fn modulus_of_df(&self) -> Modulus {
        self.0.modulus_of_df()
    }

    fn displacement(&self, a: Point, b: Point) -> Vec2 {
        self.0.displacement(a, b)
    }

    fn translate(&self, x: Point, v: Vec2) -> Point {
        self.0.translate(x, v)
    }

    fn metric(&self, a: Point, b: Point) -> f64 {
        self.0.metric(a, b)
    }
}

fn check_unimodular(a: &Mat2) -> Result<Mat2> {
    if a.iter().any(|v| v.fract() != 0.0) {
        return Err(Error::invalid("torus automorphism needs an integer matrix"));
    }
    let det = a.determinant();
    if (det.abs() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("torus automorphism needs determinant ±1, got {det}")));
    }
    a.try_inverse().ok_or(Error::Singular)
}

/// `x ↦ A x mod 1` for an integer matrix with determinant ±1.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTorusMap {
    a: Mat2,
    a_inv: Mat2,
}

impl LinearTorusMap {
    pub fn new(a: Mat2) -> Result<Self> {
        let a_inv = check_unimodular(&a)?.map(f64::round);
        Ok(Self { a, a_inv })
    }

    /// The cat map `A = [[2, 1], [1, 1]]`.
    pub fn cat_map() -> Self {
        Self::new(Mat2::new(2.0, 1.0, 1.0, 1.0)).expect("cat map matrix is unimodular")
    }

    pub fn matrix(&self) -> Mat2 {
        self.a
    }

    fn is_cat(&self) -> bool {
        self.a == Mat2::new(2.0, 1.0, 1.0, 1.0)
    }
}

pub fn make_cat_map() -> LinearTorusMap {
    LinearTorusMap::cat_map()
}

fn matrix_json(a: &Mat2) -> serde_json::Value {
    json!([[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]])
}

impl SmoothSystem for LinearTorusMap {
    fn descriptor(&self) -> SystemDescriptor {
        if self.is_cat() {
            return SystemDescriptor::named("cat-map");
        }
        let mut params = serde_json::Map::new();
        params.insert("matrix".into(), matrix_json(&self.a));
        SystemDescriptor { name: "linear-torus".into(), params }
    }

    fn on_torus(&self) -> bool {
        true
    }

    fn apply(&self, x: Point) -> Point {
        Point::from_vec(self.a * x.vec()).wrapped()
    }

    fn apply_inv(&self, x: Point) -> Point {
        Point::from_vec(self.a_inv * x.vec()).wrapped()
    }

    fn differential(&self, _x: Point) -> Mat2 {
        self.a
    }

    fn differential_inv(&self, _x: Point) -> Mat2 {
        self.a_inv
    }

    fn modulus_of_df(&self) -> Modulus {
        Modulus::linear(0.0).expect("zero slope is valid")
    }
}

/// `x ↦ A x` on the Euclidean plane.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPlaneMap {
    a: Mat2,
    a_inv: Mat2,
}

impl LinearPlaneMap {
    pub fn new(a: Mat2) -> Result<Self> {
        let a_inv = a.try_inverse().ok_or(Error::Singular)?;
        if !a_inv.iter().all(|v| v.is_finite()) {
            return Err(Error::Singular);
        }
        Ok(Self { a, a_inv })
    }

    pub fn matrix(&self) -> Mat2 {
        self.a
    }
}

impl SmoothSystem for LinearPlaneMap {
    fn descriptor(&self) -> SystemDescriptor {
        let mut params = serde_json::Map::new();
        params.insert("matrix".into(), matrix_json(&self.a));
        SystemDescriptor { name: "linear-plane".into(), params }
    }

    fn on_torus(&self) -> bool {
        false
    }

    fn apply(&self, x: Point) -> Point {
        Point::from_vec(self.a * x.vec())
    }

    fn apply_inv(&self, x: Point) -> Point {
        Point::from_vec(self.a_inv * x.vec())
    }

    fn differential(&self, _x: Point) -> Mat2 {
        self.a
    }

    fn differential_inv(&self, _x: Point) -> Mat2 {
        self.a_inv
    }

    fn modulus_of_df(&self) -> Modulus {
        Modulus::linear(0.0).expect("zero slope is valid")
    }
}

/// The identity of the torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Identity;

impl SmoothSystem for Identity {
    fn descriptor(&self) -> SystemDescriptor {
        SystemDescriptor::named("identity")
    }

    fn on_torus(&self) -> bool {
        true
    }

    fn apply(&self, x: Point) -> Point {
        x.wrapped()
    }

    fn apply_inv(&self, x: Point) -> Point {
        x.wrapped()
    }

    fn differential(&self, _x: Point) -> Mat2 {
        Mat2::identity()
    }

    fn differential_inv(&self, _x: Point) -> Mat2 {
        Mat2::identity()
    }

    fn modulus_of_df(&self) -> Modulus {
        Modulus::linear(0.0).expect("zero slope is valid")
    }
}

/// Number of scaled bumps in the perturbation profile.
const BUMP_TERMS: i32 = 21;

/// `h(t) = Σ_{k≤20} 2^{-k} sin(2π 2^k t) / (2π (k+2)³)`, a 1-periodic profile
/// whose derivative `Σ cos(2π 2^k t)/(k+2)³` has modulus `≍ (ln 1/t)^{-2}`.
fn bump(t: f64) -> f64 {
    let mut s = 0.0;
    let mut scale = 1.0;
    for k in 0..BUMP_TERMS {
        let w = 1.0 / ((k + 2) as f64).powi(3);
        s += (2.0 * PI * scale * t).sin() / (2.0 * PI * scale) * w;
        scale *= 2.0;
    }
    s
}

fn bump_derivative(t: f64) -> f64 {
    let mut s = 0.0;
    let mut scale = 1.0;
    for k in 0..BUMP_TERMS {
        let w = 1.0 / ((k + 2) as f64).powi(3);
        s += (2.0 * PI * scale * t).cos() * w;
        scale *= 2.0;
    }
    s
}

/// `Σ_k (k+2)^{-3}`, the sup of `|h'|`.
fn bump_derivative_bound() -> f64 {
    (0..BUMP_TERMS).map(|k| 1.0 / ((k + 2) as f64).powi(3)).sum()
}

fn bump_bound() -> f64 {
    (0..BUMP_TERMS).map(|k| 0.5f64.powi(k) / (2.0 * PI * ((k + 2) as f64).powi(3))).sum()
}

/// `sup_{|s-t| ≤ d} |h'(s) - h'(t)|` bounded termwise.
fn bump_derivative_modulus(d: f64) -> f64 {
    (0..BUMP_TERMS)
        .map(|k| {
            let w = 1.0 / ((k + 2) as f64).powi(3);
            w * (2.0f64).min(2.0 * PI * 2f64.powi(k) * d)
        })
        .sum()
}

/// `f = Aⁿ ∘ g ∘ Aⁿ` with `A` the cat map and `g(x) = x + eps·(h(x₁), h(x₂))`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedAutomorphism {
    eps: f64,
    n_conj: u32,
    an: Mat2,
    an_inv: Mat2,
    declared_scale: f64,
}

impl PerturbedAutomorphism {
    /// Largest admissible `|eps|`: keeps `g' ≥ 1/2`.
    pub fn eps_threshold() -> f64 {
        0.5 / bump_derivative_bound()
    }

    pub fn new(eps: f64, n_conj: u32) -> Result<Self> {
        if !eps.is_finite() || eps.abs() > Self::eps_threshold() {
            return Err(Error::Domain { what: "eps", value: eps, lo: -Self::eps_threshold(), hi: Self::eps_threshold() });
        }
        if n_conj == 0 {
            return Err(Error::invalid("n_conj must be at least 1"));
        }
        let a = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let a_inv = Mat2::new(1.0, -1.0, -1.0, 2.0);
        let an = a.pow(n_conj);
        let an_inv = a_inv.pow(n_conj);
        // |df_x - df_y| ≤ ‖Aⁿ‖² eps ω_h(‖Aⁿ‖ d); express as a multiple of log_power(2).
        let norm = an.norm();
        let lp = Modulus::log_power(2.0).expect("beta = 2 is valid");
        let declared_scale = if eps == 0.0 {
            0.0
        } else {
            (0..=600)
                .map(|i| 10f64.powf(-12.0 * i as f64 / 600.0))
                .map(|d| norm * norm * eps.abs() * bump_derivative_modulus(norm * d) / lp.value(d))
                .fold(0.0, f64::max)
        };
        Ok(Self { eps, n_conj, an, an_inv, declared_scale })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n_conj(&self) -> u32 {
        self.n_conj
    }

    fn g(&self, v: Vec2) -> Vec2 {
        Vec2::new(v[0] + self.eps * bump(v[0]), v[1] + self.eps * bump(v[1]))
    }

    fn g_inv_coord(&self, y: f64) -> f64 {
        if self.eps == 0.0 {
            return y;
        }
        let spread = self.eps.abs() * bump_bound() * 1.01 + 1e-15;
        let (mut lo, mut hi) = (y - spread, y + spread);
        let mut t = y;
        for _ in 0..100 {
            let r = t + self.eps * bump(t) - y;
            if r.abs() <= 1e-16 * (1.0 + y.abs()) {
                break;
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = r / (1.0 + self.eps * bump_derivative(t));
            let next = t - step;
            t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-16 {
                break;
            }
        }
        t
    }

    fn dg(&self, v: Vec2) -> Mat2 {
        Mat2::new(1.0 + self.eps * bump_derivative(v[0]), 0.0, 0.0, 1.0 + self.eps * bump_derivative(v[1]))
    }
}

pub fn make_perturbed_automorphism(eps: f64, n_conj: u32) -> Result<PerturbedAutomorphism> {
    PerturbedAutomorphism::new(eps, n_conj)
}

impl SmoothSystem for PerturbedAutomorphism {
    fn descriptor(&self) -> SystemDescriptor {
        let mut params = serde_json::Map::new();
        params.insert("eps".into(), self.eps.into());
        params.insert("n_conj".into(), self.n_conj.into());
        SystemDescriptor { name: "perturbed-automorphism".into(), params }
    }

    fn on_torus(&self) -> bool {
        true
    }

    fn apply(&self, x: Point) -> Point {
        let u = Point::from_vec(self.an * x.vec()).wrapped().vec();
        Point::from_vec(self.an * self.g(u)).wrapped()
    }

    fn apply_inv(&self, x: Point) -> Point {
        let v = Point::from_vec(self.an_inv * x.vec()).wrapped().vec();
        let u = Vec2::new(self.g_inv_coord(v[0]), self.g_inv_coord(v[1]));
        Point::from_vec(self.an_inv * u).wrapped()
    }

    fn differential(&self, x: Point) -> Mat2 {
        let u = Point::from_vec(self.an * x.vec()).wrapped().vec();
        self.an * self.dg(u) * self.an
    }

    fn differential_inv(&self, x: Point) -> Mat2 {
        let v = Point::from_vec(self.an_inv * x.vec()).wrapped().vec();
        let u = Vec2::new(self.g_inv_coord(v[0]), self.g_inv_coord(v[1]));
        let dg = self.dg(u);
        let dg_inv = Mat2::new(1.0 / dg[(0, 0)], 0.0, 0.0, 1.0 / dg[(1, 1)]);
        self.an_inv * dg_inv * self.an_inv
    }

    fn modulus_of_df(&self) -> Modulus {
        Modulus::log_power(2.0).and_then(|m| m.scaled(self.declared_scale)).expect("declared scale is finite")
    }
}

/// Generalized baker's map of the unit square: the strip `x₁ < p` is
/// stretched by `1/p` horizontally and squeezed by `p` vertically onto the
/// bottom strip of height `p`, the rest onto the top strip.
#[derive(Clone, Debug, PartialEq)]
pub struct BakerMap {
    p: f64,
}

impl BakerMap {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain { what: "p", value: p, lo: 0.0, hi: 1.0 });
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Symbol of the first-coordinate partition `{x₁ < p}`, `{x₁ ≥ p}`.
    pub fn symbol(&self, x: Point) -> u8 {
        u8::from(x.x1() >= self.p)
    }
}

impl SmoothSystem for BakerMap {
    fn descriptor(&self) -> SystemDescriptor {
        let mut params = serde_json::Map::new();
        params.insert("p".into(), self.p.into());
        SystemDescriptor { name: "baker".into(), params }
    }

    fn on_torus(&self) -> bool {
        false
    }

    fn apply(&self, x: Point) -> Point {
        let p = self.p;
        let [a, b] = x.0;
        if a < p {
            Point::new((a / p).min(1.0 - f64::EPSILON / 2.0), p * b)
        } else {
            Point::new(((a - p) / (1.0 - p)).min(1.0 - f64::EPSILON / 2.0), p + (1.0 - p) * b)
        }
    }

    fn apply_inv(&self, x: Point) -> Point {
        let p = self.p;
        let [a, b] = x.0;
        if b < p {
            Point::new(p * a, b / p)
        } else {
            Point::new(p + (1.0 - p) * a, ((b - p) / (1.0 - p)).min(1.0 - f64::EPSILON / 2.0))
        }
    }

    fn differential(&self, x: Point) -> Mat2 {
        let q = if x.x1() < self.p { self.p } else { 1.0 - self.p };
        Mat2::new(1.0 / q, 0.0, 0.0, q)
    }

    fn modulus_of_df(&self) -> Modulus {
        // Piecewise constant differential; continuity only holds within each strip.
        Modulus::linear(0.0).expect("zero slope is valid")
    }
}

/// `[x, f x, …, fⁿ x]`, or the backward orbit through `f⁻¹` for `n < 0`.
pub fn orbit(s: &dyn SmoothSystem, x: Point, n: i64) -> Result<Vec<Point>> {
    let len = n.unsigned_abs() as usize;
    if len >= MAX_ORBIT_LEN {
        return Err(Error::invalid(format!("orbit length {n} exceeds the limit {MAX_ORBIT_LEN}")));
    }
    let mut out = Vec::with_capacity(len + 1);
    let mut p = if s.on_torus() { x.wrapped() } else { x };
    out.push(p);
    for _ in 0..len {
        p = if n >= 0 { s.apply(p) } else { s.apply_inv(p) };
        out.push(p);
    }
    Ok(out)
}

/// `d(fⁿ)_x` by the chain rule along the orbit.
pub fn iterate_differential(s: &dyn SmoothSystem, x: Point, n: usize) -> Mat2 {
    let mut m = Mat2::identity();
    let mut p = x;
    for _ in 0..n {
        m = s.differential(p) * m;
        p = s.apply(p);
    }
    m
}

/// A reference splitting: unit vectors spanning the unstable and stable
/// factors (not necessarily orthogonal).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub u: [f64; 2],
    pub s: [f64; 2],
}

impl Frame {
    pub fn new(u: Vec2, s: Vec2) -> Result<Self> {
        let (nu, ns) = (u.norm(), s.norm());
        if !(nu > 0.0 && ns > 0.0) {
            return Err(Error::invalid("frame vectors must be non-zero"));
        }
        let u = u / nu;
        let s = s / ns;
        if (u[0] * s[1] - u[1] * s[0]).abs() < 1e-14 {
            return Err(Error::invalid("frame vectors are parallel"));
        }
        Ok(Frame { u: [u[0], u[1]], s: [s[0], s[1]] })
    }

    pub fn coordinate_axes() -> Self {
        Frame { u: [1.0, 0.0], s: [0.0, 1.0] }
    }

    /// Eigen-splitting of the cat map.
    pub fn cat_eigen() -> Self {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        Frame::new(Vec2::new(1.0, g), Vec2::new(-g, 1.0)).expect("eigenvectors are independent")
    }

    pub fn uv(&self) -> Vec2 {
        Vec2::new(self.u[0], self.u[1])
    }

    pub fn sv(&self) -> Vec2 {
        Vec2::new(self.s[0], self.s[1])
    }

    pub fn swapped(&self) -> Self {
        Frame { u: self.s, s: self.u }
    }

    /// Coordinates `(a, b)` of `v = a u + b s`.
    pub fn decompose(&self, v: Vec2) -> (f64, f64) {
        let m = Mat2::from_columns(&[self.uv(), self.sv()]);
        let det = m.determinant();
        let a = (v[0] * m[(1, 1)] - v[1] * m[(0, 1)]) / det;
        let b = (m[(0, 0)] * v[1] - m[(1, 0)] * v[0]) / det;
        (a, b)
    }
}

/// Which way the cone field is meant to be invariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeOrientation {
    /// Unstable cones, mapped forward by `df`.
    Forward,
    /// Stable cones, mapped backward by `df⁻¹`.
    Backward,
}

/// Cones `{a u + b s : |b| ≤ α |a|}` around the `u` vector of a frame field.
pub struct ConeField<'a> {
    pub frame: Box<dyn Fn(Point) -> Frame + Send + Sync + 'a>,
    pub aperture: f64,
    pub orientation: ConeOrientation,
}

impl<'a> ConeField<'a> {
    pub fn new(frame: impl Fn(Point) -> Frame + Send + Sync + 'a, aperture: f64, orientation: ConeOrientation) -> Result<Self> {
        if !(aperture > 0.0 && aperture.is_finite()) {
            return Err(Error::invalid(format!("cone aperture must be positive, got {aperture}")));
        }
        Ok(Self { frame: Box::new(frame), aperture, orientation })
    }

    pub fn constant(frame: Frame, aperture: f64, orientation: ConeOrientation) -> Result<Self> {
        Self::new(move |_| frame, aperture, orientation)
    }

    pub fn contains(&self, x: Point, v: Vec2) -> bool {
        let (a, b) = (self.frame)(x).decompose(v);
        b.abs() <= self.aperture * a.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeCheck {
    pub holds: bool,
    /// Smallest slack over the sample: `min(α - |b/a|` of mapped boundary
    /// rays, `min ‖Mv‖/‖v‖ - 1` over the cone`)`. Positive iff `holds`.
    pub margin: f64,
    pub inclusion_margin: f64,
    pub expansion_margin: f64,
}

/// Checks `M K(x) ⊂ int K(x') ∪ {0}` and `‖M v‖ > ‖v‖` on `K(x)` for every
/// sampled point, with `M = df_x`, `x' = f x` (forward cones) or
/// `M = d(f⁻¹)_x`, `x' = f⁻¹ x` (backward cones).
pub fn cone_invariance_check(s: &dyn SmoothSystem, cones: &ConeField<'_>, sample: &[Point]) -> ConeCheck {
    let alpha = cones.aperture;
    let mut inclusion = f64::INFINITY;
    let mut expansion = f64::INFINITY;
    for &x in sample {
        let (m, image) = match cones.orientation {
            ConeOrientation::Forward => (s.differential(x), s.apply(x)),
            ConeOrientation::Backward => (s.differential_inv(x), s.apply_inv(x)),
        };
        let here = (cones.frame)(x);
        let there = (cones.frame)(image);
        let (u, sv) = (here.uv(), here.sv());
        for sign in [-1.0, 1.0] {
            let (a, b) = there.decompose(m * (u + sign * alpha * sv));
            let slack = if a == 0.0 { f64::NEG_INFINITY } else { alpha - (b / a).abs() };
            inclusion = inclusion.min(slack);
        }
        expansion = expansion.min(min_stretch_on_cone(&m, u, sv, alpha) - 1.0);
    }
    let margin = inclusion.min(expansion);
    ConeCheck { holds: margin > 0.0, margin, inclusion_margin: inclusion, expansion_margin: expansion }
}

/// `min ‖M v‖/‖v‖` over `v = u + t s`, `|t| ≤ α`. The ratio of quadratic
/// forms is extremal at the endpoints or at right singular vectors of `M`.
fn min_stretch_on_cone(m: &Mat2, u: Vec2, s: Vec2, alpha: f64) -> f64 {
    let ratio = |v: Vec2| (m * v).norm() / v.norm();
    let mut best = ratio(u + alpha * s).min(ratio(u - alpha * s));
    let svd = m.svd(false, true);
    if let Some(vt) = svd.v_t {
        let frame = Frame { u: [u[0], u[1]], s: [s[0], s[1]] };
        for i in 0..2 {
            let v = Vec2::new(vt[(i, 0)], vt[(i, 1)]);
            let (a, b) = frame.decompose(v);
            if a != 0.0 && (b / a).abs() <= alpha {
                best = best.min(ratio(v));
            }
        }
    }
    best
}
