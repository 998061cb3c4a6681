//! Birkhoff averages from Lebesgue-random initial points, and the comparison
//! between Gibbs measures on a symbolic model and time averages on the system
//! it codes.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;
use crate::shift::{cylinder_mass, rpf_solve, CylinderPotential, Sft};
use crate::systems::{BakerMap, Point, SmoothSystem};

/// A bounded observable with an optional exactly known integral against the
/// physical measure.
#[derive(Clone)]
pub struct Observable {
    pub name: String,
    eval: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub reference_integral: Option<f64>,
    /// Where `reference_integral` comes from.
    pub reference_source: Option<String>,
    /// An upper bound for `sup |g|`.
    pub sup_abs: f64,
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("reference_integral", &self.reference_integral)
            .field("sup_abs", &self.sup_abs)
            .finish()
    }
}

impl Observable {
    pub fn new(name: impl Into<String>, sup_abs: f64, eval: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(sup_abs >= 0.0 && sup_abs.is_finite()) {
            return Err(Error::invalid("sup |g| must be finite and non-negative"));
        }
        Ok(Observable { name: name.into(), eval: Arc::new(eval), reference_integral: None, reference_source: None, sup_abs })
    }

    pub fn with_reference(mut self, value: f64, source: impl Into<String>) -> Self {
        self.reference_integral = Some(value);
        self.reference_source = Some(source.into());
        self
    }

    pub fn eval(&self, x: Point) -> f64 {
        (self.eval)(x)
    }

    pub fn constant(c: f64) -> Self {
        Observable::new(format!("constant({c})"), c.abs(), move |_| c).expect("finite constant").with_reference(c, "constant")
    }

    /// `cos(2π x₁)`; its integral against Lebesgue measure on the torus is 0.
    pub fn cos_x1() -> Self {
        Observable::new("cos_x1", 1.0, |x| (TAU * x.x1()).cos()).expect("bounded").with_reference(0.0, "Lebesgue integral")
    }

    /// `cos(2π x₂)`; its integral against Lebesgue measure on the torus is 0.
    pub fn cos_x2() -> Self {
        Observable::new("cos_x2", 1.0, |x| (TAU * x.x2()).cos()).expect("bounded").with_reference(0.0, "Lebesgue integral")
    }

    /// `cos(2π (x₁ + x₂))`, integral 0 against Lebesgue measure.
    pub fn cos_sum() -> Self {
        Observable::new("cos_sum", 1.0, |x| (TAU * (x.x1() + x.x2())).cos()).expect("bounded").with_reference(0.0, "Lebesgue integral")
    }

    /// Built-in observables by name.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "cos_x1" | "cos1" => Ok(Self::cos_x1()),
            "cos_x2" | "cos2" => Ok(Self::cos_x2()),
            "cos_sum" => Ok(Self::cos_sum()),
            "one" => Ok(Self::constant(1.0)),
            other => Err(Error::Config(format!("unknown observable `{other}` (expected cos_x1, cos_x2, cos_sum or one)"))),
        }
    }
}

/// `(1/n) Σ_{k<n} g(fᵏ x)`.
pub fn birkhoff_average(s: &dyn SmoothSystem, g: &Observable, x: Point, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut p = x;
    let mut total = 0.0;
    for k in 0..n {
        if k > 0 {
            p = s.apply(p);
        }
        total += g.eval(p);
    }
    Ok(total / n as f64)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BasinPoint {
    pub x: Point,
    pub time_average: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BasinReport {
    pub observable: String,
    pub per_point: Vec<BasinPoint>,
    pub mean: f64,
    /// Sample standard deviation of the time averages.
    pub spread: f64,
    pub stderr: f64,
    pub reference: Option<f64>,
    pub tolerance: f64,
    pub fraction_converged: f64,
}

/// Time averages from `n_points` uniform initial points, point `i` drawn from
/// stream `(seed, i)`. The tolerance defaults to `3 sup|g| / √n_iters`;
/// without a reference integral the points are compared with their mean.
pub fn basin_experiment(
    s: &dyn SmoothSystem,
    g: &Observable,
    n_points: usize,
    n_iters: usize,
    seed: u64,
    tolerance: Option<f64>,
) -> Result<BasinReport> {
    if n_points < 10 {
        return Err(Error::invalid(format!("need at least 10 initial points, got {n_points}")));
    }
    if n_iters == 0 {
        return Err(Error::invalid("n_iters must be at least 1"));
    }
    let tolerance = tolerance.unwrap_or(3.0 * g.sup_abs / (n_iters as f64).sqrt());
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let per_point = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let x = rng::uniform_point(&mut rng::stream(seed, i as u64));
            Ok(BasinPoint { x, time_average: birkhoff_average(s, g, x, n_iters)?, n: n_iters })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_point.len() as f64;
    let mean = per_point.iter().map(|p| p.time_average).sum::<f64>() / n;
    let var = per_point.iter().map(|p| (p.time_average - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target = g.reference_integral.unwrap_or(mean);
    let converged = per_point.iter().filter(|p| (p.time_average - target).abs() <= tolerance).count();
    Ok(BasinReport {
        observable: g.name.clone(),
        per_point,
        mean,
        spread: var.sqrt(),
        stderr: (var / n).sqrt(),
        reference: g.reference_integral,
        tolerance,
        fraction_converged: converged as f64 / n,
    })
}

/// A symbolic coding of a system: a partition labelled by the SFT's symbols.
#[derive(Clone)]
pub struct MarkovCoding {
    pub name: String,
    pub alphabet_size: usize,
    symbol: Arc<dyn Fn(Point) -> u8 + Send + Sync>,
}

impl std::fmt::Debug for MarkovCoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MarkovCoding").field("name", &self.name).field("alphabet_size", &self.alphabet_size).finish()
    }
}

impl MarkovCoding {
    pub fn new(name: impl Into<String>, alphabet_size: usize, symbol: impl Fn(Point) -> u8 + Send + Sync + 'static) -> Self {
        MarkovCoding { name: name.into(), alphabet_size, symbol: Arc::new(symbol) }
    }

    /// The two vertical strips `{x₁ < p}`, `{x₁ ≥ p}` of the baker map `B_p`,
    /// a generating Markov partition onto the full 2-shift.
    pub fn baker(map: &BakerMap) -> Self {
        let m = map.clone();
        MarkovCoding::new(format!("baker({})", map.p()), 2, move |x| m.symbol(x))
    }

    pub fn symbol(&self, x: Point) -> u8 {
        (self.symbol)(x)
    }

    /// The first `len` symbols of the forward itinerary of `x`.
    pub fn itinerary(&self, s: &dyn SmoothSystem, x: Point, len: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(len);
        let mut p = x;
        for k in 0..len {
            if k > 0 {
                p = s.apply(p);
            }
            out.push(self.symbol(p));
        }
        out
    }
}

/// A function of the first symbols of the itinerary: `g(w)` for words `w`
/// of a fixed length; missing words count as 0.
#[derive(Clone, Debug)]
pub struct CylinderObservable {
    pub len: usize,
    pub values: HashMap<Vec<u8>, f64>,
}

impl CylinderObservable {
    pub fn new(len: usize, values: HashMap<Vec<u8>, f64>) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("cylinder observables need length at least 1"));
        }
        if values.keys().any(|w| w.len() != len) {
            return Err(Error::invalid(format!("every word must have length {len}")));
        }
        Ok(CylinderObservable { len, values })
    }

    /// Indicator of the cylinder `[a]`.
    pub fn indicator(a: u8) -> Self {
        CylinderObservable { len: 1, values: HashMap::from([(vec![a], 1.0)]) }
    }

    pub fn one(alphabet_size: usize) -> Self {
        CylinderObservable { len: 1, values: (0..alphabet_size as u8).map(|a| (vec![a], 1.0)).collect() }
    }

    pub fn value(&self, w: &[u8]) -> f64 {
        self.values.get(w).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GibbsComparison {
    pub gibbs_integral: f64,
    pub birkhoff_mean: f64,
    pub birkhoff_stderr: f64,
    pub difference: f64,
    pub n_points: usize,
    pub n_iters: usize,
}

/// `∫ g dμ` for the Gibbs measure of the model against the mean Birkhoff
/// average of `g ∘ itinerary` over Lebesgue-random initial points.
///
/// Orbits are kept short enough that floating-point iteration of an
/// expanding branch does not exhaust the mantissa; statistics come from many
/// initial points instead.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_vs_birkhoff(
    s: &dyn SmoothSystem,
    coding: &MarkovCoding,
    sft: &Sft,
    pot: &CylinderPotential,
    g: &CylinderObservable,
    n_points: usize,
    n_iters: usize,
    seed: u64,
) -> Result<GibbsComparison> {
    if coding.alphabet_size != sft.alphabet_size() {
        return Err(Error::CodingMismatch(format!(
            "coding `{}` has {} symbols, the model has {}",
            coding.name,
            coding.alphabet_size,
            sft.alphabet_size()
        )));
    }
    if n_points < 10 || n_iters == 0 {
        return Err(Error::invalid("need at least 10 points and 1 iteration"));
    }
    let data = rpf_solve(sft, pot, 1e-13)?;
    let mut gibbs_integral = 0.0;
    for w in sft.admissible_words(g.len) {
        let v = g.value(&w);
        if v != 0.0 {
            gibbs_integral += v * cylinder_mass(sft, pot, &data, &w)?;
        }
    }
    let averages = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let x = rng::uniform_point(&mut rng::stream(seed, i as u64));
            let word = coding.itinerary(s, x, n_iters + g.len - 1);
            if let Some(k) = (0..word.len().saturating_sub(1)).find(|&k| !sft.allows(word[k], word[k + 1])) {
                return Err(Error::CodingMismatch(format!(
                    "orbit of ({}, {}) makes the forbidden transition {} → {} at step {k}",
                    x.x1(),
                    x.x2(),
                    word[k],
                    word[k + 1]
                )));
            }
            Ok(word.windows(g.len).map(|w| g.value(w)).sum::<f64>() / n_iters as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = averages.len() as f64;
    let mean = averages.iter().sum::<f64>() / n;
    let var = averages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(GibbsComparison {
        gibbs_integral,
        birkhoff_mean: mean,
        birkhoff_stderr: (var / n).sqrt(),
        difference: mean - gibbs_integral,
        n_points,
        n_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{make_cat_map, make_perturbed_automorphism, Identity};

    #[test]
    fn birkhoff_examples() {
        let cat = make_cat_map();
        let one = Observable::constant(1.0);
        assert_eq!(birkhoff_average(&cat, &one, Point::new(0.3, 0.1), 17).unwrap(), 1.0);
        let g = Observable::cos_x1();
        let fixed = Point::new(0.0, 0.0);
        assert_eq!(birkhoff_average(&cat, &g, fixed, 100).unwrap(), 1.0);
        assert!(birkhoff_average(&cat, &g, fixed, 0).is_err());
        let x = rng::uniform_point(&mut rng::stream(11, 0));
        let a = birkhoff_average(&cat, &g, x, 100_000).unwrap();
        assert!(a.abs() < 0.03, "{a}");
    }

    #[test]
    fn time_averages_shift_along_orbits() {
        let cat = make_cat_map();
        let g = Observable::cos_sum();
        let x = Point::new(0.123, 0.456);
        let n = 500;
        let a = birkhoff_average(&cat, &g, x, n).unwrap();
        let b = birkhoff_average(&cat, &g, cat.apply(x), n).unwrap();
        assert!((a - b).abs() <= 2.0 * g.sup_abs / n as f64 + 1e-15);
    }

    #[test]
    fn basin_examples() {
        let cat = make_cat_map();
        let rep = basin_experiment(&cat, &Observable::cos_x1(), 100, 20_000, 1, Some(0.05)).unwrap();
        assert!(rep.fraction_converged >= 0.95, "{}", rep.fraction_converged);
        let rep = basin_experiment(&Identity, &Observable::constant(2.0), 10, 10, 1, Some(1e-9)).unwrap();
        assert_eq!(rep.fraction_converged, 1.0);
        assert!(basin_experiment(&cat, &Observable::cos_x1(), 5, 10, 1, None).is_err());
    }

    #[test]
    fn perturbed_spread_shrinks() {
        let f = make_perturbed_automorphism(0.01, 1).unwrap();
        let g = Observable::cos_x1();
        let short = basin_experiment(&f, &g, 40, 1_000, 3, None).unwrap();
        let long = basin_experiment(&f, &g, 40, 20_000, 3, None).unwrap();
        assert!(long.spread < short.spread, "{} vs {}", long.spread, short.spread);
    }

    #[test]
    fn gibbs_matches_birkhoff_on_baker_maps() {
        for (p, n_iters) in [(0.5, 40), (0.3, 40)] {
            let baker = BakerMap::new(p).unwrap();
            let coding = MarkovCoding::baker(&baker);
            let (sft, pot) = CylinderPotential::bernoulli(2, p).unwrap();
            let cmp = gibbs_vs_birkhoff(&baker, &coding, &sft, &pot, &CylinderObservable::indicator(0), 5_000, n_iters, 4).unwrap();
            assert!((cmp.gibbs_integral - p).abs() < 1e-12);
            assert!(cmp.difference.abs() < 4.0 * cmp.birkhoff_stderr + 1e-3, "{cmp:?}");
            let one = gibbs_vs_birkhoff(&baker, &coding, &sft, &pot, &CylinderObservable::one(2), 20, 10, 4).unwrap();
            assert!((one.gibbs_integral - 1.0).abs() < 1e-12 && one.birkhoff_mean == 1.0);
        }
    }

    #[test]
    fn coding_mismatch_is_reported() {
        let baker = BakerMap::new(0.5).unwrap();
        let coding = MarkovCoding::baker(&baker);
        let gm = Sft::golden_mean();
        let pot = CylinderPotential::zero(&gm, 2).unwrap();
        let r = gibbs_vs_birkhoff(&baker, &coding, &gm, &pot, &CylinderObservable::indicator(0), 50, 30, 0);
        assert!(matches!(r, Err(Error::CodingMismatch(_))));
        let three = MarkovCoding::new("three", 3, |_| 0);
        let full = Sft::full(2).unwrap();
        let pot = CylinderPotential::zero(&full, 2).unwrap();
        let r = gibbs_vs_birkhoff(&make_cat_map(), &three, &full, &pot, &CylinderObservable::indicator(0), 50, 3, 0);
        assert!(matches!(r, Err(Error::CodingMismatch(_))));
    }
}
