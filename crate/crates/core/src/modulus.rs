//! Moduli of continuity: closed-form and tabulated moduli, the Dini test,
//! the two "tilde" transforms and empirical moduli built from sampled data.
//!
//! Integrals of the form `∫ ω(s)/s ds` are computed in the logarithmic
//! variable `u = ln s`, one decade at a time, so that the integrand
//! `ω(e^u)` is bounded and smooth on every panel. Summability of the
//! decade increments (or of the series terms) is then decided from the
//! decay of the increments: a geometric decay gives a finite tail
//! estimate, an algebraic decay `k^{-p}` is summable iff `p > 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest positive argument ever fed to a modulus by the integrators.
const SMALLEST_ARGUMENT: f64 = 1e-300;

/// Partial sums above this bound are declared divergent outright.
const DIVERGENCE_BOUND: f64 = 1e12;

/// Algebraic decay `k^{-p}` is accepted as summable only for `p > 1 + margin`.
/// Exponents in `(1, 1 + margin]` cannot be told apart from the harmonic case
/// within the range of `f64`.
pub const ALGEBRAIC_MARGIN: f64 = 0.15;

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Power { alpha: f64 },
    LogPower { beta: f64, cutoff: f64, slope: f64 },
    Linear { slope: f64 },
    Table { points: Vec<(f64, f64)> },
}

/// A concave, non-decreasing function `ω` on `[0, t_max]` with `ω(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Modulus {
    kind: Kind,
    t_max: f64,
    scale: f64,
}

impl Modulus {
    /// `ω(t) = t^α`, `α ∈ (0, 1]`.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("power modulus needs alpha in (0, 1], got {alpha}")));
        }
        Ok(Self { kind: Kind::Power { alpha }, t_max: 1.0, scale: 1.0 })
    }

    /// `ω(t) = (ln 1/t)^{-β}` below the cutoff `t₀ = e^{-max(2, β+1)}`, extended
    /// affinely (with matching value and slope) above it.
    pub fn log_power(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("log-power modulus needs beta > 0, got {beta}")));
        }
        let u0 = (beta + 1.0).max(2.0);
        let cutoff = (-u0).exp();
        let slope = beta * u0.powf(-beta - 1.0) / cutoff;
        Ok(Self { kind: Kind::LogPower { beta, cutoff, slope }, t_max: 1.0, scale: 1.0 })
    }

    /// `ω(t) = slope · t`, `slope ≥ 0`.
    pub fn linear(slope: f64) -> Result<Self> {
        if !(slope >= 0.0 && slope.is_finite()) {
            return Err(Error::invalid(format!("linear modulus needs slope >= 0, got {slope}")));
        }
        Ok(Self { kind: Kind::Linear { slope }, t_max: 1.0, scale: 1.0 })
    }

    /// Piecewise-linear modulus through the given knots. The origin is
    /// prepended when missing; `t_max` defaults to the last knot.
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        let points = validate_table(points)?;
        let t_max = points.last().map(|p| p.0).unwrap_or(0.0);
        if t_max <= 0.0 {
            return Err(Error::invalid("table modulus needs a knot with t > 0"));
        }
        Ok(Self { kind: Kind::Table { points }, t_max, scale: 1.0 })
    }

    pub fn with_t_max(mut self, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::invalid(format!("t_max must be positive, got {t_max}")));
        }
        self.t_max = t_max;
        Ok(self)
    }

    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::invalid(format!("scale must be >= 0, got {factor}")));
        }
        self.scale *= factor;
        Ok(self)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Power { .. } => "power",
            Kind::LogPower { .. } => "log_power",
            Kind::Linear { .. } => "linear",
            Kind::Table { .. } => "table",
        }
    }

    /// Knots of a table modulus, `None` for closed forms.
    pub fn table_points(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            Kind::Table { points } => Some(points),
            _ => None,
        }
    }

    /// `ω(t)` for `0 ≤ t ≤ t_max`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.t_max) {
            return Err(Error::Domain { what: "t", value: t, lo: 0.0, hi: self.t_max });
        }
        Ok(self.value(t))
    }

    /// Unchecked evaluation; arguments above `t_max` are clamped to `t_max`.
    pub(crate) fn value(&self, t: f64) -> f64 {
        let t = t.min(self.t_max);
        if t <= 0.0 {
            return 0.0;
        }
        let base = match &self.kind {
            Kind::Power { alpha } => t.powf(*alpha),
            Kind::LogPower { beta, cutoff, slope } => {
                if t <= *cutoff {
                    (-t.ln()).powf(-beta)
                } else {
                    (-cutoff.ln()).powf(-beta) + slope * (t - cutoff)
                }
            }
            Kind::Linear { slope } => slope * t,
            Kind::Table { points } => interpolate(points, t),
        };
        self.scale * base
    }

    /// Dini test with the series `Σ ω(c^k)` reported for `c = 1/2`.
    pub fn dini_test(&self, tol: f64) -> Result<DiniReport> {
        self.dini_test_with(tol, &[0.5])
    }

    /// Estimates `∫₀¹ ω(t)/t dt` and classifies summability; also reports
    /// `ω̃_c(1)` for each requested `c`.
    pub fn dini_test_with(&self, tol: f64, cs: &[f64]) -> Result<DiniReport> {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
        }
        let acc = self.integral_from_zero(1.0, tol);
        let mut series = Vec::with_capacity(cs.len());
        for &c in cs {
            check_ratio(c)?;
            let value = match self.series_sum(c, 1.0, tol) {
                Accumulation { outcome: Outcome::Converged { value, .. }, .. } => Some(value),
                _ => None,
            };
            series.push(SeriesEstimate { c, value });
        }
        let (summable, integral_estimate, tail) = match acc.outcome {
            Outcome::Converged { value, tail } => (true, Some(value), tail),
            Outcome::Divergent { exponent } => (false, None, TailModel::Algebraic { exponent: exponent.unwrap_or(f64::NAN) }),
        };
        Ok(DiniReport {
            summable,
            integral_estimate,
            partial_integral: acc.partial,
            smallest_epsilon: acc.smallest_argument,
            tail,
            series,
        })
    }

    pub fn is_dini(&self) -> bool {
        matches!(self.integral_from_zero(1.0, 1e-8).outcome, Outcome::Converged { .. })
    }

    /// `ω̃(t) = ∫₀ᵗ ω(s)/s ds`. Rejects non-Dini moduli.
    pub fn tilde_integral(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain { what: "t", value: t, lo: 0.0, hi: f64::INFINITY });
        }
        if !self.is_dini() {
            return Err(Error::NotDini(format!("{} modulus", self.kind_name())));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        match self.integral_from_zero(t, 1e-13 * t.max(1e-3)).outcome {
            Outcome::Converged { value, .. } => Ok(value),
            Outcome::Divergent { .. } => Err(Error::NotDini(format!("{} modulus near t = {t}", self.kind_name()))),
        }
    }

    /// `ω̃_c(t) = Σ_{k≥0} ω(c^k t)`, truncated once the tail estimate drops below `tol`.
    pub fn tilde_series(&self, c: f64, t: f64, tol: f64) -> Result<f64> {
        check_ratio(c)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain { what: "t", value: t, lo: 0.0, hi: f64::INFINITY });
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        match self.series_sum(c, t, tol).outcome {
            Outcome::Converged { value, .. } => Ok(value),
            Outcome::Divergent { exponent } => Err(Error::Divergent(match exponent {
                Some(p) => format!("terms ω(c^k t) decay like k^-{p:.3}"),
                None => "partial sums exceeded the divergence bound".to_string(),
            })),
        }
    }

    /// Smallest `C ≥ 1` with `C⁻¹ ω̃_c ≤ ω̃ ≤ C ω̃_c` on the grid.
    pub fn equivalence_check(&self, c: f64, grid: &[f64]) -> Result<f64> {
        check_ratio(c)?;
        if grid.is_empty() {
            return Err(Error::invalid("equivalence grid is empty"));
        }
        let mut worst: f64 = 1.0;
        for &t in grid {
            if !(t > 0.0) {
                return Err(Error::invalid(format!("grid points must be positive, got {t}")));
            }
            let integral = self.tilde_integral(t)?;
            let series = self.tilde_series(c, t, 1e-12)?;
            if integral == 0.0 && series == 0.0 {
                continue;
            }
            let r = series / integral;
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Divergent(format!("unbounded ratio ω̃_c/ω̃ = {r} at t = {t}")));
            }
            worst = worst.max(r.max(1.0 / r));
        }
        Ok(worst)
    }

    /// The two Riemann-type sums bracketing `∫_{cⁿt}^{t} ω(x)/x dx`, which
    /// follow from `ω(x)/x` being non-increasing.
    pub fn dini_sandwich(&self, c: f64, t: f64, n: usize) -> Result<Sandwich> {
        check_ratio(c)?;
        if !(t > 0.0) {
            return Err(Error::invalid(format!("sandwich needs t > 0, got {t}")));
        }
        let mut lower = 0.0;
        let mut upper = 0.0;
        let mut ck = 1.0;
        for _ in 0..n {
            lower += (1.0 - c) * self.value(ck * t);
            upper += (1.0 - c) / c * self.value(ck * c * t);
            ck *= c;
        }
        let integral = self.log_integral(ck * t, t, 1e-14);
        Ok(Sandwich { lower, integral, upper })
    }

    /// `∫_a^b ω(s)/s ds` for `0 < a ≤ b`.
    pub fn log_integral(&self, a: f64, b: f64, tol: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let f = |u: f64| self.value(u.exp());
        adaptive_simpson(&f, a.ln(), b.ln(), tol)
    }

    fn integral_from_zero(&self, t: f64, tol: f64) -> Accumulation {
        let ln10 = std::f64::consts::LN_10;
        let per_panel = tol * 1e-3;
        let mut hi = t;
        accumulate(
            |_| {
                let lo = hi / 10.0;
                if lo < SMALLEST_ARGUMENT {
                    return None;
                }
                let f = |u: f64| self.value(u.exp());
                let ln_hi = hi.ln();
                let d = adaptive_simpson(&f, ln_hi - ln10, ln_hi, per_panel);
                hi = lo;
                Some((d, lo))
            },
            tol,
        )
    }

    fn series_sum(&self, c: f64, t: f64, tol: f64) -> Accumulation {
        let mut arg = t;
        accumulate(
            |_| {
                if arg < SMALLEST_ARGUMENT {
                    return None;
                }
                let term = self.value(arg);
                let at = arg;
                arg *= c;
                Some((term, at))
            },
            tol,
        )
    }

    /// Smallest `C` with `gap ≤ C ω(d)` over the sampled pairs.
    pub fn fit_constant(&self, pairs: &[(f64, f64)]) -> f64 {
        pairs
            .iter()
            .filter(|(d, _)| *d > 0.0)
            .map(|&(d, gap)| {
                let w = self.value(d);
                if w > 0.0 {
                    gap / w
                } else if gap > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

fn check_ratio(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { what: "c", value: c, lo: 0.0, hi: 1.0 })
    }
}

fn validate_table(mut points: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    if points.iter().any(|&(t, w)| !(t.is_finite() && w.is_finite() && t >= 0.0 && w >= 0.0)) {
        return Err(Error::invalid("table entries must be finite and non-negative"));
    }
    match points.first() {
        Some(&(0.0, w)) => {
            if w != 0.0 {
                return Err(Error::invalid("table modulus must vanish at 0"));
            }
        }
        _ => points.insert(0, (0.0, 0.0)),
    }
    let mut prev_slope = f64::INFINITY;
    for pair in points.windows(2) {
        let ((t0, w0), (t1, w1)) = (pair[0], pair[1]);
        if t1 <= t0 {
            return Err(Error::invalid("table knots must be strictly increasing in t"));
        }
        if w1 < w0 {
            return Err(Error::invalid("table modulus must be non-decreasing"));
        }
        let slope = (w1 - w0) / (t1 - t0);
        if slope > prev_slope * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::invalid(format!("table modulus is not concave near t = {t0}")));
        }
        prev_slope = slope;
    }
    Ok(points)
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let last = points[points.len() - 1];
    if t >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= t);
    let (t0, w0) = points[i - 1];
    let (t1, w1) = points[i];
    w0 + (w1 - w0) * (t - t0) / (t1 - t0)
}

/// Result of the Dini test.
#[derive(Clone, Debug, Serialize)]
pub struct DiniReport {
    pub summable: bool,
    /// `∫₀¹ ω(t)/t dt` including the extrapolated tail; `None` when divergent.
    pub integral_estimate: Option<f64>,
    /// `∫_ε¹ ω(t)/t dt` at the smallest `ε` reached.
    pub partial_integral: f64,
    pub smallest_epsilon: f64,
    pub tail: TailModel,
    pub series: Vec<SeriesEstimate>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeriesEstimate {
    pub c: f64,
    /// `ω̃_c(1)`, `None` when the series was flagged divergent.
    pub value: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TailModel {
    /// Terms reached exactly zero.
    Finite,
    Geometric { ratio: f64 },
    Algebraic { exponent: f64 },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Sandwich {
    pub lower: f64,
    pub integral: f64,
    pub upper: f64,
}

#[derive(Debug)]
enum Outcome {
    Converged { value: f64, tail: TailModel },
    Divergent { exponent: Option<f64> },
}

#[derive(Debug)]
struct Accumulation {
    partial: f64,
    smallest_argument: f64,
    outcome: Outcome,
}

/// Sums a non-increasing sequence of non-negative terms. `next` yields the
/// term together with the argument it was evaluated at, or `None` once the
/// argument range is exhausted.
fn accumulate(mut next: impl FnMut(usize) -> Option<(f64, f64)>, tol: f64) -> Accumulation {
    let mut terms: Vec<f64> = Vec::new();
    let mut partial = 0.0;
    let mut smallest_argument = f64::NAN;
    let mut k = 0;
    while let Some((term, arg)) = next(k) {
        k += 1;
        smallest_argument = arg;
        partial += term;
        terms.push(term);
        if term == 0.0 {
            return Accumulation { partial, smallest_argument, outcome: Outcome::Converged { value: partial, tail: TailModel::Finite } };
        }
        if partial > DIVERGENCE_BOUND {
            return Accumulation { partial, smallest_argument, outcome: Outcome::Divergent { exponent: None } };
        }
        let n = terms.len();
        if n >= 5 {
            let r = (n - 4..n)
                .map(|i| terms[i] / terms[i - 1])
                .fold(0.0, f64::max);
            if r < 1.0 {
                let tail = term * r / (1.0 - r);
                if tail < tol {
                    let r_last = terms[n - 1] / terms[n - 2];
                    let estimate = term * r_last / (1.0 - r_last);
                    return Accumulation {
                        partial,
                        smallest_argument,
                        outcome: Outcome::Converged { value: partial + estimate, tail: TailModel::Geometric { ratio: r_last } },
                    };
                }
            }
        }
    }
    // Argument range exhausted without a geometric tail: fit `term_k ≈ C k^{-p}`
    // on the second half of the sequence.
    let n = terms.len();
    if n < 8 {
        return Accumulation { partial, smallest_argument, outcome: Outcome::Divergent { exponent: None } };
    }
    let start = n / 2;
    let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &term) in terms.iter().enumerate().skip(start) {
        let x = ((i + 1) as f64).ln();
        let y = term.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        m += 1.0;
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let p = -slope;
    if p > 1.0 + ALGEBRAIC_MARGIN {
        let kn = n as f64;
        let last = terms[n - 1];
        let tail = last * kn.powf(p) * (kn + 0.5).powf(1.0 - p) / (p - 1.0);
        Accumulation {
            partial,
            smallest_argument,
            outcome: Outcome::Converged { value: partial + tail, tail: TailModel::Algebraic { exponent: p } },
        }
    } else {
        Accumulation { partial, smallest_argument, outcome: Outcome::Divergent { exponent: Some(p) } }
    }
}

pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Refinement below rounding level cannot reduce `delta` further.
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= (15.0 * tol).max(floor) {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Least concave non-decreasing majorant of the sampled `(distance, gap)`
/// pairs: the sup of gaps over `d ≤ t`, followed by the upper concave hull
/// through the origin. Every input pair is dominated: `ω(d_i) ≥ gap_i`.
pub fn empirical_modulus(pairs: &[(f64, f64)]) -> Result<Modulus> {
    if pairs.len() < 2 {
        return Err(Error::invalid(format!("empirical modulus needs at least 2 pairs, got {}", pairs.len())));
    }
    if pairs.iter().any(|&(d, g)| !(d > 0.0 && d.is_finite() && g >= 0.0 && g.is_finite())) {
        return Err(Error::invalid("empirical modulus needs positive distances and finite non-negative gaps"));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let t_max = sorted[sorted.len() - 1].0;

    // Jump points of t ↦ sup{gap_i : d_i ≤ t}.
    let mut frontier: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut running = 0.0;
    for &(d, g) in &sorted {
        if g > running {
            running = g;
            frontier.push((d, g));
        }
    }

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(frontier.len());
    for p in frontier {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // Drop b when it lies on or below the chord a → p.
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    if hull.len() == 1 {
        // All gaps are zero.
        hull.push((t_max, 0.0));
    }
    let kind = Kind::Table { points: hull };
    Ok(Modulus { kind, t_max, scale: 1.0 })
}

/// JSON record `{kind, params, t_max, table?}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusRecord {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

impl From<&Modulus> for ModulusRecord {
    fn from(m: &Modulus) -> Self {
        let mut params = serde_json::Map::new();
        let mut table = None;
        match &m.kind {
            Kind::Power { alpha } => {
                params.insert("alpha".into(), (*alpha).into());
            }
            Kind::LogPower { beta, .. } => {
                params.insert("beta".into(), (*beta).into());
            }
            Kind::Linear { slope } => {
                params.insert("slope".into(), (*slope).into());
            }
            Kind::Table { points } => table = Some(points.clone()),
        }
        if m.scale != 1.0 {
            params.insert("scale".into(), m.scale.into());
        }
        ModulusRecord { kind: m.kind_name().to_string(), params, t_max: m.t_max, table }
    }
}

impl TryFrom<ModulusRecord> for Modulus {
    type Error = Error;

    fn try_from(rec: ModulusRecord) -> Result<Self> {
        let param = |name: &str| -> Result<f64> {
            rec.params
                .get(name)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::invalid(format!("{} modulus needs numeric param `{name}`", rec.kind)))
        };
        let allowed: &[&str] = match rec.kind.as_str() {
            "power" => &["alpha", "scale"],
            "log_power" => &["beta", "scale"],
            "linear" => &["slope", "scale"],
            "table" => &["scale"],
            other => return Err(Error::invalid(format!("unknown modulus kind `{other}`"))),
        };
        if let Some(k) = rec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid(format!("unknown param `{k}` for {} modulus", rec.kind)));
        }
        let base = match rec.kind.as_str() {
            "power" => Modulus::power(param("alpha")?)?,
            "log_power" => Modulus::log_power(param("beta")?)?,
            "linear" => Modulus::linear(param("slope")?)?,
            _ => {
                let points = rec.table.clone().ok_or_else(|| Error::invalid("table modulus needs `table`"))?;
                Modulus::table(points)?
            }
        };
        let scale = if rec.params.contains_key("scale") { param("scale")? } else { 1.0 };
        base.with_t_max(rec.t_max)?.scaled(scale)
    }
}

impl Serialize for Modulus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModulusRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Modulus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = ModulusRecord::deserialize(d)?;
        Modulus::try_from(rec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_examples() {
        let m = Modulus::power(0.5).unwrap();
        assert_eq!(m.eval(0.25).unwrap(), 0.5);
        assert_eq!(m.eval(0.0).unwrap(), 0.0);
        let lp = Modulus::log_power(2.0).unwrap();
        assert_relative_eq!(lp.eval((-4.0f64).exp()).unwrap(), 1.0 / 16.0, max_relative = 1e-14);
        assert_eq!(lp.eval(0.0).unwrap(), 0.0);
        assert_eq!(Modulus::linear(3.0).unwrap().eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_out_of_domain() {
        let m = Modulus::power(0.5).unwrap();
        assert!(matches!(m.eval(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(m.eval(1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn log_power_extension_is_continuous_and_concave() {
        for beta in [0.5, 1.0, 2.0, 3.0, 4.0] {
            let m = Modulus::log_power(beta).unwrap();
            let Kind::LogPower { cutoff, .. } = m.kind else { unreachable!() };
            let below = m.value(cutoff * (1.0 - 1e-9));
            let above = m.value(cutoff * (1.0 + 1e-9));
            assert!((below - above).abs() < 1e-8, "beta {beta}");
            let ts: Vec<f64> = (1..400).map(|i| (i as f64 / 400.0).powi(4)).collect();
            for w in ts.windows(2) {
                assert!(m.value(w[0]) / w[0] >= m.value(w[1]) / w[1] * (1.0 - 1e-12), "beta {beta} t {}", w[0]);
            }
        }
    }

    #[test]
    fn dini_power_half_integral_is_two() {
        let r = Modulus::power(0.5).unwrap().dini_test(1e-8).unwrap();
        assert!(r.summable);
        assert!((r.integral_estimate.unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn dini_log_power_threshold() {
        assert!(!Modulus::log_power(1.0).unwrap().dini_test(1e-6).unwrap().summable);
        assert!(Modulus::log_power(2.0).unwrap().dini_test(1e-6).unwrap().summable);
        assert!(!Modulus::log_power(0.5).unwrap().dini_test(1e-6).unwrap().summable);
        assert!(Modulus::log_power(3.0).unwrap().dini_test(1e-6).unwrap().summable);
    }

    #[test]
    fn dini_log_power_two_matches_closed_form() {
        // β = 2, cutoff t₀ = e^{-3}: ∫₀^{t₀} = 1/3; above t₀ the affine piece
        // a + b (s - t₀) contributes a ln(1/t₀) + b (1 - t₀) - b t₀ ln(1/t₀).
        let t0 = (-3.0f64).exp();
        let a = 1.0 / 9.0;
        let b = 2.0 * 3.0f64.powi(-3) / t0;
        let exact = 1.0 / 3.0 + a * 3.0 + b * (1.0 - t0) - b * t0 * 3.0;
        let r = Modulus::log_power(2.0).unwrap().dini_test(1e-8).unwrap();
        assert!((r.integral_estimate.unwrap() - exact).abs() < 1e-4, "{:?} vs {exact}", r.integral_estimate);
    }

    #[test]
    fn tilde_integral_examples() {
        let half = Modulus::power(0.5).unwrap();
        assert_relative_eq!(half.tilde_integral(0.25).unwrap(), 1.0, max_relative = 1e-9);
        assert_eq!(half.tilde_integral(0.0).unwrap(), 0.0);
        let one = Modulus::power(1.0).unwrap();
        assert_relative_eq!(one.tilde_integral(0.5).unwrap(), 0.5, max_relative = 1e-9);
    }

    #[test]
    fn tilde_integral_rejects_non_dini() {
        let m = Modulus::log_power(1.0).unwrap();
        assert!(matches!(m.tilde_integral(0.1), Err(Error::NotDini(_))));
    }

    #[test]
    fn tilde_series_examples() {
        let one = Modulus::power(1.0).unwrap();
        assert_relative_eq!(one.tilde_series(0.5, 1.0, 1e-12).unwrap(), 2.0, max_relative = 1e-12);
        let half = Modulus::power(0.5).unwrap();
        assert_relative_eq!(half.tilde_series(0.25, 1.0, 1e-12).unwrap(), 2.0, max_relative = 1e-12);
        assert_eq!(half.tilde_series(0.5, 0.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn tilde_series_flags_divergence() {
        let m = Modulus::log_power(1.0).unwrap();
        assert!(matches!(m.tilde_series(0.5, 0.1, 1e-8), Err(Error::Divergent(_))));
    }

    #[test]
    fn equivalence_examples() {
        let one = Modulus::power(1.0).unwrap();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let c = one.equivalence_check(0.5, &grid).unwrap();
        assert!((c - 2.0).abs() < 1e-9, "{c}");
        // ω̃(t) = 2√t, ω̃_{1/2}(t) = √t/(1 - 2^{-1/2}): ratio is constant.
        let half = Modulus::power(0.5).unwrap();
        let expected = (1.0 / (1.0 - 0.5f64.sqrt())) / 2.0;
        let c = half.equivalence_check(0.5, &grid).unwrap();
        assert_relative_eq!(c, expected.max(1.0 / expected), max_relative = 1e-9);
        let single = one.equivalence_check(0.5, &[0.3]).unwrap();
        assert_relative_eq!(single, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn empirical_identity_is_linear_up_to_sampling() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let mut pairs = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            for &y in &xs[i + 1..] {
                pairs.push((y - x, y - x));
            }
        }
        let m = empirical_modulus(&pairs).unwrap();
        for t in [0.01, 0.05, 0.2, 0.7, 1.0] {
            let w = m.eval(t).unwrap();
            assert!((w - t).abs() < 1e-12, "t {t} ω {w}");
        }
    }

    #[test]
    fn empirical_two_pairs_monotone_rearrangement() {
        let m = empirical_modulus(&[(0.1, 0.5), (0.2, 0.3)]).unwrap();
        assert!(m.eval(0.2).unwrap() >= 0.5);
        assert!(m.eval(0.1).unwrap() >= 0.5);
        assert!((m.eval(0.05).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empirical_sqrt_is_dominated_by_power_half() {
        let xs: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let mut pairs = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            for &y in &xs[i + 1..] {
                pairs.push((y - x, y.sqrt() - x.sqrt()));
            }
        }
        let m = empirical_modulus(&pairs).unwrap();
        for i in 1..=100 {
            let t = i as f64 / 100.0;
            assert!(m.eval(t).unwrap() <= 1.1 * t.sqrt(), "t {t}");
        }
        for &(d, g) in &pairs {
            assert!(m.eval(d).unwrap() >= g - 1e-15);
        }
    }

    #[test]
    fn empirical_rejects_bad_input() {
        assert!(empirical_modulus(&[]).is_err());
        assert!(empirical_modulus(&[(0.1, 0.2)]).is_err());
        assert!(empirical_modulus(&[(0.0, 0.2), (0.1, 0.3)]).is_err());
    }

    #[test]
    fn table_rejects_convex_data() {
        assert!(Modulus::table(vec![(0.1, 0.1), (0.2, 0.5)]).is_err());
        assert!(Modulus::table(vec![(0.1, 0.5), (0.2, 0.4)]).is_err());
        let m = Modulus::table(vec![(0.1, 0.5), (0.2, 0.6)]).unwrap();
        assert_eq!(m.table_points().unwrap()[0], (0.0, 0.0));
    }

    #[test]
    fn json_record_round_trip() {
        let m = Modulus::log_power(2.0).unwrap().scaled(0.3).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"kind\":\"log_power\""));
        let back: Modulus = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"kind":"power","params":{"alpha":0.5,"beta":1},"t_max":1}"#;
        assert!(serde_json::from_str::<Modulus>(bad).is_err());
    }
}
