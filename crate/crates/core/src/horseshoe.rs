//! The positive-measure horseshoe: Cantor sets `K_I`, `K_J` cut by central
//! gaps, the interval map `g: I → J` with derivative 2 on the Cantor part,
//! the measure of `Λ = K_J × K_J`, and the certificate that the modulus of
//! `g′` fails the Dini condition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modulus::{empirical_modulus, Modulus};

pub const MAX_TREE_DEPTH: usize = 40;
pub const MAX_MAP_DEPTH: usize = 30;
/// Terms summed exactly before the analytic tail of `Σ βₙ` takes over.
const SERIES_TERMS: usize = 1_000_000;

/// `βₙ = 1/(n+c)²`, `αₙ = β_{n+1}/2`, `δₙ = 2βₙ/β_{n+1} − 2`, with
/// `I = [β₀/2, 1]` and `J = [−1, 1]`. The standard choice is `c = 10`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HorseshoeParams {
    pub offset: f64,
}

impl Default for HorseshoeParams {
    fn default() -> Self {
        HorseshoeParams { offset: 10.0 }
    }
}

impl HorseshoeParams {
    pub fn new(offset: f64) -> Result<Self> {
        let p = HorseshoeParams { offset };
        if !(offset >= 1.0 && offset.is_finite()) {
            return Err(Error::Domain { what: "offset", value: offset, lo: 1.0, hi: f64::INFINITY });
        }
        // Σβ < |J| = 2 and Σα < |I| keep both Cantor sets of positive measure.
        let (sum_beta, _) = p.beta_sum();
        if sum_beta >= 2.0 || (sum_beta - p.beta(0)) / 2.0 >= p.interval_i().1 - p.interval_i().0 {
            return Err(Error::invalid("gap schedule too large for the intervals"));
        }
        Ok(p)
    }

    pub fn beta(&self, n: usize) -> f64 {
        1.0 / (n as f64 + self.offset).powi(2)
    }

    pub fn alpha(&self, n: usize) -> f64 {
        self.beta(n + 1) / 2.0
    }

    /// `2βₙ/β_{n+1} − 2 = 2(2(n+c)+1)/(n+c)²`, written to avoid cancellation.
    pub fn delta(&self, n: usize) -> f64 {
        let m = n as f64 + self.offset;
        2.0 * (2.0 * m + 1.0) / (m * m)
    }

    pub fn interval_i(&self) -> (f64, f64) {
        (self.beta(0) / 2.0, 1.0)
    }

    pub fn interval_j(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    pub fn alpha_schedule(&self, depth: usize) -> Vec<f64> {
        (0..=depth).map(|n| self.alpha(n)).collect()
    }

    pub fn beta_schedule(&self, depth: usize) -> Vec<f64> {
        (0..=depth).map(|n| self.beta(n)).collect()
    }

    /// `Σ_{n≥0} βₙ` and the width of its enclosure: exact terms up to
    /// `N`, then `1/(N+c) ≤ tail ≤ 1/(N+c−1)` from the integral test.
    pub fn beta_sum(&self) -> (f64, f64) {
        let partial = kahan((0..SERIES_TERMS).rev().map(|n| self.beta(n)));
        let n = SERIES_TERMS as f64 + self.offset;
        let (lo, hi) = (1.0 / n, 1.0 / (n - 1.0));
        (partial + 0.5 * (lo + hi), 0.5 * (hi - lo))
    }
}

fn kahan(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0, 0.0);
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Intervals and central gap of one node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TreeNode {
    pub left: f64,
    pub right: f64,
    pub gap_left: f64,
    pub gap_right: f64,
}

/// The binary Cantor construction: the node `I_a` at level `n = |a|` carries a
/// central gap of length `schedule[n] / 2ⁿ`, and `I_{a0}`, `I_{a1}` are what
/// remains on either side. All nodes of a level have the same length, so the
/// tree is stored implicitly by its per-level lengths.
#[derive(Clone, Debug, Serialize)]
pub struct CantorTree {
    pub interval: (f64, f64),
    pub depth: usize,
    pub schedule: Vec<f64>,
    /// `node_lengths[n]` for `n = 0 … depth + 1`; the last entry is the leaf length.
    pub node_lengths: Vec<f64>,
    /// Bound on the rounding error of any computed endpoint.
    pub error_bound: f64,
}

pub fn build_tree(interval: (f64, f64), schedule: &[f64], depth: usize) -> Result<CantorTree> {
    let (a, b) = interval;
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("interval must have positive length"));
    }
    if depth > MAX_TREE_DEPTH {
        return Err(Error::invalid(format!("depth {depth} exceeds {MAX_TREE_DEPTH}")));
    }
    if schedule.len() < depth + 1 {
        return Err(Error::invalid(format!("schedule needs {} entries, got {}", depth + 1, schedule.len())));
    }
    if schedule.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::invalid("gap lengths must be non-negative"));
    }
    let total: f64 = schedule[..=depth].iter().sum();
    if total >= b - a {
        return Err(Error::invalid(format!("gap schedule {total} does not fit in an interval of length {}", b - a)));
    }
    let mut node_lengths = vec![b - a];
    for n in 0..=depth {
        let gap = schedule[n] / 2f64.powi(n as i32);
        node_lengths.push((node_lengths[n] - gap) / 2.0);
    }
    let error_bound = 4.0 * (depth as f64 + 2.0) * f64::EPSILON * a.abs().max(b.abs());
    Ok(CantorTree { interval, depth, schedule: schedule[..=depth].to_vec(), node_lengths, error_bound })
}

impl CantorTree {
    fn gap_len(&self, n: usize) -> f64 {
        self.schedule[n] / 2f64.powi(n as i32)
    }

    /// The node `I_a` for a word of length at most `depth`.
    pub fn node(&self, word: &[u8]) -> Result<TreeNode> {
        if word.len() > self.depth {
            return Err(Error::invalid(format!("word length {} exceeds depth {}", word.len(), self.depth)));
        }
        let mut left = self.interval.0;
        for (n, &bit) in word.iter().enumerate() {
            if bit > 1 {
                return Err(Error::invalid("tree words are binary"));
            }
            if bit == 1 {
                left += self.node_lengths[n + 1] + self.gap_len(n);
            }
        }
        let n = word.len();
        let len = self.node_lengths[n];
        Ok(TreeNode { left, right: left + len, gap_left: left + self.node_lengths[n + 1], gap_right: left + self.node_lengths[n + 1] + self.gap_len(n) })
    }

    /// The `2^{depth+1}` leaf intervals, left to right.
    pub fn leaves(&self) -> Result<Vec<(f64, f64)>> {
        if self.depth > 22 {
            return Err(Error::invalid("leaf enumeration is limited to depth 22"));
        }
        let count = 1usize << (self.depth + 1);
        let len = self.node_lengths[self.depth + 1];
        Ok((0..count)
            .map(|i| {
                let mut left = self.interval.0;
                for n in 0..=self.depth {
                    if (i >> (self.depth - n)) & 1 == 1 {
                        left += self.node_lengths[n + 1] + self.gap_len(n);
                    }
                }
                (left, left + len)
            })
            .collect())
    }

    /// Total length of the level-`m` leaves: `|I| − Σ_{n<m} schedule[n]`.
    pub fn remaining_length(&self, m: usize) -> f64 {
        self.node_lengths[m] * 2f64.powi(m as i32)
    }

    /// Rows `(word, left, right, gap_left, gap_right)` for all nodes up to `max_level`.
    pub fn dump(&self, max_level: usize) -> Result<Vec<(String, TreeNode)>> {
        let max_level = max_level.min(self.depth);
        if max_level > 16 {
            return Err(Error::invalid("tree dumps are limited to level 16"));
        }
        let mut rows = Vec::new();
        for n in 0..=max_level {
            for i in 0..(1usize << n) {
                let word: Vec<u8> = (0..n).map(|k| ((i >> (n - 1 - k)) & 1) as u8).collect();
                let label: String = word.iter().map(|b| char::from(b'0' + b)).collect();
                rows.push((label, self.node(&word)?));
            }
        }
        Ok(rows)
    }
}

/// `∫₀¹ 30 s²(1−s)² ds = 1`; peak value `30/16` at `s = 1/2`.
fn bump(s: f64) -> f64 {
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

fn bump_integral(s: f64) -> f64 {
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

const BUMP_PEAK: f64 = 30.0 / 16.0;

/// `|Λ| = (2 − Σβₙ)²` with an enclosure of the rounding and tail error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeasureReport {
    pub value: f64,
    pub error_bound: f64,
    pub beta_sum: f64,
    pub k_j_measure: f64,
    pub k_i_measure: f64,
}

pub fn lambda_measure(params: &HorseshoeParams) -> MeasureReport {
    let (sum, width) = params.beta_sum();
    let k_j = 2.0 - sum;
    let sum_alpha = (sum - params.beta(0)) / 2.0;
    let (a, b) = params.interval_i();
    MeasureReport { value: k_j * k_j, error_bound: 2.0 * k_j * width + width * width + 1e-13, beta_sum: sum, k_j_measure: k_j, k_i_measure: b - a - sum_alpha }
}

/// `(2 − Σ_{n≤d} βₙ)²` and the bound `2(2 − partial)·tail + tail²` on its
/// distance to the limit, with `tail ≤ 1/(d + c)`.
pub fn lambda_measure_truncated(params: &HorseshoeParams, depth: usize) -> (f64, f64) {
    let partial: f64 = (0..=depth).map(|n| params.beta(n)).sum();
    let tail = 1.0 / (depth as f64 + params.offset);
    let rest = 2.0 - partial;
    (rest * rest, 2.0 * rest * tail + tail * tail)
}

/// The map `g: I → J` at a finite depth: on each gap `I*_a` of level `n` it
/// maps onto `J*_a` with `g′ = 2 + A·30s²(1−s)²`, `s` the relative position
/// and `A` fixed by the image length; each leaf interval maps affinely onto
/// the corresponding leaf of `J`.
#[derive(Clone, Debug)]
pub struct HorseshoeMap {
    pub params: HorseshoeParams,
    pub tree_i: CantorTree,
    pub tree_j: CantorTree,
    /// Bump amplitude on the gaps of each level: `βₙ/αₙ − 2 = δₙ`.
    pub amplitudes: Vec<f64>,
    /// Slope of the affine leaf pieces, tending to 2 as the depth grows.
    pub leaf_slope: f64,
}

pub fn build_g(params: &HorseshoeParams, depth: usize) -> Result<HorseshoeMap> {
    if depth > MAX_MAP_DEPTH {
        return Err(Error::invalid(format!("depth {depth} exceeds {MAX_MAP_DEPTH}")));
    }
    let tree_i = build_tree(params.interval_i(), &params.alpha_schedule(depth), depth)?;
    let tree_j = build_tree(params.interval_j(), &params.beta_schedule(depth), depth)?;
    let mut amplitudes = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let mean = tree_j.gap_len(n) / tree_i.gap_len(n);
        let amp = mean - 2.0;
        let delta = params.delta(n);
        let (lo, hi) = (2.0 + amp.min(0.0) * BUMP_PEAK, 2.0 + amp.max(0.0) * BUMP_PEAK);
        if lo < 2.0 - delta || hi > mean + delta || lo <= 0.0 {
            return Err(Error::invalid(format!("no derivative profile fits the band at level {n}")));
        }
        amplitudes.push(amp);
    }
    let leaf_slope = tree_j.node_lengths[depth + 1] / tree_i.node_lengths[depth + 1];
    Ok(HorseshoeMap { params: *params, tree_i, tree_j, amplitudes, leaf_slope })
}

enum Piece {
    Gap { level: usize, s: f64, image_left: f64 },
    Leaf { offset: f64, image_left: f64 },
}

impl HorseshoeMap {
    fn locate(&self, x: f64) -> Result<Piece> {
        let (a, b) = self.tree_i.interval;
        if !(x >= a - self.tree_i.error_bound && x <= b + self.tree_i.error_bound) {
            return Err(Error::Domain { what: "x", value: x, lo: a, hi: b });
        }
        let x = x.clamp(a, b);
        let (mut left_i, mut left_j) = (a, self.tree_j.interval.0);
        for n in 0..=self.tree_i.depth {
            let gl = left_i + self.tree_i.node_lengths[n + 1];
            let gr = gl + self.tree_i.gap_len(n);
            let gj = left_j + self.tree_j.node_lengths[n + 1];
            if x < gl {
                continue;
            }
            if x <= gr {
                return Ok(Piece::Gap { level: n, s: (x - gl) / (gr - gl), image_left: gj });
            }
            left_i = gr;
            left_j = gj + self.tree_j.gap_len(n);
        }
        Ok(Piece::Leaf { offset: x - left_i, image_left: left_j })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(match self.locate(x)? {
            Piece::Gap { level, s, image_left } => {
                let len = self.tree_i.gap_len(level);
                image_left + len * (2.0 * s + self.amplitudes[level] * bump_integral(s))
            }
            Piece::Leaf { offset, image_left } => image_left + self.leaf_slope * offset,
        })
    }

    /// `g′` on a level-`n` gap at relative position `s ∈ [0, 1]`.
    pub fn gap_derivative(&self, level: usize, s: f64) -> f64 {
        2.0 + self.amplitudes[level] * bump(s)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        Ok(match self.locate(x)? {
            Piece::Gap { level, s, .. } => 2.0 + self.amplitudes[level] * bump(s),
            Piece::Leaf { .. } => self.leaf_slope,
        })
    }

    /// `(|x − y|, |g′(x) − g′(y)|)` pairs: for every level, the gap's peak
    /// against points at dyadic fractions of the gap, which realize the
    /// largest oscillation of `g′` at each scale.
    pub fn derivative_samples(&self) -> Vec<(f64, f64)> {
        let mut pairs = Vec::new();
        for n in 0..=self.tree_i.depth {
            let len = self.tree_i.gap_len(n);
            let peak = 2.0 + self.amplitudes[n] * BUMP_PEAK;
            for k in 1..=16 {
                let s = 0.5 * (1.0 - (k as f64 / 16.0).powi(2));
                let d = (0.5 - s) * len;
                let v = (peak - (2.0 + self.amplitudes[n] * bump(s))).abs();
                if d > 0.0 {
                    pairs.push((d, v));
                }
            }
        }
        pairs
    }

    /// Least concave majorant of the derivative samples, on `[0, 1]`.
    pub fn empirical_modulus(&self) -> Result<Modulus> {
        empirical_modulus(&self.derivative_samples())?.with_t_max(1.0)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CertificateRow {
    pub n: usize,
    pub delta_n: f64,
    pub omega_bound: f64,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiniCertificate {
    pub rows: Vec<CertificateRow>,
    /// `δₙ ≤ ω(2⁻ⁿ)` for every row.
    pub bounded: bool,
    /// `Σ_{n≤N} ω(2⁻ⁿ) ≥ Σ_{n≤N} δₙ` at the last row.
    pub omega_sum_dominates: bool,
    /// `(N, Σ_{n≤N} δₙ)` at checkpoints up to `10⁴`.
    pub partial_sums: Vec<(usize, f64)>,
    /// Smallest `N` with `Σ_{n≤N} δₙ > 10`.
    pub first_n_above_10: Option<usize>,
    /// Least-squares slope of `Σ_{n≤N} δₙ` against `log N` over `N ∈ [10², 10⁴]`.
    pub log_slope: f64,
    /// `δₙ ≥ 4/(n + c)`, so the series diverges like the harmonic series.
    pub divergent: bool,
}

pub fn dini_violation_certificate(params: &HorseshoeParams, depth: usize, m: &Modulus) -> Result<DiniCertificate> {
    let mut rows = Vec::with_capacity(depth + 1);
    let (mut partial, mut omega_sum) = (0.0, 0.0);
    for n in 0..=depth {
        let delta_n = params.delta(n);
        let omega_bound = m.value(0.5f64.powi(n as i32));
        partial += delta_n;
        omega_sum += omega_bound;
        rows.push(CertificateRow { n, delta_n, omega_bound, partial_sum: partial });
    }
    let bounded = rows.iter().all(|r| r.delta_n <= r.omega_bound);
    let mut partial_sums = Vec::new();
    let mut first = None;
    let mut sum = 0.0;
    let mut fit = Vec::new();
    for n in 0..=10_000usize {
        sum += params.delta(n);
        if first.is_none() && sum > 10.0 {
            first = Some(n);
        }
        if [10, 100, 1000, 2000, 10_000].contains(&n) {
            partial_sums.push((n, sum));
        }
        if n >= 100 && n % 50 == 0 {
            fit.push(((n as f64).ln(), sum));
        }
    }
    let k = fit.len() as f64;
    let (mx, my) = (fit.iter().map(|p| p.0).sum::<f64>() / k, fit.iter().map(|p| p.1).sum::<f64>() / k);
    let log_slope = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / fit.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let divergent = (0..=10_000).all(|n| params.delta(n) >= 4.0 / (n as f64 + params.offset));
    Ok(DiniCertificate { rows, bounded, omega_sum_dominates: omega_sum >= partial, partial_sums, first_n_above_10: first, log_slope, divergent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_formulas() {
        let p = HorseshoeParams::default();
        assert_eq!(p.beta(0), 0.01);
        assert!((p.delta(0) - 0.42).abs() < 1e-15);
        for n in 0..50 {
            let direct = 2.0 * p.beta(n) / p.beta(n + 1) - 2.0;
            assert!((p.delta(n) - direct).abs() < 1e-13);
            assert!((p.alpha(n) - p.beta(n + 1) / 2.0).abs() == 0.0);
        }
        assert!(HorseshoeParams::new(0.5).is_err());
    }

    #[test]
    fn beta_series_oracle() {
        let p = HorseshoeParams::default();
        let oracle = std::f64::consts::PI.powi(2) / 6.0 - (1..=9).map(|k| 1.0 / (k * k) as f64).sum::<f64>();
        let (sum, width) = p.beta_sum();
        assert!((sum - oracle).abs() < 1e-11, "{sum} vs {oracle}");
        assert!(width < 1e-12);
        let m = lambda_measure(&p);
        assert!((m.value - (2.0 - oracle).powi(2)).abs() < 1e-10);
        assert!((m.value - 3.5904).abs() < 1e-3);
        assert!((m.k_j_measure - 2.0 * m.k_i_measure).abs() < 1e-12);
    }

    #[test]
    fn truncations_decrease_to_the_limit() {
        let p = HorseshoeParams::default();
        let limit = lambda_measure(&p).value;
        let mut prev = f64::INFINITY;
        for d in [0, 1, 5, 20, 100, 1000] {
            let (v, bound) = lambda_measure_truncated(&p, d);
            assert!(v < prev && v >= limit && v - limit <= bound + 1e-12, "depth {d}");
            prev = v;
        }
    }

    #[test]
    fn tree_examples() {
        let t = build_tree((0.0, 1.0), &[0.2], 0).unwrap();
        let root = t.node(&[]).unwrap();
        assert!((root.gap_left - 0.4).abs() < 1e-15 && (root.gap_right - 0.6).abs() < 1e-15);
        let p = HorseshoeParams::default();
        let depth = 8;
        let t = build_tree(p.interval_i(), &p.alpha_schedule(depth), depth).unwrap();
        let leaves = t.leaves().unwrap();
        assert_eq!(leaves.len(), 1 << (depth + 1));
        let total: f64 = leaves.iter().map(|(a, b)| b - a).sum();
        let expected = 1.0 - p.beta(0) / 2.0 - (0..=depth).map(|n| p.alpha(n)).sum::<f64>();
        assert!((total - expected).abs() < 1e-12);
        assert!(leaves.windows(2).all(|w| w[0].1 < w[1].0));
        // Children sit inside the parent on either side of its gap.
        let node = t.node(&[1, 0, 1]).unwrap();
        let (l, r) = (t.node(&[1, 0, 1, 0]).unwrap(), t.node(&[1, 0, 1, 1]).unwrap());
        assert!((l.left - node.left).abs() < 1e-15 && (l.right - node.gap_left).abs() < 1e-15);
        assert!((r.left - node.gap_right).abs() < 1e-15 && (r.right - node.right).abs() < 1e-15);
        let gap_len = node.gap_right - node.gap_left;
        assert!((gap_len - p.alpha(3) / 8.0).abs() < 1e-15);
        assert!(((node.gap_left + node.gap_right) - (node.left + node.right)).abs() < 1e-15);
        assert!(build_tree((0.0, 0.1), &[0.2], 0).is_err());
        assert!(build_tree((0.0, 1.0), &[0.0; 50], 45).is_err());
    }

    #[test]
    fn g_is_a_monotone_bijection_with_the_band() {
        let p = HorseshoeParams::default();
        let g = build_g(&p, 5).unwrap();
        let (a, b) = p.interval_i();
        assert!((g.eval(a).unwrap() + 1.0).abs() < 1e-12);
        assert!((g.eval(b).unwrap() - 1.0).abs() < 1e-12);
        let m = 200_000;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=m {
            let x = a + (b - a) * i as f64 / m as f64;
            let y = g.eval(x).unwrap();
            assert!(y > prev - 1e-15);
            prev = y;
            assert!(g.derivative(x).unwrap() > 0.0);
        }
        for n in 0..=5 {
            let word = vec![1u8; n];
            let gi = g.tree_i.node(&word).unwrap();
            let gj = g.tree_j.node(&word).unwrap();
            assert!((g.eval(gi.gap_left).unwrap() - gj.gap_left).abs() < 1e-12);
            assert!((g.eval(gi.gap_right).unwrap() - gj.gap_right).abs() < 1e-12);
            assert_eq!(g.gap_derivative(n, 0.0), 2.0);
            assert_eq!(g.gap_derivative(n, 1.0), 2.0);
            let inside = 1e-6 * (gi.gap_right - gi.gap_left);
            assert!((g.derivative(gi.gap_left + inside).unwrap() - 2.0).abs() < 1e-9);
            assert!((g.derivative(gi.gap_right - inside).unwrap() - 2.0).abs() < 1e-9);
            let mean = (gj.gap_right - gj.gap_left) / (gi.gap_right - gi.gap_left);
            assert!((mean - 2.0 * p.beta(n) / p.beta(n + 1)).abs() < 1e-9);
            for k in 0..=200 {
                let x = gi.gap_left + (gi.gap_right - gi.gap_left) * k as f64 / 200.0;
                let d = g.derivative(x).unwrap();
                assert!(d >= 2.0 - p.delta(n) && d <= p.beta(n) / p.alpha(n) + p.delta(n));
            }
        }
        assert!((g.leaf_slope - 2.0).abs() < 0.1);
        assert!(g.eval(2.0).is_err());
    }

    #[test]
    fn certificate_examples() {
        let p = HorseshoeParams::default();
        let g = build_g(&p, 20).unwrap();
        let omega = g.empirical_modulus().unwrap();
        let cert = dini_violation_certificate(&p, 20, &omega).unwrap();
        assert!(cert.bounded, "{:?}", cert.rows);
        assert!(cert.omega_sum_dominates);
        assert!(cert.first_n_above_10.unwrap() <= 2000);
        assert!(cert.log_slope > 3.0 && cert.log_slope < 5.0, "{}", cert.log_slope);
        assert!(cert.divergent);
        assert!((cert.rows[0].delta_n - 0.42).abs() < 1e-15);
    }
}
