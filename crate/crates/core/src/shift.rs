//! Subshifts of finite type, finite-range potentials, the transfer operator
//! and the Gibbs measure it produces.
//!
//! A potential of depth `m` depends on the first `m` symbols. The transfer
//! operator then preserves functions of the first `m − 1` symbols, so it is
//! a sparse non-negative matrix indexed by admissible words of length `m − 1`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulus::Modulus;

const MAX_ITERATIONS: usize = 200_000;
/// Largest number of states (admissible words of length `m − 1`).
const MAX_STATES: usize = 1 << 22;

/// A subshift of finite type on `{0, …, k−1}` with a 0/1 transition matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sft {
    k: usize,
    adjacency: Vec<Vec<u8>>,
    irreducible: bool,
    period: usize,
}

impl Sft {
    pub fn new(adjacency: Vec<Vec<u8>>) -> Result<Self> {
        let k = adjacency.len();
        if k == 0 {
            return Err(Error::invalid("adjacency matrix is empty"));
        }
        if k > 255 {
            return Err(Error::invalid("alphabets above 255 symbols are not supported"));
        }
        for row in &adjacency {
            if row.len() != k {
                return Err(Error::invalid("adjacency matrix must be square"));
            }
            if row.iter().any(|&v| v > 1) {
                return Err(Error::invalid("adjacency entries must be 0 or 1"));
            }
            if row.iter().all(|&v| v == 0) {
                return Err(Error::invalid("adjacency matrix has an all-zero row"));
            }
        }
        for j in 0..k {
            if adjacency.iter().all(|row| row[j] == 0) {
                return Err(Error::invalid("adjacency matrix has an all-zero column"));
            }
        }
        let (irreducible, period) = connectivity(&adjacency);
        Ok(Sft { k, adjacency, irreducible, period })
    }

    /// The full shift on `k` symbols.
    pub fn full(k: usize) -> Result<Self> {
        Self::new(vec![vec![1; k]; k])
    }

    /// `A = [[1, 1], [1, 0]]`: no two consecutive 1s.
    pub fn golden_mean() -> Self {
        Self::new(vec![vec![1, 1], vec![1, 0]]).expect("golden mean matrix is valid")
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    /// Period of the transition graph (1 for aperiodic); 0 when reducible.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn allows(&self, a: u8, b: u8) -> bool {
        self.adjacency[a as usize][b as usize] == 1
    }

    pub fn is_admissible(&self, word: &[u8]) -> bool {
        word.iter().all(|&s| (s as usize) < self.k) && word.windows(2).all(|p| self.allows(p[0], p[1]))
    }

    /// All admissible words of the given length in lexicographic order.
    pub fn admissible_words(&self, len: usize) -> Vec<Vec<u8>> {
        if len == 0 {
            return vec![Vec::new()];
        }
        let mut words: Vec<Vec<u8>> = (0..self.k as u8).map(|s| vec![s]).collect();
        for _ in 1..len {
            let mut next = Vec::with_capacity(words.len() * 2);
            for w in &words {
                let last = *w.last().expect("words are non-empty");
                for s in 0..self.k as u8 {
                    if self.allows(last, s) {
                        let mut e = w.clone();
                        e.push(s);
                        next.push(e);
                    }
                }
            }
            words = next;
        }
        words
    }
}

/// Strong connectivity and period of the transition graph.
fn connectivity(adj: &[Vec<u8>]) -> (bool, usize) {
    let k = adj.len();
    let reach = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; k];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let edge = if forward { adj[i][j] } else { adj[j][i] };
                if edge == 1 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    if !(reach(true).iter().all(|&s| s) && reach(false).iter().all(|&s| s)) {
        return (false, 0);
    }
    let mut level = vec![usize::MAX; k];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for j in 0..k {
            if adj[i][j] == 1 && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let mut g = 0usize;
    for i in 0..k {
        for j in 0..k {
            if adj[i][j] == 1 {
                let diff = (level[i] + 1).abs_diff(level[j]);
                g = gcd(g, diff);
            }
        }
    }
    (true, g.max(1))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A potential depending on the first `depth` symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderPotential {
    depth: usize,
    values: HashMap<Vec<u8>, f64>,
    declared_modulus: Option<Modulus>,
    decay_rate: f64,
}

impl CylinderPotential {
    /// Checks that `values` is defined exactly on the admissible words of length `depth`.
    pub fn new(sft: &Sft, depth: usize, values: HashMap<Vec<u8>, f64>) -> Result<Self> {
        if depth < 2 {
            return Err(Error::invalid(format!("potential depth must be at least 2, got {depth}")));
        }
        let words = sft.admissible_words(depth - 1);
        if words.len() > MAX_STATES {
            return Err(Error::invalid(format!("{} states exceed the limit {MAX_STATES}", words.len())));
        }
        for (w, v) in &values {
            if w.len() != depth || !sft.is_admissible(w) {
                return Err(Error::invalid(format!("potential value given for inadmissible word {}", word_string(w))));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("potential value for {} is not finite", word_string(w))));
            }
        }
        let expected = sft.admissible_words(depth).len();
        if values.len() != expected {
            return Err(Error::invalid(format!("potential defines {} of {expected} admissible words", values.len())));
        }
        Ok(CylinderPotential { depth, values, declared_modulus: None, decay_rate: 0.5 })
    }

    pub fn from_fn(sft: &Sft, depth: usize, f: impl Fn(&[u8]) -> f64) -> Result<Self> {
        if depth < 2 {
            return Err(Error::invalid(format!("potential depth must be at least 2, got {depth}")));
        }
        let values = sft.admissible_words(depth).into_iter().map(|w| {
            let v = f(&w);
            (w, v)
        });
        Self::new(sft, depth, values.collect())
    }

    pub fn zero(sft: &Sft, depth: usize) -> Result<Self> {
        Self::constant(sft, depth, 0.0)
    }

    pub fn constant(sft: &Sft, depth: usize, c: f64) -> Result<Self> {
        Self::from_fn(sft, depth, |_| c)
    }

    /// `φ(w) = weights[w₀]`.
    pub fn first_symbol(sft: &Sft, depth: usize, weights: &[f64]) -> Result<Self> {
        if weights.len() != sft.alphabet_size() {
            return Err(Error::invalid("need one weight per symbol"));
        }
        Self::from_fn(sft, depth, |w| weights[w[0] as usize])
    }

    /// Bernoulli(p) potential on the full 2-shift: `φ = log p` on `[0]`,
    /// `log(1 − p)` on `[1]`.
    pub fn bernoulli(depth: usize, p: f64) -> Result<(Sft, Self)> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain { what: "p", value: p, lo: 0.0, hi: 1.0 });
        }
        let sft = Sft::full(2)?;
        let pot = Self::first_symbol(&sft, depth, &[p.ln(), (1.0 - p).ln()])?;
        Ok((sft, pot))
    }

    /// `φ(w) = Σ_{i<m} (ω(λⁱ) − ω(λ^{i+1})) g(wᵢ)`, whose variations satisfy
    /// `var_j ≤ osc(g) ω(λʲ)`.
    pub fn from_modulus(sft: &Sft, depth: usize, modulus: &Modulus, lambda: f64, symbol_values: &[f64]) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Domain { what: "lambda", value: lambda, lo: 0.0, hi: 1.0 });
        }
        if symbol_values.len() != sft.alphabet_size() {
            return Err(Error::invalid("need one value per symbol"));
        }
        let weights: Vec<f64> =
            (0..depth).map(|i| modulus.value(lambda.powi(i as i32)) - modulus.value(lambda.powi(i as i32 + 1))).collect();
        let pot = Self::from_fn(sft, depth, |w| w.iter().zip(&weights).map(|(&s, c)| c * symbol_values[s as usize]).sum())?;
        Ok(pot.with_modulus(modulus.clone(), lambda))
    }

    pub fn with_modulus(mut self, modulus: Modulus, decay_rate: f64) -> Self {
        self.declared_modulus = Some(modulus);
        self.decay_rate = decay_rate;
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn declared_modulus(&self) -> Option<&Modulus> {
        self.declared_modulus.as_ref()
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    pub fn value(&self, word: &[u8]) -> Option<f64> {
        self.values.get(word).copied()
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.values.values_mut() {
            *v += c;
        }
        out
    }

    /// Values in lexicographic word order.
    pub fn sorted_values(&self) -> Vec<(Vec<u8>, f64)> {
        let mut v: Vec<(Vec<u8>, f64)> = self.values.iter().map(|(w, x)| (w.clone(), *x)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// `C · ω̃_λ(λ^m)` bounding `Σ_{j≥m} var_j` for the infinite-range
    /// potential this one truncates, with `C` the fitted variation constant.
    pub fn truncation_error_bound(&self) -> Result<Option<f64>> {
        let Some(m) = &self.declared_modulus else { return Ok(None) };
        let profile = variation_profile(self);
        if profile.constant == 0.0 {
            return Ok(Some(0.0));
        }
        let tail = m.tilde_series(self.decay_rate, self.decay_rate.powi(self.depth as i32), 1e-12)?;
        Ok(Some(profile.constant * tail))
    }
}

pub(crate) fn word_string(w: &[u8]) -> String {
    if w.iter().all(|&s| s < 10) {
        w.iter().map(|s| char::from(b'0' + s)).collect()
    } else {
        w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(".")
    }
}

pub(crate) fn parse_word(s: &str) -> Result<Vec<u8>> {
    let parts: Vec<&str> = if s.contains('.') { s.split('.').collect() } else { s.split("").filter(|p| !p.is_empty()).collect() };
    parts
        .iter()
        .map(|p| p.parse::<u8>().map_err(|_| Error::invalid(format!("bad symbol `{p}` in word `{s}`"))))
        .collect()
}

/// JSON form `{alphabet_size, adjacency, depth, values}` with `values` a map
/// from word strings (`"0110"`, or dot-separated for symbols ≥ 10) to reals.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftModel {
    pub alphabet_size: usize,
    pub adjacency: Vec<Vec<u8>>,
    pub depth: usize,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<Modulus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
}

impl ShiftModel {
    pub fn build(&self) -> Result<(Sft, CylinderPotential)> {
        if self.adjacency.len() != self.alphabet_size {
            return Err(Error::invalid("adjacency size does not match alphabet_size"));
        }
        let sft = Sft::new(self.adjacency.clone())?;
        let values = self.values.iter().map(|(k, v)| Ok((parse_word(k)?, *v))).collect::<Result<HashMap<_, _>>>()?;
        let mut pot = CylinderPotential::new(&sft, self.depth, values)?;
        if let Some(m) = &self.modulus {
            pot = pot.with_modulus(m.clone(), self.decay_rate.unwrap_or(0.5));
        }
        Ok((sft, pot))
    }

    pub fn from_parts(sft: &Sft, pot: &CylinderPotential) -> Self {
        ShiftModel {
            alphabet_size: sft.alphabet_size(),
            adjacency: sft.adjacency().to_vec(),
            depth: pot.depth,
            values: pot.values.iter().map(|(w, v)| (word_string(w), *v)).collect(),
            modulus: pot.declared_modulus.clone(),
            decay_rate: pot.declared_modulus.as_ref().map(|_| pot.decay_rate),
        }
    }
}

/// The transfer operator as a sparse matrix over admissible words of length `m − 1`.
#[derive(Clone, Debug)]
pub struct TransferOperator {
    states: Vec<Vec<u8>>,
    /// For each state `w`: `(index of trunc(aw), e^{φ(aw)})` over admissible `aw`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransferOperator {
    pub fn new(sft: &Sft, pot: &CylinderPotential) -> Result<Self> {
        let m = pot.depth;
        let states = sft.admissible_words(m - 1);
        let index: HashMap<&[u8], usize> = states.iter().enumerate().map(|(i, w)| (w.as_slice(), i)).collect();
        let mut rows = Vec::with_capacity(states.len());
        for w in &states {
            let mut row = Vec::new();
            for a in 0..sft.alphabet_size() as u8 {
                if !sft.allows(a, w[0]) {
                    continue;
                }
                let mut aw = Vec::with_capacity(m);
                aw.push(a);
                aw.extend_from_slice(w);
                let phi = pot.value(&aw).ok_or_else(|| Error::invalid(format!("potential misses word {}", word_string(&aw))))?;
                let target = index[&aw[..m - 1]];
                row.push((target, phi.exp()));
            }
            rows.push(row);
        }
        Ok(TransferOperator { states, rows })
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `(Lv)(w) = Σ_a e^{φ(aw)} v(trunc(aw))`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.states.len() {
            return Err(Error::invalid(format!("vector has {} entries, operator has {} states", v.len(), self.states.len())));
        }
        Ok(self.rows.iter().map(|row| row.iter().map(|&(j, w)| w * v[j]).sum()).collect())
    }

    /// `(L*ν)(u) = Σ_w ν(w) L(w, u)`.
    pub fn apply_adjoint(&self, nu: &[f64]) -> Result<Vec<f64>> {
        if nu.len() != self.states.len() {
            return Err(Error::invalid(format!("vector has {} entries, operator has {} states", nu.len(), self.states.len())));
        }
        let mut out = vec![0.0; nu.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[j] += w * nu[i];
            }
        }
        Ok(out)
    }

    fn max_row_sum(&self) -> f64 {
        self.rows.iter().map(|r| r.iter().map(|e| e.1).sum::<f64>()).fold(0.0, f64::max)
    }
}

pub fn transfer_apply(sft: &Sft, pot: &CylinderPotential, v: &[f64]) -> Result<Vec<f64>> {
    TransferOperator::new(sft, pot)?.apply(v)
}

/// Leading eigen-data of the transfer operator.
#[derive(Clone, Debug, Serialize)]
pub struct RpfData {
    pub eigenvalue: f64,
    pub pressure: f64,
    /// Words of length `m − 1` indexing the vectors below.
    pub states: Vec<String>,
    pub eigenfunction: Vec<f64>,
    pub eigenmeasure: Vec<f64>,
    pub gibbs: Vec<f64>,
    pub iterations: usize,
    /// `max(‖Lh − λh‖∞ / ‖h‖∞, ‖L*ν − λν‖₁)`.
    pub residual: f64,
}

/// Power iteration for `L` and `L*` from the all-ones vector. Periodic
/// transition graphs are handled by iterating `L + sI`, which has the same
/// eigenvectors and a simple dominant eigenvalue.
pub fn rpf_solve(sft: &Sft, pot: &CylinderPotential, tol: f64) -> Result<RpfData> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if !sft.is_irreducible() {
        return Err(Error::Precondition("the subshift is reducible".into()));
    }
    let op = TransferOperator::new(sft, pot)?;
    let shift = if sft.period() > 1 { op.max_row_sum() } else { 0.0 };
    let n = op.len();
    let (h, lambda_h, it_h) = power_iteration(n, |v| op.apply(v), shift, tol, |v| v.iter().fold(0.0, |m: f64, x| m.max(x.abs())))?;
    let (nu, lambda_nu, it_nu) = power_iteration(n, |v| op.apply_adjoint(v), shift, tol, |v| v.iter().map(|x| x.abs()).sum())?;
    let lambda = 0.5 * (lambda_h + lambda_nu);
    let total: f64 = nu.iter().sum();
    let nu: Vec<f64> = nu.iter().map(|x| x / total).collect();
    let pairing: f64 = h.iter().zip(&nu).map(|(a, b)| a * b).sum();
    let h: Vec<f64> = h.iter().map(|x| x / pairing).collect();
    if h.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NotConverged { what: "transfer operator eigenfunction positivity", iterations: it_h, residual: f64::NAN });
    }
    let gibbs: Vec<f64> = h.iter().zip(&nu).map(|(a, b)| a * b).collect();
    let lh = op.apply(&h)?;
    let hmax = h.iter().fold(0.0f64, |m, x| m.max(*x));
    let res_h = lh.iter().zip(&h).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max) / hmax;
    let lnu = op.apply_adjoint(&nu)?;
    let res_nu: f64 = lnu.iter().zip(&nu).map(|(a, b)| (a - lambda * b).abs()).sum();
    Ok(RpfData {
        eigenvalue: lambda,
        pressure: lambda.ln(),
        states: op.states.iter().map(|w| word_string(w)).collect(),
        eigenfunction: h,
        eigenmeasure: nu,
        gibbs,
        iterations: it_h.max(it_nu),
        residual: res_h.max(res_nu),
    })
}

fn power_iteration(
    n: usize,
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    shift: f64,
    tol: f64,
    norm: impl Fn(&[f64]) -> f64,
) -> Result<(Vec<f64>, f64, usize)> {
    let mut v = vec![1.0; n];
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let mut w = apply(&v)?;
        if shift != 0.0 {
            w.iter_mut().zip(&v).for_each(|(a, b)| *a += shift * b);
        }
        let nw = norm(&w);
        if !(nw > 0.0 && nw.is_finite()) {
            return Err(Error::NotConverged { what: "power iteration", iterations: it, residual: nw });
        }
        let rayleigh = nw - shift;
        w.iter_mut().for_each(|x| *x /= nw);
        residual = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if (rayleigh - prev).abs() < tol * rayleigh.abs().max(1.0) && residual < tol {
            return Ok((v, rayleigh, it));
        }
        prev = rayleigh;
    }
    Err(Error::NotConverged { what: "power iteration", iterations: MAX_ITERATIONS, residual })
}

pub fn pressure_of(sft: &Sft, pot: &CylinderPotential) -> Result<f64> {
    Ok(rpf_solve(sft, pot, 1e-13)?.pressure)
}

/// `μ([u])` for an admissible word of length `n ≥ m − 1`:
/// `h(u[..m−1]) λ^{−(n−m+1)} exp(Σ_{i≤n−m} φ(u[i..i+m])) ν(u[n−m+1..])`.
/// Shorter words are summed over their extensions; inadmissible words have mass 0.
pub fn cylinder_mass(sft: &Sft, pot: &CylinderPotential, data: &RpfData, word: &[u8]) -> Result<f64> {
    let m = pot.depth;
    if !sft.is_admissible(word) {
        return Ok(0.0);
    }
    let index: HashMap<&str, usize> = data.states.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    cylinder_mass_indexed(pot, data, &index, word, m)
}

fn cylinder_mass_indexed(
    pot: &CylinderPotential,
    data: &RpfData,
    index: &HashMap<&str, usize>,
    word: &[u8],
    m: usize,
) -> Result<f64> {
    let lookup = |w: &[u8]| -> Result<usize> {
        index.get(word_string(w).as_str()).copied().ok_or_else(|| Error::invalid(format!("unknown state {}", word_string(w))))
    };
    if word.len() < m - 1 {
        let mut total = 0.0;
        for (i, s) in data.states.iter().enumerate() {
            if parse_word(s)?.starts_with(word) {
                total += data.gibbs[i];
            }
        }
        return Ok(total);
    }
    let n = word.len();
    let mut sum = 0.0;
    for i in 0..(n + 1).saturating_sub(m) {
        sum += pot.value(&word[i..i + m]).ok_or_else(|| Error::invalid("word outside potential support"))?;
    }
    let steps = (n + 1 - m) as i32;
    let head = lookup(&word[..m - 1])?;
    let tail = lookup(&word[n - (m - 1)..])?;
    Ok(data.eigenfunction[head] * data.eigenvalue.powi(-steps) * sum.exp() * data.eigenmeasure[tail])
}

/// `h(μ) + ∫φ dμ − log λ`, with the entropy from depth-`m` conditionals.
pub fn entropy_check(sft: &Sft, pot: &CylinderPotential, data: &RpfData) -> Result<EntropyCheck> {
    let m = pot.depth;
    let index: HashMap<&str, usize> = data.states.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut h_m = 0.0;
    let mut integral = 0.0;
    for w in sft.admissible_words(m) {
        let mu = cylinder_mass_indexed(pot, data, &index, &w, m)?;
        if mu > 0.0 {
            h_m -= mu * mu.ln();
        }
        integral += mu * pot.value(&w).unwrap_or(0.0);
    }
    let h_m1: f64 = data.gibbs.iter().filter(|&&g| g > 0.0).map(|g| -g * g.ln()).sum();
    let entropy = h_m - h_m1;
    Ok(EntropyCheck { entropy, integral, pressure: data.pressure, residual: entropy + integral - data.pressure })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EntropyCheck {
    pub entropy: f64,
    pub integral: f64,
    pub pressure: f64,
    pub residual: f64,
}

/// `max_k |μ([u]) − Σ_a μ([a u])|` over admissible `u` of length `m − 1`.
pub fn stationarity_residual(sft: &Sft, pot: &CylinderPotential, data: &RpfData) -> Result<f64> {
    let m = pot.depth;
    let index: HashMap<&str, usize> = data.states.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut worst: f64 = 0.0;
    for u in sft.admissible_words(m - 1) {
        let own = cylinder_mass_indexed(pot, data, &index, &u, m)?;
        let mut pre = 0.0;
        for a in 0..sft.alphabet_size() as u8 {
            if sft.allows(a, u[0]) {
                let mut au = vec![a];
                au.extend_from_slice(&u);
                pre += cylinder_mass_indexed(pot, data, &index, &au, m)?;
            }
        }
        worst = worst.max((own - pre).abs());
    }
    Ok(worst)
}

/// Bounds `b_n ≤ μ([u]) / exp(−P (n−m+1) + S φ(u)) ≤ B_n` over admissible
/// words of length `n`, for `n = m − 1, …, n_max`.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsBounds {
    pub rows: Vec<GibbsRow>,
    pub b: f64,
    pub big_b: f64,
    /// `max(max_n B_n / min_n B_n, max_n b_n / min_n b_n)`: 1 when the bounds
    /// do not depend on `n`.
    pub spread: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GibbsRow {
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
}

pub fn gibbs_bounds(sft: &Sft, pot: &CylinderPotential, data: &RpfData, n_max: usize) -> Result<GibbsBounds> {
    let m = pot.depth;
    if n_max < m - 1 {
        return Err(Error::invalid(format!("n_max must be at least m − 1 = {}", m - 1)));
    }
    let index: HashMap<&str, usize> = data.states.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut rows = Vec::new();
    for n in m - 1..=n_max {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for w in sft.admissible_words(n) {
            let mu = cylinder_mass_indexed(pot, data, &index, &w, m)?;
            let s: f64 = if n >= m { (0..=n - m).map(|i| pot.value(&w[i..i + m]).unwrap_or(0.0)).sum() } else { 0.0 };
            let steps = (n + 1 - m) as f64;
            let ratio = mu / (-data.pressure * steps + s).exp();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        rows.push(GibbsRow { n, lower: lo, upper: hi });
    }
    let fold = |f: fn(&GibbsRow) -> f64| {
        let vals: Vec<f64> = rows.iter().map(f).collect();
        let max = vals.iter().fold(0.0f64, |a, &b| a.max(b));
        let min = vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        (min, max)
    };
    let (b_min, b_max) = fold(|r| r.lower);
    let (bb_min, bb_max) = fold(|r| r.upper);
    Ok(GibbsBounds { b: b_min, big_b: bb_max, spread: (bb_max / bb_min).max(b_max / b_min), rows })
}

/// `var_j` for `j = 1 … m−1` and the smallest `C` with `var_j ≤ C ω(λʲ)`.
#[derive(Clone, Debug, Serialize)]
pub struct VariationProfile {
    pub variations: Vec<(usize, f64)>,
    pub constant: f64,
}

pub fn variation_profile(pot: &CylinderPotential) -> VariationProfile {
    let m = pot.depth;
    let mut variations = Vec::with_capacity(m - 1);
    for j in 1..m {
        let mut groups: HashMap<&[u8], (f64, f64)> = HashMap::new();
        for (w, &v) in &pot.values {
            let e = groups.entry(&w[..j]).or_insert((f64::INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.min(v);
            e.1 = e.1.max(v);
        }
        let var = groups.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
        variations.push((j, var));
    }
    let constant = match &pot.declared_modulus {
        Some(m) => variations
            .iter()
            .map(|&(j, var)| {
                let w = m.value(pot.decay_rate.powi(j as i32));
                if var == 0.0 {
                    0.0
                } else if w > 0.0 {
                    var / w
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max),
        None => 0.0,
    };
    VariationProfile { variations, constant }
}
