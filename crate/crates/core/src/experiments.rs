//! Named experiments driven by JSON configs, writing a manifest, a summary
//! and CSV tables per run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::grassmann::{
    compute_splitting, stable_leaf_point, verify_lemma1, verify_lemma2, verify_lemma3, verify_lemma4, verify_lemma5,
    verify_main_inequality,
};
use crate::horseshoe::{build_g, dini_violation_certificate, lambda_measure, HorseshoeParams};
use crate::modulus::Modulus;
use crate::pressure::{attractor_criterion, grid_candidates, jittered_grid, pressure_estimate, volume_profile, AttractorConfig, OrbitPotential};
use crate::report::{num, write_json, Table};
use crate::shift::{
    entropy_check, gibbs_bounds, rpf_solve, stationarity_residual, variation_profile, CylinderPotential, Sft, ShiftModel,
};
use crate::srb::{basin_experiment, gibbs_vs_birkhoff, CylinderObservable, MarkovCoding, Observable};
use crate::systems::{BakerMap, LinearTorusMap, Point, SmoothSystem, SystemDescriptor};

pub const OUTPUT_DIR_ENV: &str = "HYPDYN_OUTPUT_DIR";

/// A run request. Unknown keys are rejected; the manifest written by a run
/// is itself a valid config that reproduces the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDescriptor>,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Run on a single thread with fixed summation order.
    #[serde(default)]
    pub deterministic: bool,
    /// Library version that wrote a manifest; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        ExperimentConfig {
            experiment: experiment.into(),
            system: None,
            parameters: Map::new(),
            seed: 0,
            output_dir: None,
            deterministic: false,
            version: None,
        }
    }

    pub fn with_system(mut self, system: SystemDescriptor) -> Self {
        self.system = Some(system);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.into(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = Some(dir.into());
        self
    }

    pub fn deterministic(mut self, on: bool) -> Self {
        self.deterministic = on;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    /// The fully resolved config, as written to `manifest.json`.
    pub manifest: ExperimentConfig,
    pub summary: Value,
    pub tables: Vec<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub wall_time: f64,
}

/// Catalog entry of a named experiment.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// The mathematical statement the experiment probes.
    pub exercises: &'static str,
    pub default_system: Option<&'static str>,
    pub required: &'static [&'static str],
    pub parameters: &'static [&'static str],
}

const CATALOG: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "modulus-audit",
        description: "Dini test, ω̃ transforms and equivalence constants of a modulus of continuity",
        exercises: "Dini summability ∫₀¹ ω(t)/t dt < ∞ and the equivalence of ω̃ with the series Σ ω(cⁱt)",
        default_system: None,
        required: &[],
        parameters: &["modulus", "tol", "cs", "grid_points"],
    },
    ExperimentInfo {
        name: "splitting",
        description: "Hyperbolic splitting E^u ⊕ E^s at a point by iterating the graph transform",
        exercises: "the invariant splitting is the limit of pushed-forward subspaces at an exponential rate",
        default_system: Some("cat-map"),
        required: &[],
        parameters: &["x1", "x2", "n_iter", "tol"],
    },
    ExperimentInfo {
        name: "lemma-verify",
        description: "Randomized check of one of the five Grassmannian lemmas",
        exercises: "graph-map contraction, eigenline stability, cone aperture growth, unstable-Jacobian cocycle, and the modulus of x ↦ E^u_x",
        default_system: Some("cat-map"),
        required: &["lemma"],
        parameters: &["lemma", "samples", "eps_max", "eps_list", "radius"],
    },
    ExperimentInfo {
        name: "main-inequality",
        description: "Fit of the constants in the Hölder-type bound for the unstable distribution along stable leaves",
        exercises: "d(E^u_{fⁿx}, E^u_{fⁿy}) ≤ M₁(δλ)^{2n} d(E^u_x, E^u_y) + M₂ ω(M₃ λⁿ d(x, y))",
        default_system: Some("cat-map"),
        required: &[],
        parameters: &["x1", "x2", "n_max", "leaf_samples", "leaf_radius"],
    },
    ExperimentInfo {
        name: "rpf",
        description: "Leading eigen-data of the transfer operator of a finite-range potential on a subshift of finite type",
        exercises: "Ruelle–Perron–Frobenius: P = log λ, Gibbs measure h·ν with cylinder bounds exp(−Pn + S_nφ), variational principle",
        default_system: Some("full-2-shift"),
        required: &[],
        parameters: &["model", "potential", "depth", "p", "weights", "tol", "gibbs_n_max"],
    },
    ExperimentInfo {
        name: "pressure",
        description: "Topological pressure from greedy (n, ε)-separated sets of a candidate grid",
        exercises: "P(φ) = lim_ε limsup_n (1/n) log sup_E Σ_{x∈E} e^{S_nφ(x)}",
        default_system: Some("cat-map"),
        required: &[],
        parameters: &["potential", "constant", "eps_list", "n_list", "grid", "jitter"],
    },
    ExperimentInfo {
        name: "attractor-criterion",
        description: "Pressure of the geometric potential φ^u and the attractor verdict |P(φ^u)| < threshold",
        exercises: "a basic hyperbolic set is an attractor if and only if P(φ^u) = 0",
        default_system: Some("cat-map"),
        required: &[],
        parameters: &["eps_list", "n_list", "grid", "jitter", "threshold", "shift"],
    },
    ExperimentInfo {
        name: "volume-lemma",
        description: "Monte-Carlo Bowen-ball volumes against the unstable Jacobian",
        exercises: "C⁻¹/J^u fⁿ(x) ≤ vol(B_n(x, ε)) ≤ C/J^u fⁿ(x)",
        default_system: Some("cat-map"),
        required: &[],
        parameters: &["x1", "x2", "n_list", "eps", "samples"],
    },
    ExperimentInfo {
        name: "basin",
        description: "Birkhoff averages from Lebesgue-random initial points",
        exercises: "the equilibrium state of φ^u is physical: time averages converge to ∫g dμ on a set of positive volume",
        default_system: Some("cat-map"),
        required: &[],
        parameters: &["observable", "n_points", "n_iters", "tolerance"],
    },
    ExperimentInfo {
        name: "gibbs-vs-birkhoff",
        description: "Gibbs integral of a cylinder observable against time averages on the coded system",
        exercises: "the equilibrium measure pushed forward by the coding is the measure seen by typical orbits",
        default_system: Some("baker"),
        required: &[],
        parameters: &["symbol", "n_points", "n_iters"],
    },
    ExperimentInfo {
        name: "horseshoe-build",
        description: "Cantor trees K_I, K_J, the interval map g and the measure of Λ = K_J × K_J",
        exercises: "a C¹ horseshoe whose invariant Cantor set has Lebesgue measure (2 − Σβₙ)² > 0",
        default_system: None,
        required: &[],
        parameters: &["offset", "depth", "dump_level", "samples"],
    },
    ExperimentInfo {
        name: "dini-certificate",
        description: "Certificate that the modulus of g′ fails the Dini condition",
        exercises: "δₙ ≤ ω(2⁻ⁿ) with Σ δₙ = +∞",
        default_system: None,
        required: &[],
        parameters: &["offset", "depth"],
    },
];

pub fn list_experiments() -> &'static [ExperimentInfo] {
    CATALOG
}

fn info(name: &str) -> Result<&'static ExperimentInfo> {
    CATALOG.iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownExperiment(name.into()))
}

/// Typed access to experiment parameters that records the resolved value of
/// every key, defaults included.
struct Params {
    given: Map<String, Value>,
    resolved: Map<String, Value>,
    allowed: &'static [&'static str],
}

impl Params {
    fn new(given: &Map<String, Value>, info: &ExperimentInfo) -> Result<Self> {
        if let Some(k) = given.keys().find(|k| !info.parameters.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "unknown parameter `{k}` for experiment `{}` (expected one of: {})",
                info.name,
                info.parameters.join(", ")
            )));
        }
        for r in info.required {
            if !given.contains_key(*r) {
                return Err(Error::Config(format!("experiment `{}` needs parameter `{r}`", info.name)));
            }
        }
        Ok(Params { given: given.clone(), resolved: Map::new(), allowed: info.parameters })
    }

    fn get<T: DeserializeOwned + Serialize>(&mut self, key: &str, default: T) -> Result<T> {
        debug_assert!(self.allowed.contains(&key), "undeclared parameter {key}");
        let value = match self.given.get(key) {
            Some(v) => serde_json::from_value(normalize(v))
                .map_err(|e| Error::Config(format!("parameter `{key}`: {e} (got {v})")))?,
            None => default,
        };
        self.resolved.insert(key.into(), serde_json::to_value(&value)?);
        Ok(value)
    }

    fn opt<T: DeserializeOwned + Serialize>(&mut self, key: &str) -> Result<Option<T>> {
        match self.given.get(key) {
            Some(_) => Ok(Some(self.get(key, None::<T>)?.expect("present"))),
            None => Ok(None),
        }
    }
}

/// Accepts integral floats such as `1e5` where integers are expected.
fn normalize(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let f = n.as_f64().expect("f64 number");
            if f.fract() == 0.0 && f.abs() < 9.0e15 {
                if f >= 0.0 {
                    json!(f as u64)
                } else {
                    json!(f as i64)
                }
            } else {
                v.clone()
            }
        }
        Value::Array(a) => Value::Array(a.iter().map(normalize).collect()),
        _ => v.clone(),
    }
}

/// Result of one experiment before it is written out.
struct Outcome {
    summary: Value,
    tables: Vec<Table>,
}

type Runner = fn(&mut Params, Option<&SystemDescriptor>, u64) -> Result<Prepared>;

/// A validated experiment ready to execute.
struct Prepared {
    system: Option<SystemDescriptor>,
    exec: Box<dyn FnOnce() -> Result<Outcome> + Send>,
}

fn runner(name: &str) -> Result<Runner> {
    Ok(match name {
        "modulus-audit" => prep_modulus_audit,
        "splitting" => prep_splitting,
        "lemma-verify" => prep_lemma,
        "main-inequality" => prep_main_inequality,
        "rpf" => prep_rpf,
        "pressure" => prep_pressure,
        "attractor-criterion" => prep_attractor,
        "volume-lemma" => prep_volume,
        "basin" => prep_basin,
        "gibbs-vs-birkhoff" => prep_gibbs_vs_birkhoff,
        "horseshoe-build" => prep_horseshoe,
        "dini-certificate" => prep_dini_certificate,
        other => return Err(Error::UnknownExperiment(other.into())),
    })
}

/// Validates the config, runs the experiment and, when an output directory
/// is configured, writes `manifest.json`, `summary.json` and the CSV tables.
/// Nothing is written when validation fails.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let meta = info(&config.experiment)?;
    let mut params = Params::new(&config.parameters, meta)?;
    let prepared = runner(meta.name)?(&mut params, config.system.as_ref(), config.seed)?;
    let manifest = ExperimentConfig {
        experiment: meta.name.into(),
        system: prepared.system.clone(),
        parameters: params.resolved,
        seed: config.seed,
        output_dir: None,
        deterministic: config.deterministic,
        version: Some(env!("CARGO_PKG_VERSION").into()),
    };
    let outcome = if config.deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a single-thread pool: {e}")))?;
        pool.install(prepared.exec)?
    } else {
        (prepared.exec)()?
    };
    let mut tables = Vec::new();
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("manifest.json"), &manifest)?;
        write_json(&dir.join("summary.json"), &outcome.summary)?;
        for t in &outcome.tables {
            let path = dir.join(format!("{}.csv", t.name));
            t.write(&path)?;
            tables.push(path);
        }
    }
    Ok(ExperimentReport {
        manifest,
        summary: outcome.summary,
        tables,
        output_dir: config.output_dir.clone(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn system_or(given: Option<&SystemDescriptor>, default: &str) -> Result<(SystemDescriptor, Box<dyn SmoothSystem>)> {
    let d = given.cloned().unwrap_or_else(|| SystemDescriptor::named(default));
    let s = d.build()?;
    Ok((s.descriptor(), s))
}

fn no_system(given: Option<&SystemDescriptor>, experiment: &str) -> Result<()> {
    match given {
        Some(d) => Err(Error::Config(format!("experiment `{experiment}` takes no system (got `{}`)", d.name))),
        None => Ok(()),
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn prep_modulus_audit(p: &mut Params, system: Option<&SystemDescriptor>, _seed: u64) -> Result<Prepared> {
    no_system(system, "modulus-audit")?;
    let modulus: Modulus = p.get("modulus", Modulus::power(0.5)?)?;
    let tol: f64 = p.get("tol", 1e-10)?;
    let cs: Vec<f64> = p.get("cs", vec![0.3, 0.5, 0.9])?;
    let grid_points: usize = p.get("grid_points", 25)?;
    if grid_points < 2 {
        return Err(Error::Config("grid_points must be at least 2".into()));
    }
    let exec = move || {
        let dini = modulus.dini_test_with(tol, &cs)?;
        let t_max = modulus.t_max().min(1.0);
        let grid: Vec<f64> = (0..grid_points).map(|i| t_max * 1e-8f64.powf(i as f64 / (grid_points - 1) as f64)).collect();
        let mut equivalence = Vec::new();
        if dini.summable {
            for &c in &cs {
                equivalence.push(json!({"c": c, "constant": modulus.equivalence_check(c, &grid)?}));
            }
        }
        let mut table = Table::new("modulus", &["t", "omega", "tilde_integral", "tilde_series_c0.5"]);
        for &t in &grid {
            let (ti, ts) = if dini.summable {
                (num(modulus.tilde_integral(t)?), num(modulus.tilde_series(0.5, t, tol)?))
            } else {
                (String::new(), String::new())
            };
            table.push(vec![num(t), num(modulus.eval(t)?), ti, ts]);
        }
        Ok(Outcome { summary: json!({"modulus": modulus, "dini": dini, "equivalence": equivalence}), tables: vec![table] })
    };
    Ok(Prepared { system: None, exec: Box::new(exec) })
}

fn prep_splitting(p: &mut Params, system: Option<&SystemDescriptor>, _seed: u64) -> Result<Prepared> {
    let (desc, s) = system_or(system, "cat-map")?;
    let x = Point::new(p.get("x1", 0.3)?, p.get("x2", 0.7)?);
    let n_iter: usize = p.get("n_iter", 60)?;
    let tol: f64 = p.get("tol", 1e-10)?;
    let exec = move || {
        let sp = compute_splitting(s.as_ref(), x, n_iter, tol)?;
        let mut table = Table::new("history", &["iteration", "residual_u", "residual_s"]);
        for i in 0..sp.history_u.len().max(sp.history_s.len()) {
            let cell = |h: &Vec<f64>| h.get(i).map(|v| num(*v)).unwrap_or_default();
            table.push(vec![(i + 1).to_string(), cell(&sp.history_u), cell(&sp.history_s)]);
        }
        let summary = json!({
            "point": x,
            "unstable": sp.unstable.v().as_slice(),
            "stable": sp.stable.v().as_slice(),
            "residual_u": sp.residual_u,
            "residual_s": sp.residual_s,
            "iterations_u": sp.iterations_u,
            "iterations_s": sp.iterations_s,
            "rate_u": sp.rate_u(),
            "rate_s": sp.rate_s(),
        });
        Ok(Outcome { summary, tables: vec![table] })
    };
    Ok(Prepared { system: Some(desc), exec: Box::new(exec) })
}

fn prep_lemma(p: &mut Params, system: Option<&SystemDescriptor>, seed: u64) -> Result<Prepared> {
    let lemma: u8 = p.get("lemma", 1)?;
    let samples: usize = p.get("samples", 1000)?;
    let (desc, s) = match lemma {
        1 | 4 | 5 => {
            let (d, s) = system_or(system, "cat-map")?;
            (Some(d), Some(s))
        }
        2 => {
            let (d, s) = system_or(system, "cat-map")?;
            if !["cat-map", "linear-torus", "linear-plane"].contains(&d.name.as_str()) {
                return Err(Error::Config("lemma 2 needs a linear system".into()));
            }
            (Some(d), Some(s))
        }
        3 => {
            no_system(system, "lemma-verify 3")?;
            (None, None)
        }
        other => return Err(Error::Config(format!("lemma must be 1 to 5, got {other}"))),
    };
    let eps_max: f64 = if lemma == 2 { p.get("eps_max", 0.1)? } else { 0.0 };
    let eps_list: Vec<f64> = if lemma == 3 { p.get("eps_list", vec![0.01, 0.05, 0.1, 0.2, 0.4])? } else { Vec::new() };
    let radius: f64 = if lemma == 5 { p.get("radius", 1e-3)? } else { 0.0 };
    let system_json = desc.clone();
    let exec = move || {
        let report = match lemma {
            1 => verify_lemma1(s.as_deref().expect("system"), samples, seed)?,
            2 => {
                let d = system_json.as_ref().expect("system");
                let m = match d.name.as_str() {
                    "cat-map" => LinearTorusMap::cat_map().matrix(),
                    _ => {
                        let v: [[f64; 2]; 2] = serde_json::from_value(d.params["matrix"].clone())?;
                        crate::systems::Mat2::new(v[0][0], v[0][1], v[1][0], v[1][1])
                    }
                };
                verify_lemma2(&m, samples, eps_max, seed)?
            }
            3 => verify_lemma3(samples, &eps_list, seed)?,
            4 => verify_lemma4(s.as_deref().expect("system"), samples, seed)?,
            _ => verify_lemma5(s.as_deref().expect("system"), samples, radius, seed)?,
        };
        let mut table = Table::new("constants", &["name", "value"]);
        for (k, v) in &report.fitted_constants {
            table.push(vec![k.clone(), num(*v)]);
        }
        Ok(Outcome { summary: to_value(&report)?, tables: vec![table] })
    };
    Ok(Prepared { system: desc, exec: Box::new(exec) })
}

fn prep_main_inequality(p: &mut Params, system: Option<&SystemDescriptor>, seed: u64) -> Result<Prepared> {
    let (desc, s) = system_or(system, "cat-map")?;
    let x0 = Point::new(p.get("x1", 0.3)?, p.get("x2", 0.7)?);
    let n_max: usize = p.get("n_max", 10)?;
    let leaf_samples: usize = p.get("leaf_samples", 8)?;
    let radius: f64 = p.get("leaf_radius", 1e-3)?;
    let exec = move || {
        let mut rng = crate::rng::stream(seed, 0);
        let leaf = (0..leaf_samples)
            .map(|_| stable_leaf_point(s.as_ref(), x0, crate::rng::symmetric(&mut rng, radius)))
            .collect::<Result<Vec<_>>>()?;
        let rep = verify_main_inequality(s.as_ref(), x0, &leaf, n_max)?;
        let mut table = Table::new("rows", &["sample", "n", "point_distance", "subspace_distance"]);
        for r in &rep.rows {
            table.push(vec![r.sample.to_string(), r.n.to_string(), num(r.point_distance), num(r.subspace_distance)]);
        }
        let summary = json!({
            "lambda": rep.lambda, "delta": rep.delta, "m1": rep.m1, "m2": rep.m2, "m3": rep.m3,
            "rate": rep.rate, "max_violation": rep.max_violation,
        });
        Ok(Outcome { summary, tables: vec![table] })
    };
    Ok(Prepared { system: Some(desc), exec: Box::new(exec) })
}

/// Shift-side "systems": `full-2-shift`, `full-shift {k}`, `golden-mean-shift`,
/// `sft {adjacency}`.
fn shift_from(d: &SystemDescriptor) -> Result<Sft> {
    let allow = |keys: &[&str]| match d.params.keys().find(|k| !keys.contains(&k.as_str())) {
        Some(k) => Err(Error::Config(format!("unknown param `{k}` for `{}`", d.name))),
        None => Ok(()),
    };
    match d.name.as_str() {
        "full-2-shift" => {
            allow(&[])?;
            Sft::full(2)
        }
        "full-shift" => {
            allow(&["k"])?;
            let k = d.params.get("k").and_then(Value::as_u64).ok_or_else(|| Error::Config("full-shift needs integer `k`".into()))?;
            Sft::full(k as usize)
        }
        "golden-mean-shift" => {
            allow(&[])?;
            Ok(Sft::golden_mean())
        }
        "sft" => {
            allow(&["adjacency"])?;
            let a: Vec<Vec<u8>> = serde_json::from_value(d.params.get("adjacency").cloned().unwrap_or(Value::Null))
                .map_err(|e| Error::Config(format!("sft needs an `adjacency` matrix: {e}")))?;
            Sft::new(a)
        }
        other => Err(Error::Config(format!("unknown shift `{other}` (expected full-2-shift, full-shift, golden-mean-shift or sft)"))),
    }
}

fn prep_rpf(p: &mut Params, system: Option<&SystemDescriptor>, _seed: u64) -> Result<Prepared> {
    let tol: f64 = p.get("tol", 1e-13)?;
    let model: Option<ShiftModel> = p.opt("model")?;
    let (desc, sft, pot) = match model {
        Some(m) => {
            no_system(system, "rpf with an explicit model")?;
            let (sft, pot) = m.build()?;
            (None, sft, pot)
        }
        None => {
            let d = system.cloned().unwrap_or_else(|| SystemDescriptor::named("full-2-shift"));
            let sft = shift_from(&d)?;
            let depth: usize = p.get("depth", 3)?;
            let kind: String = p.get("potential", "zero".to_string())?;
            let pot = match kind.as_str() {
                "zero" => CylinderPotential::zero(&sft, depth)?,
                "bernoulli" => {
                    let prob: f64 = p.get("p", 0.5)?;
                    if sft.alphabet_size() != 2 {
                        return Err(Error::Config("the bernoulli potential needs a 2-symbol shift".into()));
                    }
                    if !(prob > 0.0 && prob < 1.0) {
                        return Err(Error::Domain { what: "p", value: prob, lo: 0.0, hi: 1.0 });
                    }
                    CylinderPotential::first_symbol(&sft, depth, &[prob.ln(), (1.0 - prob).ln()])?
                }
                "first-symbol" => {
                    let w: Vec<f64> = p.get("weights", vec![0.0; sft.alphabet_size()])?;
                    CylinderPotential::first_symbol(&sft, depth, &w)?
                }
                other => return Err(Error::Config(format!("unknown potential `{other}` (expected zero, bernoulli or first-symbol)"))),
            };
            (Some(d), sft, pot)
        }
    };
    let gibbs_n_max: usize = p.get("gibbs_n_max", pot.depth() + 5)?;
    let exec = move || {
        let data = rpf_solve(&sft, &pot, tol)?;
        let entropy = entropy_check(&sft, &pot, &data)?;
        let bounds = gibbs_bounds(&sft, &pot, &data, gibbs_n_max)?;
        let stationarity = stationarity_residual(&sft, &pot, &data)?;
        let profile = variation_profile(&pot);
        let mut gibbs = Table::new("gibbs", &["state", "eigenfunction", "eigenmeasure", "gibbs"]);
        for (i, st) in data.states.iter().enumerate() {
            gibbs.push(vec![st.clone(), num(data.eigenfunction[i]), num(data.eigenmeasure[i]), num(data.gibbs[i])]);
        }
        let mut rows = Table::new("gibbs_bounds", &["n", "lower", "upper"]);
        for r in &bounds.rows {
            rows.push(vec![r.n.to_string(), num(r.lower), num(r.upper)]);
        }
        let summary = json!({
            "eigenvalue": data.eigenvalue,
            "pressure": data.pressure,
            "iterations": data.iterations,
            "residual": data.residual,
            "entropy": entropy,
            "gibbs_bounds": {"b": bounds.b, "B": bounds.big_b, "spread": bounds.spread},
            "stationarity_residual": stationarity,
            "variation": profile,
            "model": ShiftModel::from_parts(&sft, &pot),
        });
        Ok(Outcome { summary, tables: vec![gibbs, rows] })
    };
    Ok(Prepared { system: desc, exec: Box::new(exec) })
}

fn candidates(p: &mut Params, seed: u64) -> Result<Vec<Point>> {
    let grid: usize = p.get("grid", 200)?;
    let jitter: bool = p.get("jitter", true)?;
    if grid == 0 || grid > 4000 {
        return Err(Error::Config(format!("grid must be in 1..=4000, got {grid}")));
    }
    Ok(if jitter { jittered_grid(grid, seed) } else { grid_candidates(grid) })
}

fn pressure_table(est: &crate::pressure::PressureEstimate) -> Table {
    let mut t = Table::new("pressure", &["n", "epsilon", "separated", "log_sum", "estimate", "saturated"]);
    for r in &est.rows {
        t.push(vec![r.n.to_string(), num(r.epsilon), r.separated.to_string(), num(r.log_sum), num(r.per_n), r.saturated.to_string()]);
    }
    t
}

fn prep_pressure(p: &mut Params, system: Option<&SystemDescriptor>, seed: u64) -> Result<Prepared> {
    let (desc, s) = system_or(system, "cat-map")?;
    let kind: String = p.get("potential", "zero".to_string())?;
    let pot = match kind.as_str() {
        "zero" => OrbitPotential::zero(),
        "geometric" => OrbitPotential::geometric(),
        "constant" => OrbitPotential::Constant(p.get("constant", 0.0)?),
        other => return Err(Error::Config(format!("unknown potential `{other}` (expected zero, geometric or constant)"))),
    };
    let eps_list: Vec<f64> = p.get("eps_list", vec![0.05])?;
    let n_list: Vec<usize> = p.get("n_list", (1..=6).collect())?;
    let cloud = candidates(p, seed)?;
    let exec = move || {
        let est = pressure_estimate(s.as_ref(), &pot, &eps_list, &n_list, &cloud)?;
        let table = pressure_table(&est);
        let summary = json!({
            "potential": pot.name(),
            "extrapolated": est.extrapolated,
            "spread": est.spread,
            "method": est.method,
            "windowed_average": est.windowed_average,
            "epsilon_used": est.epsilon_used,
            "sample_size": est.sample_size,
            "per_n": est.per_n,
            "warnings": est.warnings,
        });
        Ok(Outcome { summary, tables: vec![table] })
    };
    Ok(Prepared { system: Some(desc), exec: Box::new(exec) })
}

fn prep_attractor(p: &mut Params, system: Option<&SystemDescriptor>, seed: u64) -> Result<Prepared> {
    let (desc, s) = system_or(system, "cat-map")?;
    let defaults = AttractorConfig::default();
    let cfg = AttractorConfig {
        eps_list: p.get("eps_list", vec![0.05])?,
        n_list: p.get("n_list", (1..=6).collect())?,
        threshold: p.get("threshold", defaults.threshold)?,
        shift: p.get("shift", 0.0)?,
    };
    let cloud = candidates(p, seed)?;
    let exec = move || {
        let rep = attractor_criterion(s.as_ref(), &cloud, &cfg)?;
        let table = pressure_table(&rep.estimate);
        let summary = json!({
            "pressure": rep.estimate.extrapolated,
            "threshold": rep.threshold,
            "consistent_with_attractor": rep.consistent_with_attractor,
            "verdict": rep.verdict,
            "method": rep.estimate.method,
            "windowed_average": rep.estimate.windowed_average,
            "warnings": rep.estimate.warnings,
        });
        Ok(Outcome { summary, tables: vec![table] })
    };
    Ok(Prepared { system: Some(desc), exec: Box::new(exec) })
}

fn prep_volume(p: &mut Params, system: Option<&SystemDescriptor>, seed: u64) -> Result<Prepared> {
    let (desc, s) = system_or(system, "cat-map")?;
    let x = Point::new(p.get("x1", 0.3)?, p.get("x2", 0.7)?);
    let n_list: Vec<usize> = p.get("n_list", (2..=8).collect())?;
    let eps: f64 = p.get("eps", 0.1)?;
    let samples: u64 = p.get("samples", 100_000)?;
    let exec = move || {
        let prof = volume_profile(s.as_ref(), x, &n_list, eps, samples, seed)?;
        let mut t = Table::new("volume", &["n", "volume", "stderr", "unstable_jacobian", "product"]);
        for r in &prof.rows {
            t.push(vec![r.n.to_string(), num(r.volume), num(r.stderr), num(r.unstable_jacobian), num(r.product)]);
        }
        Ok(Outcome { summary: json!({"point": x, "eps": eps, "ratio": prof.ratio, "rows": prof.rows}), tables: vec![t] })
    };
    Ok(Prepared { system: Some(desc), exec: Box::new(exec) })
}

fn prep_basin(p: &mut Params, system: Option<&SystemDescriptor>, seed: u64) -> Result<Prepared> {
    let (desc, s) = system_or(system, "cat-map")?;
    let name: String = p.get("observable", "cos_x1".to_string())?;
    let g = Observable::named(&name)?;
    let n_points: usize = p.get("n_points", 100)?;
    let n_iters: usize = p.get("n_iters", 100_000)?;
    let tolerance: Option<f64> = p.opt("tolerance")?;
    let exec = move || {
        let rep = basin_experiment(s.as_ref(), &g, n_points, n_iters, seed, tolerance)?;
        let mut t = Table::new("basin", &["x1", "x2", "time_average"]);
        for b in &rep.per_point {
            t.push(vec![num(b.x.x1()), num(b.x.x2()), num(b.time_average)]);
        }
        let summary = json!({
            "observable": rep.observable,
            "mean": rep.mean,
            "spread": rep.spread,
            "stderr": rep.stderr,
            "reference": rep.reference,
            "tolerance": rep.tolerance,
            "fraction_converged": rep.fraction_converged,
            "n_points": n_points,
            "n_iters": n_iters,
        });
        Ok(Outcome { summary, tables: vec![t] })
    };
    Ok(Prepared { system: Some(desc), exec: Box::new(exec) })
}

fn prep_gibbs_vs_birkhoff(p: &mut Params, system: Option<&SystemDescriptor>, seed: u64) -> Result<Prepared> {
    let d = system.cloned().unwrap_or_else(|| SystemDescriptor::named("baker"));
    if d.name != "baker" {
        return Err(Error::Config(format!("gibbs-vs-birkhoff ships a coding for the baker map only, got `{}`", d.name)));
    }
    let prob = d.params.get("p").and_then(Value::as_f64).unwrap_or(0.5);
    let baker = BakerMap::new(prob)?;
    let symbol: u8 = p.get("symbol", 0)?;
    if symbol > 1 {
        return Err(Error::Config("symbol must be 0 or 1".into()));
    }
    let n_points: usize = p.get("n_points", 20_000)?;
    let n_iters: usize = p.get("n_iters", 40)?;
    let desc = baker.descriptor();
    let exec = move || {
        let (sft, pot) = CylinderPotential::bernoulli(2, prob)?;
        let coding = MarkovCoding::baker(&baker);
        let cmp = gibbs_vs_birkhoff(&baker, &coding, &sft, &pot, &CylinderObservable::indicator(symbol), n_points, n_iters, seed)?;
        let mut t = Table::new("comparison", &["quantity", "value"]);
        t.push(vec!["gibbs_integral".into(), num(cmp.gibbs_integral)]);
        t.push(vec!["birkhoff_mean".into(), num(cmp.birkhoff_mean)]);
        t.push(vec!["birkhoff_stderr".into(), num(cmp.birkhoff_stderr)]);
        Ok(Outcome { summary: to_value(&cmp)?, tables: vec![t] })
    };
    Ok(Prepared { system: Some(desc), exec: Box::new(exec) })
}

fn horseshoe_params(p: &mut Params) -> Result<HorseshoeParams> {
    HorseshoeParams::new(p.get("offset", 10.0)?)
}

fn prep_horseshoe(p: &mut Params, system: Option<&SystemDescriptor>, _seed: u64) -> Result<Prepared> {
    no_system(system, "horseshoe-build")?;
    let params = horseshoe_params(p)?;
    let depth: usize = p.get("depth", 12)?;
    let dump_level: usize = p.get("dump_level", 6)?;
    let samples: usize = p.get("samples", 20_000)?;
    let exec = move || {
        let g = build_g(&params, depth)?;
        let measure = lambda_measure(&params);
        let (a, b) = params.interval_i();
        let mut monotone = true;
        let mut min_derivative = f64::INFINITY;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=samples {
            let x = a + (b - a) * i as f64 / samples.max(1) as f64;
            let y = g.eval(x)?;
            monotone &= y >= prev;
            prev = y;
            min_derivative = min_derivative.min(g.derivative(x)?);
        }
        let mut tables = Vec::new();
        for (name, tree) in [("tree_i", &g.tree_i), ("tree_j", &g.tree_j)] {
            let mut t = Table::new(name, &["word", "left", "right", "gap_left", "gap_right"]);
            for (w, n) in tree.dump(dump_level)? {
                t.push(vec![w, num(n.left), num(n.right), num(n.gap_left), num(n.gap_right)]);
            }
            tables.push(t);
        }
        let summary = json!({
            "params": params,
            "delta_0": params.delta(0),
            "measure": measure,
            "leaf_slope": g.leaf_slope,
            "g_endpoints": [g.eval(a)?, g.eval(b)?],
            "monotone": monotone,
            "min_derivative": min_derivative,
            "k_i_remaining_at_depth": g.tree_i.remaining_length(depth + 1),
        });
        Ok(Outcome { summary, tables })
    };
    Ok(Prepared { system: None, exec: Box::new(exec) })
}

fn prep_dini_certificate(p: &mut Params, system: Option<&SystemDescriptor>, _seed: u64) -> Result<Prepared> {
    no_system(system, "dini-certificate")?;
    let params = horseshoe_params(p)?;
    let depth: usize = p.get("depth", 20)?;
    let exec = move || {
        let g = build_g(&params, depth)?;
        let omega = g.empirical_modulus()?;
        let cert = dini_violation_certificate(&params, depth, &omega)?;
        let mut t = Table::new("certificate", &["n", "delta_n", "omega_bound", "partial_sum"]);
        for r in &cert.rows {
            t.push(vec![r.n.to_string(), num(r.delta_n), num(r.omega_bound), num(r.partial_sum)]);
        }
        let dini = omega.dini_test(1e-10)?;
        let summary = json!({
            "bounded": cert.bounded,
            "omega_sum_dominates": cert.omega_sum_dominates,
            "partial_sums": cert.partial_sums,
            "first_n_above_10": cert.first_n_above_10,
            "log_slope": cert.log_slope,
            "divergent": cert.divergent,
            "empirical_modulus_dini_estimate": dini.integral_estimate,
        });
        Ok(Outcome { summary, tables: vec![t] })
    };
    Ok(Prepared { system: None, exec: Box::new(exec) })
}

/// Key-value pairs `key=value` from the command line; values are parsed as
/// JSON and fall back to plain strings.
pub fn parse_assignments(items: &[String]) -> Result<Map<String, Value>> {
    let mut out = Map::new();
    for item in items {
        let (k, v) = item.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got `{item}`")))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        out.insert(k.trim().to_string(), value);
    }
    Ok(out)
}

/// Names of the experiments with their resolved default parameters.
pub fn default_parameters(name: &str) -> Result<BTreeMap<String, Value>> {
    let meta = info(name)?;
    let mut given = Map::new();
    for r in meta.required {
        if *r == "lemma" {
            given.insert("lemma".into(), json!(1));
        }
    }
    let mut params = Params::new(&given, meta)?;
    runner(name)?(&mut params, None, 0)?;
    Ok(params.resolved.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_metadata() {
        let cat = list_experiments();
        assert!(cat.len() >= 10);
        assert!(cat.iter().any(|e| e.name == "attractor-criterion" && e.exercises.contains("P(φ^u) = 0")));
        assert!(cat.iter().any(|e| e.name == "dini-certificate"));
        for e in cat {
            runner(e.name).unwrap();
        }
    }

    #[test]
    fn unknown_names_and_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let err = run(&ExperimentConfig::new("nope").with_output_dir(&out)).unwrap_err();
        assert!(matches!(err, Error::UnknownExperiment(_)) && err.exit_code() == 2);
        assert!(!out.exists());
        let err = run(&ExperimentConfig::new("rpf").with_param("bogus", 1).with_output_dir(&out)).unwrap_err();
        assert!(err.is_validation());
        assert!(!out.exists());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"rpf","extra":1}"#).is_err());
    }

    #[test]
    fn rpf_full_shift_pressure() {
        let rep = run(&ExperimentConfig::new("rpf").with_system(SystemDescriptor::named("full-2-shift"))).unwrap();
        let p = rep.summary["pressure"].as_f64().unwrap();
        assert!((p - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn manifest_reproduces_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::new("volume-lemma")
            .with_param("n_list", json!([2, 3]))
            .with_param("samples", 5000)
            .with_seed(9)
            .deterministic(true)
            .with_output_dir(dir.path().join("a"));
        run(&cfg).unwrap();
        let manifest = ExperimentConfig::from_file(&dir.path().join("a/manifest.json")).unwrap();
        run(&manifest.with_output_dir(dir.path().join("b"))).unwrap();
        for f in ["summary.json", "volume.csv", "manifest.json"] {
            let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
            assert_eq!(a, b, "{f}");
        }
    }

    #[test]
    fn defaults_resolve_for_every_experiment() {
        for e in list_experiments() {
            let d = default_parameters(e.name).unwrap();
            for k in d.keys() {
                assert!(e.parameters.contains(&k.as_str()), "{} {k}", e.name);
            }
        }
    }

    #[test]
    fn assignments_parse_json_or_strings() {
        let m = parse_assignments(&["a=1".into(), "b=[1,2]".into(), "c=zero".into()]).unwrap();
        assert_eq!(m["a"], json!(1));
        assert_eq!(m["b"], json!([1, 2]));
        assert_eq!(m["c"], json!("zero"));
        assert!(parse_assignments(&["novalue".into()]).is_err());
    }
}
