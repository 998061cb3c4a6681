//! C ABI for hypdyn.
//!
//! Objects are opaque handles created by `hd_*_new`/`hd_*_from_*` and released
//! with the matching `hd_*_free`. Every call returns an `HdStatus`; on failure
//! `hd_last_error_message` describes the error on the calling thread. Results
//! come back through out-pointers, which are left untouched on failure.
//! Strings returned by the library are owned by the caller and must be
//! released with `hd_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hypdyn::experiments::{run, ExperimentConfig};
use hypdyn::grassmann::compute_splitting;
use hypdyn::horseshoe::{build_g, lambda_measure, HorseshoeMap, HorseshoeParams};
use hypdyn::modulus::Modulus;
use hypdyn::shift::{rpf_solve, CylinderPotential, RpfData, Sft, ShiftModel};
use hypdyn::systems::{Point, SmoothSystem, SystemDescriptor};
use hypdyn::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// The input failed validation: domain, configuration or precondition.
    InvalidInput = 2,
    /// A numeric procedure did not converge or fell below resolution.
    Numeric = 3,
    /// File system or serialization failure.
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
    /// A string argument was not valid UTF-8.
    Utf8 = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    let c = CString::new(text).expect("nul bytes were removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(HdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            3 => HdStatus::Numeric,
            2 => HdStatus::InvalidInput,
            _ => HdStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> HdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            HdStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(HdStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Outcome {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(HdStatus::Utf8, format!("`{what}`: {e}")))
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T, what: &str) -> Outcome {
    write(out, Box::into_raw(Box::new(value)), what)
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn json_failure(e: serde_json::Error) -> Failure {
    Failure(HdStatus::InvalidInput, e.to_string())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn hd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn write_string(out: *mut *mut c_char, s: String, what: &str) -> Outcome {
    let c = CString::new(s).map_err(|e| Failure(HdStatus::Io, e.to_string()))?;
    write(out, c.into_raw(), what)
}

// Moduli of continuity.

/// Opaque modulus of continuity.
pub struct HdModulus(Modulus);

/// `ω(t) = t^α`, `0 < α ≤ 1`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_modulus_power(alpha: f64, out: *mut *mut HdModulus) -> HdStatus {
    guard(|| write_handle(out, HdModulus(Modulus::power(alpha)?), "out"))
}

/// `ω(t) = 1/(log 1/t)^β` near 0, extended affinely.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_modulus_log_power(beta: f64, out: *mut *mut HdModulus) -> HdStatus {
    guard(|| write_handle(out, HdModulus(Modulus::log_power(beta)?), "out"))
}

/// A modulus from its JSON form, e.g. `{"kind":"power","params":{"alpha":0.5},"t_max":1}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_modulus_from_json(json: *const c_char, out: *mut *mut HdModulus) -> HdStatus {
    guard(|| {
        let m: Modulus = serde_json::from_str(string(json, "json")?).map_err(json_failure)?;
        write_handle(out, HdModulus(m), "out")
    })
}

/// # Safety
/// `m` must be a live modulus handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_modulus_eval(m: *const HdModulus, t: f64, out: *mut f64) -> HdStatus {
    guard(|| write(out, deref(m, "m")?.0.eval(t)?, "out"))
}

/// Dini test: `summable` receives 1 or 0, and `integral` receives
/// `∫₀¹ ω(t)/t dt` when it is finite and NaN otherwise.
///
/// # Safety
/// `m` must be a live modulus handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hd_modulus_dini_test(m: *const HdModulus, tol: f64, summable: *mut i32, integral: *mut f64) -> HdStatus {
    guard(|| {
        if summable.is_null() || integral.is_null() {
            return Err(null("summable/integral"));
        }
        let rep = deref(m, "m")?.0.dini_test(tol)?;
        write(summable, i32::from(rep.summable), "summable")?;
        write(integral, rep.integral_estimate.unwrap_or(f64::NAN), "integral")
    })
}

/// `ω̃(t) = ∫₀ᵗ ω(s)/s ds`; fails with `InvalidInput` for non-Dini moduli.
///
/// # Safety
/// `m` must be a live modulus handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_modulus_tilde_integral(m: *const HdModulus, t: f64, out: *mut f64) -> HdStatus {
    guard(|| write(out, deref(m, "m")?.0.tilde_integral(t)?, "out"))
}

/// `Σ_{k≥0} ω(cᵏ t)` to tolerance `tol`.
///
/// # Safety
/// `m` must be a live modulus handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_modulus_tilde_series(m: *const HdModulus, c: f64, t: f64, tol: f64, out: *mut f64) -> HdStatus {
    guard(|| write(out, deref(m, "m")?.0.tilde_series(c, t, tol)?, "out"))
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_modulus_free(m: *mut HdModulus) {
    free_handle(m)
}

// Systems.

/// Opaque dynamical system.
pub struct HdSystem(Box<dyn SmoothSystem>);

/// A built-in system by name with default parameters (e.g. `"cat-map"`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_system_named(name: *const c_char, out: *mut *mut HdSystem) -> HdStatus {
    guard(|| write_handle(out, HdSystem(SystemDescriptor::named(string(name, "name")?).build()?), "out"))
}

/// A system from its JSON descriptor, e.g.
/// `{"name":"perturbed-automorphism","params":{"eps":0.01}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_system_from_json(json: *const c_char, out: *mut *mut HdSystem) -> HdStatus {
    guard(|| {
        let d: SystemDescriptor = serde_json::from_str(string(json, "json")?).map_err(json_failure)?;
        write_handle(out, HdSystem(d.build()?), "out")
    })
}

/// `out = f(x)` for points given as two doubles.
///
/// # Safety
/// `s` must be a live handle; `x` and `out` must point to two doubles each.
#[no_mangle]
pub unsafe extern "C" fn hd_system_apply(s: *const HdSystem, x: *const f64, out: *mut f64) -> HdStatus {
    guard(|| {
        let s = deref(s, "s")?;
        if x.is_null() || out.is_null() {
            return Err(null("x/out"));
        }
        let p = s.0.apply(Point::new(*x, *x.add(1)));
        *out = p.x1();
        *out.add(1) = p.x2();
        Ok(())
    })
}

/// `df_x` as four doubles in row-major order.
///
/// # Safety
/// `s` must be a live handle; `x` must point to two doubles, `out` to four.
#[no_mangle]
pub unsafe extern "C" fn hd_system_differential(s: *const HdSystem, x: *const f64, out: *mut f64) -> HdStatus {
    guard(|| {
        let s = deref(s, "s")?;
        if x.is_null() || out.is_null() {
            return Err(null("x/out"));
        }
        let m = s.0.differential(Point::new(*x, *x.add(1)));
        for (i, v) in [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]].into_iter().enumerate() {
            *out.add(i) = v;
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_system_free(s: *mut HdSystem) {
    free_handle(s)
}

/// Invariant splitting at `x`: unit vectors spanning `E^u` and `E^s`
/// (two doubles each) and the final residuals of both iterations.
///
/// # Safety
/// `s` must be a live handle, `x` must point to two doubles, `unstable` and
/// `stable` to two writable doubles each, `residuals` to two writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hd_splitting(
    s: *const HdSystem,
    x: *const f64,
    n_iter: usize,
    tol: f64,
    unstable: *mut f64,
    stable: *mut f64,
    residuals: *mut f64,
) -> HdStatus {
    guard(|| {
        let s = deref(s, "s")?;
        if x.is_null() || unstable.is_null() || stable.is_null() || residuals.is_null() {
            return Err(null("x/unstable/stable/residuals"));
        }
        let sp = compute_splitting(s.0.as_ref(), Point::new(*x, *x.add(1)), n_iter, tol)?;
        let (u, v) = (sp.unstable.v(), sp.stable.v());
        *unstable = u[0];
        *unstable.add(1) = u[1];
        *stable = v[0];
        *stable.add(1) = v[1];
        *residuals = sp.residual_u;
        *residuals.add(1) = sp.residual_s;
        Ok(())
    })
}

// Subshifts and transfer operators.

/// Opaque subshift of finite type with a finite-range potential.
pub struct HdShift {
    sft: Sft,
    potential: CylinderPotential,
}

/// A shift model from JSON:
/// `{"alphabet_size":2,"adjacency":[[1,1],[1,0]],"depth":2,"values":{"00":0.0,…}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_shift_from_json(json: *const c_char, out: *mut *mut HdShift) -> HdStatus {
    guard(|| {
        let model: ShiftModel = serde_json::from_str(string(json, "json")?).map_err(json_failure)?;
        let (sft, potential) = model.build()?;
        write_handle(out, HdShift { sft, potential }, "out")
    })
}

/// The full shift on `k` symbols with the zero potential of range `depth`.
///
/// # Safety
/// `out` must be valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_shift_full(k: usize, depth: usize, out: *mut *mut HdShift) -> HdStatus {
    guard(|| {
        let sft = Sft::full(k)?;
        let potential = CylinderPotential::zero(&sft, depth)?;
        write_handle(out, HdShift { sft, potential }, "out")
    })
}

/// The full 2-shift with the Bernoulli(p) potential `φ(x) = log p_{x₀}`.
///
/// # Safety
/// `out` must be valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_shift_bernoulli(depth: usize, p: f64, out: *mut *mut HdShift) -> HdStatus {
    guard(|| {
        let (sft, potential) = CylinderPotential::bernoulli(depth, p)?;
        write_handle(out, HdShift { sft, potential }, "out")
    })
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_shift_free(s: *mut HdShift) {
    free_handle(s)
}

/// Opaque leading eigen-data of a transfer operator.
pub struct HdRpf(RpfData);

/// Power iteration for the leading eigenvalue, eigenfunction and eigenmeasure.
///
/// # Safety
/// `s` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_rpf_solve(s: *const HdShift, tol: f64, out: *mut *mut HdRpf) -> HdStatus {
    guard(|| {
        let s = deref(s, "s")?;
        write_handle(out, HdRpf(rpf_solve(&s.sft, &s.potential, tol)?), "out")
    })
}

/// # Safety
/// `r` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_rpf_eigenvalue(r: *const HdRpf, out: *mut f64) -> HdStatus {
    guard(|| write(out, deref(r, "r")?.0.eigenvalue, "out"))
}

/// `P(φ) = log λ`.
///
/// # Safety
/// `r` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_rpf_pressure(r: *const HdRpf, out: *mut f64) -> HdStatus {
    guard(|| write(out, deref(r, "r")?.0.pressure, "out"))
}

/// Number of states (admissible words of length `depth − 1`).
///
/// # Safety
/// `r` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_rpf_state_count(r: *const HdRpf, out: *mut usize) -> HdStatus {
    guard(|| write(out, deref(r, "r")?.0.states.len(), "out"))
}

/// Copies the Gibbs weights of the states into `buf`, which must hold
/// `hd_rpf_state_count` doubles; `len` is that capacity.
///
/// # Safety
/// `r` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hd_rpf_gibbs(r: *const HdRpf, buf: *mut f64, len: usize) -> HdStatus {
    guard(|| {
        let g = &deref(r, "r")?.0.gibbs;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < g.len() {
            return Err(Failure(HdStatus::InvalidInput, format!("buffer holds {len} values, need {}", g.len())));
        }
        ptr::copy_nonoverlapping(g.as_ptr(), buf, g.len());
        Ok(())
    })
}

/// The full eigen-data as JSON; free the result with `hd_string_free`.
///
/// # Safety
/// `r` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_rpf_to_json(r: *const HdRpf, out: *mut *mut c_char) -> HdStatus {
    guard(|| {
        let text = serde_json::to_string(&deref(r, "r")?.0).map_err(|e| Failure(HdStatus::Io, e.to_string()))?;
        write_string(out, text, "out")
    })
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_rpf_free(r: *mut HdRpf) {
    free_handle(r)
}

// Horseshoe.

/// Opaque C¹ horseshoe interval map `g: I → J` at a finite depth.
pub struct HdHorseshoe(HorseshoeMap);

/// Builds `g` with gap schedule offset `offset` (default 10) and tree depth
/// at most 30.
///
/// # Safety
/// `out` must be valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_horseshoe_new(offset: f64, depth: usize, out: *mut *mut HdHorseshoe) -> HdStatus {
    guard(|| write_handle(out, HdHorseshoe(build_g(&HorseshoeParams::new(offset)?, depth)?), "out"))
}

/// # Safety
/// `h` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_horseshoe_eval(h: *const HdHorseshoe, x: f64, out: *mut f64) -> HdStatus {
    guard(|| write(out, deref(h, "h")?.0.eval(x)?, "out"))
}

/// # Safety
/// `h` must be a live handle and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_horseshoe_derivative(h: *const HdHorseshoe, x: f64, out: *mut f64) -> HdStatus {
    guard(|| write(out, deref(h, "h")?.0.derivative(x)?, "out"))
}

/// Lebesgue measure of the invariant Cantor set and its error bound.
///
/// # Safety
/// `h` must be a live handle; `value` and `error_bound` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_horseshoe_measure(h: *const HdHorseshoe, value: *mut f64, error_bound: *mut f64) -> HdStatus {
    guard(|| {
        if value.is_null() || error_bound.is_null() {
            return Err(null("value/error_bound"));
        }
        let rep = lambda_measure(&deref(h, "h")?.0.params);
        write(value, rep.value, "value")?;
        write(error_bound, rep.error_bound, "error_bound")
    })
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_horseshoe_free(h: *mut HdHorseshoe) {
    free_handle(h)
}

// Experiments.

/// Runs an experiment config given as JSON and returns the report
/// `{manifest, summary, tables, output_dir, wall_time}` as JSON. Free the
/// result with `hd_string_free`.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hd_run_experiment_json(config: *const c_char, out: *mut *mut c_char) -> HdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig::from_json(string(config, "config")?)?;
        let report = run(&cfg)?;
        let text = serde_json::to_string(&report).map_err(|e| Failure(HdStatus::Io, e.to_string()))?;
        write_string(out, text, "out")
    })
}
