//! C ABI over the gaussloc engines.
//!
//! Every fallible function returns a [`GlStatus`]; on failure the message is
//! available from [`gl_last_error`] on the same thread. Handles are opaque,
//! created by `*_new`-style functions and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gaussloc::atomicity::{count_paths_by_turns, max_atom, passage_time};
use gaussloc::diagnostics::a_delta_mass;
use gaussloc::models::{rem_limit_free_energy, rem_limit_mean_overlap};
use gaussloc::{Environment, Error, ExactBudget, ExactGibbs, MixedPSpin, MixedXi, ModelSpec, Polymer, Rem, StateId};

/// Result codes shared by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Encoding = 3,
    DimensionMismatch = 4,
    BudgetExceeded = 5,
    Precondition = 6,
    Unsupported = 7,
    BufferTooSmall = 8,
    Internal = 9,
    Panic = 10,
}

/// Model handle.
pub struct GlModel(ModelSpec);
/// Disorder handle.
pub struct GlEnvironment(Environment);
/// Configuration handle.
pub struct GlState(StateId);
/// Exact Gibbs measure handle.
pub struct GlGibbs(ExactGibbs);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GlGibbsSummary {
    pub beta: f64,
    pub log_z: f64,
    pub free_energy: f64,
    pub free_energy_derivative: f64,
    pub free_energy_second: f64,
    pub mean_overlap: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GlAtomReport {
    pub passage_time: f64,
    pub max_atom: f64,
    pub n_times_atom: f64,
    pub turns_of_argmax: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(GlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Encoding(_) => GlStatus::Encoding,
            Error::DimensionMismatch { .. } => GlStatus::DimensionMismatch,
            Error::InvalidParameter(_) | Error::Config { .. } => GlStatus::InvalidArgument,
            Error::BudgetExceeded(_) => GlStatus::BudgetExceeded,
            Error::Precondition(_) => GlStatus::Precondition,
            Error::Unsupported(_) => GlStatus::Unsupported,
            _ => GlStatus::Internal,
        };
        Failure(code, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            GlStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(_) => {
            set_last_error("panic inside gaussloc");
            GlStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copy `s` plus a NUL into `buf`; `needed` receives the full size.
unsafe fn write_string(s: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> Result<(), Failure> {
    let bytes = s.as_bytes();
    if !needed.is_null() {
        needed.write(bytes.len() + 1);
    }
    if cap < bytes.len() + 1 {
        return Err(Failure(
            GlStatus::BufferTooSmall,
            format!("buffer holds {cap} bytes, need {}", bytes.len() + 1),
        ));
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    buf.add(bytes.len()).write(0);
    Ok(())
}

unsafe fn boxed<T>(out: *mut *mut T, v: T) -> Result<(), Failure> {
    write_out(out, Box::into_raw(Box::new(v)))
}

/// Message of the last failure on this thread; empty after a success.
/// Valid until the next gaussloc call on the same thread.
#[no_mangle]
pub extern "C" fn gl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_model_rem(n: usize, out: *mut *mut GlModel) -> GlStatus {
    guard(|| boxed(out, GlModel(ModelSpec::Rem(Rem::new(n)?))))
}

/// Mixed p-spin with `ξ(q) = Σ β_p² q^p` from `len` pairs `(orders[k], betas[k])`.
///
/// # Safety
/// `orders` and `betas` must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_model_pspin(
    n: usize,
    orders: *const u32,
    betas: *const f64,
    len: usize,
    out: *mut *mut GlModel,
) -> GlStatus {
    guard(|| {
        let ps = slice(orders, len, "orders")?;
        let bs = slice(betas, len, "betas")?;
        let xi = MixedXi::new(ps.iter().copied().zip(bs.iter().copied()).collect())?;
        boxed(out, GlModel(ModelSpec::PSpin(MixedPSpin::new(n, xi)?)))
    })
}

/// Directed polymer with the simple random walk in dimension `d`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_model_polymer(n: usize, d: usize, out: *mut *mut GlModel) -> GlStatus {
    guard(|| boxed(out, GlModel(ModelSpec::Polymer(Polymer::simple(n, d)?))))
}

/// # Safety
/// `model` must come from a `gl_model_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gl_model_free(model: *mut GlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of disorder coordinates, 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gl_model_feature_count(model: *const GlModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.feature_count())
}

/// Size parameter `n`, 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gl_model_n(model: *const GlModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n())
}

/// Seeded standard Gaussian disorder for `model`.
///
/// # Safety
/// `model` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_env_sample(
    model: *const GlModel,
    seed: u64,
    replica: u64,
    out: *mut *mut GlEnvironment,
) -> GlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        boxed(out, GlEnvironment(m.0.sample_environment_replica(seed, replica)))
    })
}

/// Disorder from explicit values.
///
/// # Safety
/// `values` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_env_from_values(values: *const f64, len: usize, out: *mut *mut GlEnvironment) -> GlStatus {
    guard(|| {
        let v = slice(values, len, "values")?;
        boxed(out, GlEnvironment(Environment::from_values(v.to_vec())?))
    })
}

/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gl_env_len(env: *const GlEnvironment) -> usize {
    env.as_ref().map_or(0, |e| e.0.len())
}

/// Copy the disorder into `buf`, which must hold `gl_env_len` doubles.
///
/// # Safety
/// `env` must be live; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn gl_env_values(env: *const GlEnvironment, buf: *mut f64, cap: usize) -> GlStatus {
    guard(|| {
        let e = deref(env, "env")?;
        if cap < e.0.len() {
            return Err(Failure(GlStatus::BufferTooSmall, format!("need {} doubles", e.0.len())));
        }
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(e.0.g.as_ptr(), buf, e.0.len());
        Ok(())
    })
}

/// # Safety
/// `env` must come from a `gl_env_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gl_env_free(env: *mut GlEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Parse a configuration: a `0`/`1` string for spins (character `i` is
/// spin `i`, `1` meaning `+1`) or step letters `RLUDFB` for paths.
///
/// # Safety
/// `model` must be live, `text` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_state_parse(model: *const GlModel, text: *const c_char, out: *mut *mut GlState) -> GlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if text.is_null() {
            return Err(null("text"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| Failure(GlStatus::Encoding, "state text is not UTF-8".into()))?;
        boxed(out, GlState(m.0.parse_state(s)?))
    })
}

/// Canonical text of a state; `needed` receives the buffer size required.
///
/// # Safety
/// `state` must be live; `buf` must hold `cap` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn gl_state_to_string(
    state: *const GlState,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> GlStatus {
    guard(|| write_string(&deref(state, "state")?.0.to_string(), buf, cap, needed))
}

/// # Safety
/// `state` must come from `gl_state_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gl_state_free(state: *mut GlState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// `H(σ) = Σ_i g_i φ_i(σ)`.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_hamiltonian(
    model: *const GlModel,
    env: *const GlEnvironment,
    state: *const GlState,
    out: *mut f64,
) -> GlStatus {
    guard(|| {
        let h = deref(model, "model")?
            .0
            .hamiltonian(&deref(env, "env")?.0, &deref(state, "state")?.0)?;
        write_out(out, h)
    })
}

/// `R(σ¹, σ²)`.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_overlap(
    model: *const GlModel,
    a: *const GlState,
    b: *const GlState,
    out: *mut f64,
) -> GlStatus {
    guard(|| {
        let r = deref(model, "model")?.0.overlap(&deref(a, "a")?.0, &deref(b, "b")?.0)?;
        write_out(out, r)
    })
}

/// Exact Gibbs measure under the default size budget.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_gibbs_new(
    model: *const GlModel,
    env: *const GlEnvironment,
    beta: f64,
    out: *mut *mut GlGibbs,
) -> GlStatus {
    guard(|| {
        let g = ExactGibbs::new(&deref(model, "model")?.0, &deref(env, "env")?.0, beta)?;
        boxed(out, GlGibbs(g))
    })
}

/// # Safety
/// `gibbs` must come from `gl_gibbs_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gl_gibbs_free(gibbs: *mut GlGibbs) {
    if !gibbs.is_null() {
        drop(Box::from_raw(gibbs));
    }
}

/// # Safety
/// `gibbs` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_gibbs_summary(gibbs: *const GlGibbs, out: *mut GlGibbsSummary) -> GlStatus {
    guard(|| {
        let s = deref(gibbs, "gibbs")?.0.summary();
        write_out(
            out,
            GlGibbsSummary {
                beta: s.beta,
                log_z: s.log_z,
                free_energy: s.free_energy,
                free_energy_derivative: s.free_energy_derivative,
                free_energy_second: s.free_energy_second,
                mean_overlap: s.mean_overlap,
            },
        )
    })
}

/// `R(σ) = ⟨R(σ, ·)⟩`.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_gibbs_conditional_overlap(
    gibbs: *const GlGibbs,
    state: *const GlState,
    out: *mut f64,
) -> GlStatus {
    guard(|| {
        let r = deref(gibbs, "gibbs")?.0.conditional_overlap(&deref(state, "state")?.0)?;
        write_out(out, r)
    })
}

/// Gibbs mass of `{σ : R(σ) <= δ}`.
///
/// # Safety
/// `gibbs` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_gibbs_a_delta_mass(gibbs: *const GlGibbs, delta: f64, out: *mut f64) -> GlStatus {
    guard(|| {
        let m = a_delta_mass(&deref(gibbs, "gibbs")?.0, delta, &ExactBudget::default())?;
        write_out(out, m)
    })
}

/// Passage time `L_n` and the step indices of the lexicographically first
/// maximizing path (`n` bytes written to `steps`).
///
/// # Safety
/// `env` must be live; `out` writable; `steps` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn gl_passage_time(
    d: usize,
    n: usize,
    env: *const GlEnvironment,
    out: *mut f64,
    steps: *mut u8,
    cap: usize,
) -> GlStatus {
    guard(|| {
        let (l, path) = passage_time(d, n, &deref(env, "env")?.0)?;
        if cap < n {
            return Err(Failure(GlStatus::BufferTooSmall, format!("need {n} step bytes")));
        }
        if steps.is_null() {
            return Err(null("steps"));
        }
        ptr::copy_nonoverlapping(path.steps.as_ptr(), steps, n);
        write_out(out, l)
    })
}

/// # Safety
/// `env` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_max_atom(
    d: usize,
    n: usize,
    env: *const GlEnvironment,
    beta: f64,
    out: *mut GlAtomReport,
) -> GlStatus {
    guard(|| {
        let a = max_atom(d, n, &deref(env, "env")?.0, beta)?;
        write_out(
            out,
            GlAtomReport {
                passage_time: a.passage_time,
                max_atom: a.max_atom,
                n_times_atom: a.n_times_atom,
                turns_of_argmax: a.turns_of_argmax,
            },
        )
    })
}

/// Decimal count of length-`n` paths in `Z^d` with exactly `j` turns.
///
/// # Safety
/// `buf` must hold `cap` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn gl_count_paths_by_turns(
    n: usize,
    d: usize,
    j: usize,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> GlStatus {
    guard(|| {
        let counts = count_paths_by_turns(n, d)?;
        let c = counts
            .get(j)
            .map(|c| c.to_string())
            .unwrap_or_else(|| "0".to_owned());
        write_string(&c, buf, cap, needed)
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_rem_limit_free_energy(beta: f64, out: *mut f64) -> GlStatus {
    guard(|| write_out(out, rem_limit_free_energy(beta)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_rem_limit_mean_overlap(beta: f64, out: *mut f64) -> GlStatus {
    guard(|| write_out(out, rem_limit_mean_overlap(beta)?))
}
