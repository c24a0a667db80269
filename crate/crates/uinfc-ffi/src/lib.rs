//! C ABI for the `uinfc` library.
//!
//! Objects are exposed as opaque handles created by `*_new`/`*_load`
//! functions and released by the matching `*_free`. Every fallible call
//! returns one of the `UINFC_*` status codes; the message of the last
//! failure on the calling thread is available from [`uinfc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use uinfc::clf::{Clf, NormClf};
use uinfc::config::RunSpec;
use uinfc::infconv::moreau_envelope;
use uinfc::sim::{check_practical_stability, simulate, Verdict};
use uinfc::validate::default_endi_clf;
use uinfc::Error;

pub const UINFC_OK: i32 = 0;
pub const UINFC_ERR_NULL: i32 = -1;
pub const UINFC_ERR_PARAM: i32 = -2;
pub const UINFC_ERR_CONFIG: i32 = -3;
pub const UINFC_ERR_NUMERIC: i32 = -4;
pub const UINFC_ERR_INFEASIBLE: i32 = -5;
pub const UINFC_ERR_IO: i32 = -6;
pub const UINFC_ERR_PANIC: i32 = -7;

pub const UINFC_VERDICT_STABLE: i32 = 0;
pub const UINFC_VERDICT_UNSTABLE: i32 = 2;
pub const UINFC_VERDICT_INCONCLUSIVE: i32 = 3;

/// A parsed run configuration.
pub struct UinfcRun {
    spec: RunSpec,
}

/// A control Lyapunov function.
pub struct UinfcClf {
    clf: Arc<dyn Clf>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) => UINFC_ERR_PARAM,
        Error::Config(_) => UINFC_ERR_CONFIG,
        Error::Evaluation(_) | Error::Regularization(_) | Error::Solver(_) | Error::Resource(_) => UINFC_ERR_NUMERIC,
        Error::Infeasible { .. } => UINFC_ERR_INFEASIBLE,
        Error::Io(_) | Error::Csv(_) => UINFC_ERR_IO,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), i32>>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UINFC_OK,
        Ok(Err(code)) => code,
        Err(_) => {
            set_error("internal panic".to_string());
            UINFC_ERR_PANIC
        }
    }
}

fn fail(e: Error) -> i32 {
    let code = code_of(&e);
    set_error(e.to_string());
    code
}

fn null(what: &str) -> i32 {
    set_error(format!("null pointer: {what}"));
    UINFC_ERR_NULL
}

/// # Safety
/// `p` must be null or a valid nul-terminated string.
unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, i32> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        UINFC_ERR_PARAM
    })?;
    Ok(Path::new(s))
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], i32> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies the last error message of this thread, nul-terminated and
/// truncated to `cap` bytes, into `buf`. Returns the buffer size needed for
/// the full message.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn uinfc_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Parses a configuration file into a new run handle.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uinfc_run_load(path: *const c_char, out: *mut *mut UinfcRun) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let spec = RunSpec::from_file(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(UinfcRun { spec }));
        Ok(())
    })
}

/// Replaces every seed of the run with streams derived from `seed`.
///
/// # Safety
/// `run` must be a live handle from [`uinfc_run_load`].
#[no_mangle]
pub unsafe extern "C" fn uinfc_run_set_seed(run: *mut UinfcRun, seed: u64) -> i32 {
    guard(|| {
        let run = run.as_mut().ok_or_else(|| null("run"))?;
        run.spec.override_seeds(seed);
        Ok(())
    })
}

/// Simulates the run, writes the trajectory CSV to `csv_path` and reports
/// the verdict as a `UINFC_VERDICT_*` code. `t_entry` receives the entry
/// time for stable verdicts and NaN otherwise.
///
/// # Safety
/// `run` must be a live handle; `csv_path` a nul-terminated string;
/// `verdict` and `t_entry` writable.
#[no_mangle]
pub unsafe extern "C" fn uinfc_run_simulate(
    run: *const UinfcRun,
    csv_path: *const c_char,
    verdict: *mut i32,
    t_entry: *mut f64,
) -> i32 {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if verdict.is_null() || t_entry.is_null() {
            return Err(null("verdict/t_entry"));
        }
        let path = path_arg(csv_path, "csv_path")?;
        let cfg = run.spec.build().map_err(fail)?;
        let log = simulate(&cfg).map_err(fail)?;
        let file = std::fs::File::create(path).map_err(|e| fail(e.into()))?;
        log.write_csv(std::io::BufWriter::new(file)).map_err(fail)?;
        let v = check_practical_stability(&log, run.spec.r, run.spec.t_max());
        *verdict = match v {
            Verdict::StableAt(_) => UINFC_VERDICT_STABLE,
            Verdict::Unstable => UINFC_VERDICT_UNSTABLE,
            Verdict::Inconclusive => UINFC_VERDICT_INCONCLUSIVE,
        };
        *t_entry = v.entry_time().unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle from [`uinfc_run_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uinfc_run_free(run: *mut UinfcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// The ENDI CLF calibrated on the input box `[−3, 3]²`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uinfc_endi_clf_new(out: *mut *mut UinfcClf) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let clf = default_endi_clf().map_err(fail)?;
        *out = Box::into_raw(Box::new(UinfcClf { clf: Arc::new(clf) }));
        Ok(())
    })
}

/// `V(x) = ‖x‖` in `dim` dimensions with decay `w(x) = decay_gain·‖x‖`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uinfc_norm_clf_new(dim: usize, decay_gain: f64, out: *mut *mut UinfcClf) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let clf = NormClf::new(dim, decay_gain).map_err(fail)?;
        *out = Box::into_raw(Box::new(UinfcClf { clf: Arc::new(clf) }));
        Ok(())
    })
}

/// # Safety
/// `clf` must be a live handle; `dim` writable.
#[no_mangle]
pub unsafe extern "C" fn uinfc_clf_dim(clf: *const UinfcClf, dim: *mut usize) -> i32 {
    guard(|| {
        let clf = clf.as_ref().ok_or_else(|| null("clf"))?;
        if dim.is_null() {
            return Err(null("dim"));
        }
        *dim = clf.clf.dim();
        Ok(())
    })
}

fn check_len(clf: &UinfcClf, len: usize) -> Result<(), i32> {
    if len != clf.clf.dim() {
        set_error(format!("expected {} state components, got {len}", clf.clf.dim()));
        return Err(UINFC_ERR_PARAM);
    }
    Ok(())
}

/// Evaluates `V(x)`.
///
/// # Safety
/// `clf` must be a live handle; `x` must point to `len` doubles; `value`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn uinfc_clf_value(clf: *const UinfcClf, x: *const f64, len: usize, value: *mut f64) -> i32 {
    guard(|| {
        let clf = clf.as_ref().ok_or_else(|| null("clf"))?;
        check_len(clf, len)?;
        let x = slice_arg(x, len, "x")?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = clf.clf.value(x);
        Ok(())
    })
}

/// Approximate Moreau envelope minimizer with gap at most `eps_target`.
/// Writes the minimizer to `y` (length `len`), the objective value to
/// `value` and the certified gap to `eps_achieved`.
///
/// # Safety
/// `clf` must be a live handle; `x` readable and `y` writable for `len`
/// doubles; `value` and `eps_achieved` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn uinfc_moreau_envelope(
    clf: *const UinfcClf,
    x: *const f64,
    len: usize,
    alpha: f64,
    eps_target: f64,
    seed: u64,
    y: *mut f64,
    value: *mut f64,
    eps_achieved: *mut f64,
) -> i32 {
    guard(|| {
        let clf = clf.as_ref().ok_or_else(|| null("clf"))?;
        check_len(clf, len)?;
        let x = slice_arg(x, len, "x")?;
        if y.is_null() || value.is_null() || eps_achieved.is_null() {
            return Err(null("y/value/eps_achieved"));
        }
        let res = moreau_envelope(clf.clf.as_ref(), x, alpha, eps_target, seed).map_err(fail)?;
        std::slice::from_raw_parts_mut(y, len).copy_from_slice(&res.y_eps);
        *value = res.envelope_value;
        *eps_achieved = res.eps_achieved;
        Ok(())
    })
}

/// # Safety
/// `clf` must be null or a handle from a `uinfc_*_clf_new` function not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn uinfc_clf_free(clf: *mut UinfcClf) {
    if !clf.is_null() {
        drop(Box::from_raw(clf));
    }
}
