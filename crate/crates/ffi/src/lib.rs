//! C ABI for the `opmm` solver.
//!
//! Every function returns an [`OpmmStatus`]. On failure a message is stored
//! per thread and can be read with [`opmm_last_error`]. Sessions are opaque
//! handles created from a TOML configuration string and released with
//! [`opmm_session_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use opmm::geometry::SimpleSet;
use opmm::harness::{csv_header, csv_row, RunConfig};
use opmm::opmm::Runner;
use opmm::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpmmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration failed to parse or validate.
    Config = 3,
    /// A buffer length does not match the problem dimension.
    Dimension = 4,
    /// Invalid set, constant or strategy.
    InvalidInput = 5,
    /// The inner solver failed in strict mode.
    Solver = 6,
    Io = 7,
    /// The session already played all `T` rounds.
    Done = 8,
    /// An internal panic was caught.
    Panic = 9,
}

/// Averaged regrets after the rounds played so far.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OpmmRegrets {
    pub rounds: usize,
    pub lagrangian: f64,
    pub max_violation: f64,
    pub complementarity: f64,
    pub objective: f64,
}

/// Opaque run state.
pub struct OpmmSession {
    runner: Runner,
    csv: String,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> OpmmStatus {
    match e {
        Error::Config(_) => OpmmStatus::Config,
        Error::DimensionMismatch { .. } => OpmmStatus::Dimension,
        Error::MaxItersExceeded { .. } => OpmmStatus::Solver,
        Error::Io(_) => OpmmStatus::Io,
        _ => OpmmStatus::InvalidInput,
    }
}

/// Runs `f`, converting errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), (OpmmStatus, String)>) -> OpmmStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OpmmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            OpmmStatus::Panic
        }
    }
}

fn fail(e: Error) -> (OpmmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (OpmmStatus, String) {
    (OpmmStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], (OpmmStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], (OpmmStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, (OpmmStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (OpmmStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn session<'a>(s: *mut OpmmSession) -> Result<&'a mut OpmmSession, (OpmmStatus, String)> {
    s.as_mut().ok_or_else(|| null("session"))
}

fn copy_out(src: &[f64], dst: &mut [f64]) -> Result<(), (OpmmStatus, String)> {
    if src.len() != dst.len() {
        return Err(fail(Error::DimensionMismatch {
            expected: src.len(),
            got: dst.len(),
        }));
    }
    dst.copy_from_slice(src);
    Ok(())
}

fn project_into(set: opmm::Result<SimpleSet>, x: &[f64], out: &mut [f64]) -> Result<(), (OpmmStatus, String)> {
    let p = set.and_then(|s| s.project(x)).map_err(fail)?;
    copy_out(&p, out)
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn opmm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn opmm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Euclidean projection of `x` onto the box `[lower, upper]`, all of length `n`.
///
/// # Safety
/// Every pointer must reference `n` readable (or, for `out`, writable) doubles.
#[no_mangle]
pub unsafe extern "C" fn opmm_project_box(
    lower: *const f64,
    upper: *const f64,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> OpmmStatus {
    guard(|| {
        let set = SimpleSet::boxed(slice(lower, n, "lower")?.to_vec(), slice(upper, n, "upper")?.to_vec());
        project_into(set, slice(x, n, "x")?, slice_mut(out, n, "out")?)
    })
}

/// Euclidean projection of `x` onto the ball of `radius` around `center`.
///
/// # Safety
/// `center`, `x` and `out` must reference `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn opmm_project_ball(
    center: *const f64,
    radius: f64,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> OpmmStatus {
    guard(|| {
        let set = SimpleSet::ball(slice(center, n, "center")?.to_vec(), radius);
        project_into(set, slice(x, n, "x")?, slice_mut(out, n, "out")?)
    })
}

/// Euclidean projection of `x` onto the probability simplex of dimension `n`.
///
/// # Safety
/// `x` and `out` must reference `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn opmm_project_simplex(x: *const f64, n: usize, out: *mut f64) -> OpmmStatus {
    guard(|| project_into(SimpleSet::simplex(n), slice(x, n, "x")?, slice_mut(out, n, "out")?))
}

/// Creates a session from a TOML configuration. On success `*out` owns the
/// session; on failure it is set to null.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn opmm_session_new(config_toml: *const c_char, out: *mut *mut OpmmSession) -> OpmmStatus {
    if out.is_null() {
        set_error("out is null");
        return OpmmStatus::NullPointer;
    }
    *out = ptr::null_mut();
    guard(|| {
        let cfg = RunConfig::from_toml(string(config_toml, "config_toml")?).map_err(fail)?;
        let problem = cfg.build_problem().map_err(fail)?;
        let p = problem.constraints.count();
        let runner = Runner::new(problem, cfg.algo_params(), cfg.route).map_err(fail)?;
        *out = Box::into_raw(Box::new(OpmmSession {
            runner,
            csv: csv_header(p),
        }));
        Ok(())
    })
}

/// Releases a session. Null is a no-op.
///
/// # Safety
/// `s` must come from [`opmm_session_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn opmm_session_free(s: *mut OpmmSession) {
    if !s.is_null() {
        let _ = panic::catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(s))));
    }
}

/// Plays one round. Returns `Done` once all rounds are played.
///
/// # Safety
/// `s` must be a live session.
#[no_mangle]
pub unsafe extern "C" fn opmm_session_step(s: *mut OpmmSession) -> OpmmStatus {
    guard(|| {
        let s = session(s)?;
        if s.runner.is_done() {
            return Err((OpmmStatus::Done, "all rounds played".into()));
        }
        let trace = s.runner.step().map_err(fail)?;
        s.csv.push_str(&csv_row(&trace));
        Ok(())
    })
}

/// Plays every remaining round.
///
/// # Safety
/// `s` must be a live session.
#[no_mangle]
pub unsafe extern "C" fn opmm_session_run(s: *mut OpmmSession) -> OpmmStatus {
    guard(|| {
        let s = session(s)?;
        while !s.runner.is_done() {
            let trace = s.runner.step().map_err(fail)?;
            s.csv.push_str(&csv_row(&trace));
        }
        Ok(())
    })
}

/// Decision dimension `n`, constraint count `p` and rounds played so far.
///
/// # Safety
/// `s` must be a live session; output pointers may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn opmm_session_shape(
    s: *mut OpmmSession,
    n: *mut usize,
    p: *mut usize,
    rounds: *mut usize,
) -> OpmmStatus {
    guard(|| {
        let s = session(s)?;
        let st = s.runner.state();
        for (dst, v) in [(n, st.x.len()), (p, st.lambda.len()), (rounds, s.runner.rounds())] {
            if let Some(d) = dst.as_mut() {
                *d = v;
            }
        }
        Ok(())
    })
}

/// Copies the current decision `x^t` into `out` (length `n`).
///
/// # Safety
/// `s` must be a live session and `out` must reference `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn opmm_session_x(s: *mut OpmmSession, out: *mut f64, len: usize) -> OpmmStatus {
    guard(|| {
        let s = session(s)?;
        copy_out(&s.runner.state().x, slice_mut(out, len, "out")?)
    })
}

/// Copies the current multipliers `λ^t` into `out` (length `p`).
///
/// # Safety
/// `s` must be a live session and `out` must reference `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn opmm_session_lambda(s: *mut OpmmSession, out: *mut f64, len: usize) -> OpmmStatus {
    guard(|| {
        let s = session(s)?;
        copy_out(&s.runner.state().lambda, slice_mut(out, len, "out")?)
    })
}

/// Averaged regrets over the rounds played. Fails before the first round.
///
/// # Safety
/// `s` must be a live session and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn opmm_session_regrets(s: *mut OpmmSession, out: *mut OpmmRegrets) -> OpmmStatus {
    guard(|| {
        let s = session(s)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = s.runner.ledger().regrets().map_err(fail)?;
        *out = OpmmRegrets {
            rounds: r.rounds,
            lagrangian: r.lagrangian,
            max_violation: r.max_violation,
            complementarity: r.complementarity,
            objective: r.objective,
        };
        Ok(())
    })
}

/// Writes the per-round CSV of the rounds played so far to `path`.
///
/// # Safety
/// `s` must be a live session and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn opmm_session_write_csv(s: *mut OpmmSession, path: *const c_char) -> OpmmStatus {
    guard(|| {
        let s = session(s)?;
        let path = string(path, "path")?;
        std::fs::write(path, &s.csv).map_err(|e| fail(e.into()))
    })
}
