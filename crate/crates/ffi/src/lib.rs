//! C ABI over `pqmkz`.
//!
//! Objects are opaque handles created by `*_new`/`*_parse` and released by the
//! matching `*_free`. Every fallible call returns a [`PqmkzStatus`] and writes
//! results through out-pointers; on failure a message is available from
//! [`pqmkz_last_error_message`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pqmkz::bounds;
use pqmkz::calculus;
use pqmkz::moments;
use pqmkz::operator;
use pqmkz::{Error, EvalOutcome, Function, PQPair, PQParams, TruncationPolicy};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PqmkzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Syntax = 3,
    Domain = 4,
    Panic = 5,
}

/// Operator `M_{n,p,q}` together with its truncation policy.
pub struct PqmkzOperator {
    params: PQParams,
    policy: TruncationPolicy,
}

/// A parsed function of `x`.
pub struct PqmkzFunction {
    inner: Function,
}

/// Value of a truncated evaluation and its certificate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PqmkzEvalOutcome {
    pub value: f64,
    pub tail_mass: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub rounding_bound: f64,
    pub error_bound: f64,
    pub converged: bool,
    pub heuristic_bound: bool,
}

impl From<EvalOutcome> for PqmkzEvalOutcome {
    fn from(o: EvalOutcome) -> Self {
        Self {
            value: o.value,
            tail_mass: o.tail_mass,
            terms_used: o.terms_used,
            tail_bound: o.tail_bound,
            rounding_bound: o.rounding_bound,
            error_bound: o.error_bound,
            converged: o.converged,
            heuristic_bound: o.heuristic_bound,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(e: &Error) -> PqmkzStatus {
    match e {
        Error::Syntax { .. } | Error::UnknownIdentifier { .. } => PqmkzStatus::Syntax,
        Error::Domain { .. } => PqmkzStatus::Domain,
        _ => PqmkzStatus::InvalidArgument,
    }
}

struct Null;

impl From<Null> for Failure {
    fn from(_: Null) -> Self {
        Failure::Null
    }
}

enum Failure {
    Null,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, mapping errors and panics to status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> PqmkzStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            PqmkzStatus::Ok
        }
        Ok(Err(Failure::Null)) => {
            set_error("null pointer argument");
            PqmkzStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            PqmkzStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, Null> {
    p.as_ref().ok_or(Null)
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Null> {
    if out.is_null() {
        return Err(Null);
    }
    out.write(value);
    Ok(())
}

fn boxed(params: PQParams) -> *mut PqmkzOperator {
    Box::into_raw(Box::new(PqmkzOperator {
        params,
        policy: TruncationPolicy::default(),
    }))
}

/// Creates an operator for `n` and `0 < q < p <= 1` with the default policy.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_operator_new(
    n: u32,
    p: f64,
    q: f64,
    out: *mut *mut PqmkzOperator,
) -> PqmkzStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null);
        }
        let params = PQParams::from_parts(n, p, q)?;
        write_out(out, boxed(params))?;
        Ok(())
    })
}

/// Creates the classical (`p = q = 1`) operator.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_operator_new_classical(
    n: u32,
    out: *mut *mut PqmkzOperator,
) -> PqmkzStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null);
        }
        let params = PQParams::new(n, PQPair::classical())?;
        write_out(out, boxed(params))?;
        Ok(())
    })
}

/// Replaces the truncation policy. Pass a NaN `sup_bound` for none.
///
/// # Safety
/// `op` must be a live handle from `pqmkz_operator_new*`.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_operator_set_policy(
    op: *mut PqmkzOperator,
    tail_tol: f64,
    k_max: usize,
    sup_bound: f64,
) -> PqmkzStatus {
    guard(|| {
        let op = op.as_mut().ok_or(Null)?;
        let mut policy = TruncationPolicy::new(tail_tol, k_max)?;
        if !sup_bound.is_nan() {
            policy = policy.with_sup_bound(sup_bound)?;
        }
        op.policy = policy;
        Ok(())
    })
}

/// Releases an operator; null is ignored.
///
/// # Safety
/// `op` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_operator_free(op: *mut PqmkzOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Parses an expression in `x` or a preset name.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_function_parse(
    text: *const c_char,
    out: *mut *mut PqmkzFunction,
) -> PqmkzStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return Err(Failure::Null);
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| Error::Invalid("function text is not UTF-8".into()))?;
        let inner = Function::parse(text)?;
        write_out(out, Box::into_raw(Box::new(PqmkzFunction { inner })))?;
        Ok(())
    })
}

/// Evaluates `f` at `x`.
///
/// # Safety
/// `f` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_function_eval(
    f: *const PqmkzFunction,
    x: f64,
    out: *mut f64,
) -> PqmkzStatus {
    guard(|| {
        let f = as_ref(f)?;
        let v = f.inner.eval(x)?;
        write_out(out, v)?;
        Ok(())
    })
}

/// Releases a function; null is ignored.
///
/// # Safety
/// `f` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_function_free(f: *mut PqmkzFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// `M_{n,p,q}(f; x)` with its certificate.
///
/// # Safety
/// Handles must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_evaluate(
    op: *const PqmkzOperator,
    f: *const PqmkzFunction,
    x: f64,
    out: *mut PqmkzEvalOutcome,
) -> PqmkzStatus {
    guard(|| {
        let op = as_ref(op)?;
        let f = as_ref(f)?;
        if out.is_null() {
            return Err(Failure::Null);
        }
        let o = operator::evaluate(op.params, &f.inner, x, &op.policy)?;
        write_out(out, o.into())?;
        Ok(())
    })
}

/// Evaluates at `len` points. All points are attempted; the status is that of
/// the first failure, whose slot is left zeroed.
///
/// # Safety
/// `xs` and `out` must point to `len` elements.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_evaluate_grid(
    op: *const PqmkzOperator,
    f: *const PqmkzFunction,
    xs: *const f64,
    len: usize,
    out: *mut PqmkzEvalOutcome,
) -> PqmkzStatus {
    guard(|| {
        let op = as_ref(op)?;
        let f = as_ref(f)?;
        if len == 0 {
            return Ok(());
        }
        if xs.is_null() || out.is_null() {
            return Err(Failure::Null);
        }
        let xs = std::slice::from_raw_parts(xs, len);
        let out = std::slice::from_raw_parts_mut(out, len);
        let mut first = None;
        for (slot, r) in out
            .iter_mut()
            .zip(operator::evaluate_grid(op.params, &f.inner, xs, &op.policy))
        {
            match r {
                Ok(o) => *slot = o.into(),
                Err(e) => {
                    *slot = PqmkzEvalOutcome::default();
                    first.get_or_insert(e);
                }
            }
        }
        match first {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    })
}

/// `M((t - x)^2; x)`.
///
/// # Safety
/// `op` must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_central_second_moment(
    op: *const PqmkzOperator,
    x: f64,
    out: *mut f64,
) -> PqmkzStatus {
    guard(|| {
        let op = as_ref(op)?;
        if out.is_null() {
            return Err(Failure::Null);
        }
        let v = moments::central_second_moment(op.params, x, &op.policy)?;
        write_out(out, v)?;
        Ok(())
    })
}

/// `p^n/[n+1]_{p,q} x + (p - 1) x^2`; may be negative for `p < 1`.
///
/// # Safety
/// `op` must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_delta_n_sq(
    op: *const PqmkzOperator,
    x: f64,
    out: *mut f64,
) -> PqmkzStatus {
    guard(|| {
        let op = as_ref(op)?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange {
                name: "x",
                value: x,
                expected: "[0, 1]",
            }
            .into());
        }
        write_out(out, moments::delta_n_sq(op.params, x))?;
        Ok(())
    })
}

/// `[n]_{p,q}`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_pq_int(n: u64, p: f64, q: f64, out: *mut f64) -> PqmkzStatus {
    guard(|| {
        let pq = PQPair::new(p, q)?;
        write_out(out, calculus::pq_int(n, pq))?;
        Ok(())
    })
}

/// Gaussian `(p,q)`-binomial coefficient.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_pq_binomial(
    n: u64,
    k: u64,
    p: f64,
    q: f64,
    out: *mut f64,
) -> PqmkzStatus {
    guard(|| {
        let pq = PQPair::new(p, q)?;
        write_out(out, calculus::pq_binomial(n, k, pq)?)?;
        Ok(())
    })
}

/// `2 omega(f, sqrt(p^n/[n+1]_{p,q}))` on a lattice of `resolution` points.
///
/// # Safety
/// Handles must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pqmkz_uniform_bound(
    op: *const PqmkzOperator,
    f: *const PqmkzFunction,
    resolution: usize,
    out: *mut f64,
) -> PqmkzStatus {
    guard(|| {
        let op = as_ref(op)?;
        let f = as_ref(f)?;
        if out.is_null() {
            return Err(Failure::Null);
        }
        let v = bounds::uniform_bound(op.params, &f.inner, resolution)?;
        write_out(out, v)?;
        Ok(())
    })
}

/// Message for the last failing call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pqmkz_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pqmkz_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
