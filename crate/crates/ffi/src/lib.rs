//! C interface to lumpkit.
//!
//! Handles are opaque and owned by the caller once returned; release each
//! with its `_free` function. Every fallible call returns an [`LkStatus`];
//! on failure `lk_last_error_message` describes the error for the calling
//! thread. Matrices are exchanged as dense row-major `double` buffers.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::{c_char, size_t};
use lumpkit::jacobian::{basis_from_points, sample_jacobian_basis, JacobianBasis, SamplingDomain};
use lumpkit::lumping::{self, EpsilonSearchConfig, LumpingMatrix};
use lumpkit::model::OdeSystem;
use lumpkit::parse_model;

/// Result of every fallible call. Values 1–3 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkStatus {
    LkOk = 0,
    LkParseError = 1,
    LkNumericError = 2,
    LkIoError = 3,
    LkInvalidArgument = 4,
    LkNullPointer = 5,
    LkPanic = 6,
}

/// A parsed model.
pub struct LkModel {
    inner: OdeSystem,
}

/// A spanning set of a model's Jacobian space.
pub struct LkBasis {
    inner: JacobianBasis,
}

/// A lumping matrix with orthonormal rows.
pub struct LkLumping {
    inner: LumpingMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type FfiResult<T> = Result<T, (LkStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> LkStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LkStatus::LkOk,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LkStatus::LkPanic
        }
    }
}

fn numeric<E: std::fmt::Display>(e: E) -> (LkStatus, String) {
    (LkStatus::LkNumericError, e.to_string())
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| (LkStatus::LkNullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| (LkStatus::LkNullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: size_t, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err((LkStatus::LkNullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: size_t, what: &str) -> FfiResult<&'a mut [f64]> {
    if p.is_null() {
        return Err((LkStatus::LkNullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err((LkStatus::LkNullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LkStatus::LkInvalidArgument, format!("{what} is not UTF-8")))
}

fn check_len(found: usize, expected: usize, what: &str) -> FfiResult<()> {
    if found != expected {
        return Err((LkStatus::LkInvalidArgument, format!("{what} has length {found}, expected {expected}")));
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn lk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse model text.
#[no_mangle]
pub unsafe extern "C" fn lk_model_parse(text: *const c_char, out: *mut *mut LkModel) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let text = c_str(text, "text")?;
        let inner = parse_model(text).map_err(|e| (LkStatus::LkParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(LkModel { inner }));
        Ok(())
    })
}

/// Read and parse a model file.
#[no_mangle]
pub unsafe extern "C" fn lk_model_load(path: *const c_char, out: *mut *mut LkModel) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let text = std::fs::read_to_string(path).map_err(|e| (LkStatus::LkIoError, format!("{path}: {e}")))?;
        let inner = parse_model(&text).map_err(|e| (LkStatus::LkParseError, format!("{path}: {e}")))?;
        *out = Box::into_raw(Box::new(LkModel { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lk_model_free(model: *mut LkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of state variables, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lk_model_dim(model: *const LkModel) -> size_t {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Number of observable rows, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lk_model_observable_count(model: *const LkModel) -> size_t {
    model.as_ref().map_or(0, |m| m.inner.observable_count())
}

/// `out[i] = f_i(x)`; both buffers have length `dim`.
#[no_mangle]
pub unsafe extern "C" fn lk_model_eval_drift(model: *const LkModel, x: *const f64, n: size_t, out: *mut f64) -> LkStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        check_len(n, m.dim(), "x")?;
        let x = slice(x, n, "x")?;
        let out = slice_mut(out, n, "out")?;
        m.eval_drift_into(x, out).map_err(numeric)
    })
}

/// Jacobian at `x`, row-major into `out` of length `dim²`; row `i` is the
/// gradient of `f_i`.
#[no_mangle]
pub unsafe extern "C" fn lk_model_jacobian(model: *const LkModel, x: *const f64, n: size_t, out: *mut f64) -> LkStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner;
        check_len(n, m.dim(), "x")?;
        let x = slice(x, n, "x")?;
        let out = slice_mut(out, n * n, "out")?;
        let (_, jac) = m.eval_drift_dual(x).map_err(numeric)?;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = jac[(i, j)];
            }
        }
        Ok(())
    })
}

/// Random Jacobian sampling in the default box, stopping after
/// `confirmations` consecutive dependent samples.
#[no_mangle]
pub unsafe extern "C" fn lk_basis_sample(
    model: *const LkModel,
    seed: u64,
    confirmations: size_t,
    out: *mut *mut LkBasis,
) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let m = &as_ref(model, "model")?.inner;
        let dom = SamplingDomain::default_for(m)
            .with_seed(seed)
            .with_confirmations(confirmations)
            .map_err(|e| (LkStatus::LkInvalidArgument, e.to_string()))?;
        let inner = sample_jacobian_basis(m, &dom).map_err(numeric)?;
        *out = Box::into_raw(Box::new(LkBasis { inner }));
        Ok(())
    })
}

/// Basis from Jacobians at `count` points given row-major (`count × dim`).
#[no_mangle]
pub unsafe extern "C" fn lk_basis_from_points(
    model: *const LkModel,
    points: *const f64,
    count: size_t,
    out: *mut *mut LkBasis,
) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let m = &as_ref(model, "model")?.inner;
        let dim = m.dim();
        let flat = slice(points, count * dim, "points")?;
        let pts: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        let inner = basis_from_points(m, &pts).map_err(numeric)?;
        *out = Box::into_raw(Box::new(LkBasis { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lk_basis_len(basis: *const LkBasis) -> size_t {
    basis.as_ref().map_or(0, |b| b.inner.len())
}

#[no_mangle]
pub unsafe extern "C" fn lk_basis_free(basis: *mut LkBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Constrained lumping of `model`'s observables at tolerance `epsilon`.
#[no_mangle]
pub unsafe extern "C" fn lk_lump(
    model: *const LkModel,
    basis: *const LkBasis,
    epsilon: f64,
    out: *mut *mut LkLumping,
) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let m = &as_ref(model, "model")?.inner;
        let b = &as_ref(basis, "basis")?.inner;
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err((LkStatus::LkInvalidArgument, format!("epsilon must be non-negative, got {epsilon}")));
        }
        let inner = lumping::approximate_lump(b, m.observables(), epsilon).map_err(numeric)?;
        *out = Box::into_raw(Box::new(LkLumping { inner }));
        Ok(())
    })
}

/// Smallest tolerance at which the lumping is the observable span.
#[no_mangle]
pub unsafe extern "C" fn lk_epsilon_max(model: *const LkModel, basis: *const LkBasis, out: *mut f64) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = &as_ref(model, "model")?.inner;
        let b = &as_ref(basis, "basis")?.inner;
        *out = lumping::epsilon_max(b, m.observables()).map_err(numeric)?;
        Ok(())
    })
}

/// Bisection for the tolerance at which the size first drops to `cutoff`.
/// `epsilon_out` and `iterations_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn lk_find_epsilon(
    model: *const LkModel,
    basis: *const LkBasis,
    cutoff: size_t,
    d_min: f64,
    out: *mut *mut LkLumping,
    epsilon_out: *mut f64,
    iterations_out: *mut size_t,
) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let m = &as_ref(model, "model")?.inner;
        let b = &as_ref(basis, "basis")?.inner;
        let cfg = EpsilonSearchConfig::new(cutoff, d_min).map_err(|e| (LkStatus::LkInvalidArgument, e.to_string()))?;
        let search = lumping::find_epsilon(b, m.observables(), &cfg).map_err(numeric)?;
        if let Some(e) = epsilon_out.as_mut() {
            *e = search.epsilon;
        }
        if let Some(i) = iterations_out.as_mut() {
            *i = search.iterations;
        }
        *out = Box::into_raw(Box::new(LkLumping { inner: search.lumping }));
        Ok(())
    })
}

/// Number of rows, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lk_lumping_size(lumping: *const LkLumping) -> size_t {
    lumping.as_ref().map_or(0, |l| l.inner.size())
}

/// Number of columns (the model dimension), 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lk_lumping_cols(lumping: *const LkLumping) -> size_t {
    lumping.as_ref().map_or(0, |l| l.inner.matrix().ncols())
}

/// Tolerance the lumping was computed with, NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn lk_lumping_epsilon(lumping: *const LkLumping) -> f64 {
    lumping.as_ref().map_or(f64::NAN, |l| l.inner.epsilon())
}

/// Copy the rows into `out`, row-major; `len` must equal `size × cols`.
#[no_mangle]
pub unsafe extern "C" fn lk_lumping_copy_rows(lumping: *const LkLumping, out: *mut f64, len: size_t) -> LkStatus {
    guard(|| {
        let l = &as_ref(lumping, "lumping")?.inner;
        let mat = l.matrix();
        check_len(len, mat.nrows() * mat.ncols(), "out")?;
        let out = slice_mut(out, len, "out")?;
        for (i, row) in mat.row_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[i * mat.ncols() + j] = *v;
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn lk_lumping_free(lumping: *mut LkLumping) {
    if !lumping.is_null() {
        drop(Box::from_raw(lumping));
    }
}

/// `‖L f(LᵀL x) − L f(x)‖` at `x` of length `dim`.
#[no_mangle]
pub unsafe extern "C" fn lk_deviation(
    model: *const LkModel,
    lumping: *const LkLumping,
    x: *const f64,
    n: size_t,
    out: *mut f64,
) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = &as_ref(model, "model")?.inner;
        let l = &as_ref(lumping, "lumping")?.inner;
        check_len(n, m.dim(), "x")?;
        check_len(l.matrix().ncols(), m.dim(), "lumping columns")?;
        let x = slice(x, n, "x")?;
        *out = lumping::deviation(m, l, x).map_err(numeric)?;
        Ok(())
    })
}
