//! C ABI over `corrkit`.
//!
//! Conventions:
//! - Every fallible function returns a [`CkStatus`] and writes its result
//!   through an out-pointer. On failure the out-pointer is left untouched
//!   and [`ck_last_error_message`] describes the error on this thread.
//! - Correlator specs and calibration models are opaque handles created by
//!   `*_parse` / `*_load` / `*_calibrate` and released with `*_free`.
//! - Arrays are passed as pointer plus length. A null pointer is accepted
//!   only when the length is zero.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use corrkit::calibration::{self, CalibrationModel};
use corrkit::{metrics, price, wht, CorrelatorSpec, Error, Family, PwlMixture, RngStream};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    LengthMismatch = 4,
    Numeric = 5,
    Io = 6,
    Parse = 7,
    SpecMismatch = 8,
    Version = 9,
    Panic = 10,
}

/// Opaque correlator descriptor.
pub struct CkSpec(CorrelatorSpec);

/// Opaque calibrated inverse map.
pub struct CkModel(CalibrationModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CkStatus {
    match e {
        Error::Parameter(_) | Error::Empty(_) | Error::Degenerate(_) => CkStatus::InvalidParameter,
        Error::Domain(_) => CkStatus::Domain,
        Error::LengthMismatch { .. } => CkStatus::LengthMismatch,
        Error::Numeric { .. } => CkStatus::Numeric,
        Error::SpecMismatch { .. } => CkStatus::SpecMismatch,
        Error::Parse { .. } => CkStatus::Parse,
        Error::Version { .. } => CkStatus::Version,
        Error::Io(_) | Error::Csv(_) => CkStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
    Utf8,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> CkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CkStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            CkStatus::NullPointer
        }
        Ok(Err(Fail::Utf8)) => {
            set_last_error("string argument is not valid UTF-8".into());
            CkStatus::InvalidParameter
        }
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            CkStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8)
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length including the NUL,
/// or 0 when no error has been recorded.
#[no_mangle]
pub unsafe extern "C" fn ck_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Parses a descriptor such as `"l1"`, `"mp:gamma=1.45"` or
/// `"mix:w=0.5,0.5;alpha=0,2"`.
#[no_mangle]
pub unsafe extern "C" fn ck_spec_parse(
    descriptor: *const c_char,
    out: *mut *mut CkSpec,
) -> CkStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec: CorrelatorSpec = string(descriptor, "descriptor")?.parse()?;
        *out = Box::into_raw(Box::new(CkSpec(spec)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ck_spec_free(spec: *mut CkSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Single-pair score `f(x, y)`.
#[no_mangle]
pub unsafe extern "C" fn ck_correlator_f(
    spec: *const CkSpec,
    x: f64,
    y: f64,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        let s = in_ref(spec, "spec")?;
        *out_ref(out, "out")? = corrkit::pwl::correlator_f(x, y, &s.0)?;
        Ok(())
    })
}

/// Mean score over `len` pairs.
#[no_mangle]
pub unsafe extern "C" fn ck_batch_score(
    spec: *const CkSpec,
    xs: *const f64,
    ys: *const f64,
    len: usize,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        let s = in_ref(spec, "spec")?;
        let (xs, ys) = (slice(xs, len, "xs")?, slice(ys, len, "ys")?);
        *out_ref(out, "out")? = corrkit::pwl::batch_score(xs, ys, &s.0)?;
        Ok(())
    })
}

unsafe fn mixture(
    weights: *const f64,
    offsets: *const f64,
    len: usize,
) -> Result<PwlMixture, Fail> {
    let w = slice(weights, len, "weights")?.to_vec();
    let a = slice(offsets, len, "offsets")?.to_vec();
    Ok(PwlMixture::new(w, a)?)
}

/// Expected output `g(R)` of the mixture with `len` terms under Gaussian inputs.
#[no_mangle]
pub unsafe extern "C" fn ck_g_of_r(
    weights: *const f64,
    offsets: *const f64,
    len: usize,
    r: f64,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        let m = mixture(weights, offsets, len)?;
        *out_ref(out, "out")? = price::g_of_r(r, &m)?;
        Ok(())
    })
}

/// Slope `dg/dR` of the mixture's expected output.
#[no_mangle]
pub unsafe extern "C" fn ck_dg_dr(
    weights: *const f64,
    offsets: *const f64,
    len: usize,
    r: f64,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        let m = mixture(weights, offsets, len)?;
        *out_ref(out, "out")? = price::dg_dr(r, &m)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ck_g_l1_closed(r: f64, out: *mut f64) -> CkStatus {
    guard(|| {
        *out_ref(out, "out")? = price::g_l1_closed(r)?;
        Ok(())
    })
}

/// In-place normalized Walsh–Hadamard transform; `len` must be a power of two.
#[no_mangle]
pub unsafe extern "C" fn ck_fwht(data: *mut f64, len: usize) -> CkStatus {
    guard(|| {
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let v = std::slice::from_raw_parts_mut(data, len);
        wht::fwht_in_place(v)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ck_fisher_info(r: f64, out: *mut f64) -> CkStatus {
    guard(|| {
        *out_ref(out, "out")? = metrics::fisher_info(r)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ck_crb_sigma(r: f64, n: usize, out: *mut f64) -> CkStatus {
    guard(|| {
        *out_ref(out, "out")? = metrics::crb_sigma(r, n)?;
        Ok(())
    })
}

/// Calibrates `spec` on Gaussian inputs with the default grid, batch size,
/// trial count and degree.
#[no_mangle]
pub unsafe extern "C" fn ck_model_calibrate(
    spec: *const CkSpec,
    seed: u64,
    use_wht: bool,
    out: *mut *mut CkModel,
) -> CkStatus {
    guard(|| {
        let s = in_ref(spec, "spec")?;
        let out = out_ref(out, "out")?;
        let m =
            calibration::calibrate_default(&s.0, Family::Gaussian, RngStream::new(seed), use_wht)?;
        *out = Box::into_raw(Box::new(CkModel(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ck_model_load(path: *const c_char, out: *mut *mut CkModel) -> CkStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let m = calibration::load_model(Path::new(string(path, "path")?))?;
        *out = Box::into_raw(Box::new(CkModel(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ck_model_save(model: *const CkModel, path: *const c_char) -> CkStatus {
    guard(|| {
        let m = in_ref(model, "model")?;
        calibration::save_model(&m.0, Path::new(string(path, "path")?))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ck_model_free(model: *mut CkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Maps a raw score to a correlation in `[-1, 1]`.
#[no_mangle]
pub unsafe extern "C" fn ck_model_invert(model: *const CkModel, y: f64, out: *mut f64) -> CkStatus {
    guard(|| {
        let m = in_ref(model, "model")?;
        *out_ref(out, "out")? = m.0.invert(y);
        Ok(())
    })
}

/// Correlation estimate for `len` pairs. Fails with
/// `CK_STATUS_SPEC_MISMATCH` if the model was calibrated for another spec.
#[no_mangle]
pub unsafe extern "C" fn ck_estimate_r(
    model: *const CkModel,
    spec: *const CkSpec,
    xs: *const f64,
    ys: *const f64,
    len: usize,
    use_wht: bool,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        let m = in_ref(model, "model")?;
        let s = in_ref(spec, "spec")?;
        let (xs, ys) = (slice(xs, len, "xs")?, slice(ys, len, "ys")?);
        *out_ref(out, "out")? = calibration::estimate_r(xs, ys, &s.0, &m.0, use_wht)?;
        Ok(())
    })
}
