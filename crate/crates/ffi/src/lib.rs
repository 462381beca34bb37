//! C ABI for `cevpolar`.
//!
//! Every fallible function returns a [`CevStatus`] and writes its result
//! through an out-pointer. On failure, [`cev_last_error`] describes the
//! error for the calling thread. Handles are opaque and owned by the caller,
//! who releases them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cevpolar::config::ModelSpec;
use cevpolar::limits::{limit_law_of, normalization, LimitLaw};
use cevpolar::model::{PolarModel, WeightedSample};
use cevpolar::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CevStatus {
    Ok = 0,
    NullPointer = 1,
    /// Out-of-domain argument or an invalid model.
    InvalidArgument = 2,
    /// Malformed or unreadable configuration.
    Config = 3,
    /// Quadrature failure, non-finite integrand or degenerate weights.
    Numeric = 4,
    Panic = 5,
}

/// A polar model.
pub struct CevModel {
    inner: PolarModel,
}

/// A limit law `H_{eta,zeta}`.
pub struct CevLimitLaw {
    inner: LimitLaw,
}

/// Weighted draws of `(X, Y)` given `X > t`.
pub struct CevWeightedSample {
    inner: WeightedSample,
}

/// Normalization at a threshold: `X` is centred at `t` and scaled by `psi_t`,
/// `Y` is centred at `m_t` and scaled by `a_t`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CevFrame {
    pub t: f64,
    pub m_t: f64,
    pub psi_t: f64,
    pub a_t: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CevStatus {
    match e {
        _ if e.is_numeric() => CevStatus::Numeric,
        Error::Config(_) | Error::Json(_) | Error::Io(_) => CevStatus::Config,
        _ => CevStatus::InvalidArgument,
    }
}

struct Fail(CevStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CevStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> CevStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CevStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            CevStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Boxes `value` into a new handle at `out`.
unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cev_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cev_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a model from JSON: `{"polar": {...}}` or `{"density": {...}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_model_from_json(json: *const c_char, out: *mut *mut CevModel) -> CevStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Fail(CevStatus::Config, "json is not UTF-8".into()))?;
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| Fail(CevStatus::Config, e.to_string()))?;
        let inner = spec.polar()?;
        put(out, CevModel { inner })
    })
}

/// # Safety
/// `model` must come from [`cev_model_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cev_model_free(model: *mut CevModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Normalization of the model at threshold `t`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_model_frame(model: *const CevModel, t: f64, out: *mut CevFrame) -> CevStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let f = normalization(&m.inner, t)?;
        write(
            out,
            CevFrame {
                t: f.t,
                m_t: f.m_t,
                psi_t: f.psi_t,
                a_t: f.a_t,
            },
        )
    })
}

/// `P(X ≤ t + psi_t x_std, Y ≤ m_t + a_t y_std | X > t)` by quadrature.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_model_conditional_cdf(
    model: *const CevModel,
    t: f64,
    x_std: f64,
    y_std: f64,
    out: *mut f64,
) -> CevStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let frame = normalization(&m.inner, t)?;
        write(out, m.inner.conditional_cdf(&frame, x_std, y_std)?)
    })
}

/// `P(X > x)` by quadrature.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_model_survival_x(model: *const CevModel, x: f64, out: *mut f64) -> CevStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, m.inner.survival_x(x)?)
    })
}

/// The limit law of the model.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_model_limit_law(model: *const CevModel, out: *mut *mut CevLimitLaw) -> CevStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let inner = limit_law_of(&m.inner)?;
        put(out, CevLimitLaw { inner })
    })
}

/// Draws `n` weighted pairs given `X > t`, seeded by `seed`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_model_sample_conditional(
    model: *const CevModel,
    t: f64,
    n: usize,
    seed: u64,
    out: *mut *mut CevWeightedSample,
) -> CevStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = m.inner.sample_conditional(t, n, &mut rng)?;
        put(out, CevWeightedSample { inner })
    })
}

/// Symmetric law with `eta > 1`, `zeta > 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cev_limit_law_new(eta: f64, zeta: f64, out: *mut *mut CevLimitLaw) -> CevStatus {
    guard(|| {
        let inner = LimitLaw::new(eta, zeta)?;
        put(out, CevLimitLaw { inner })
    })
}

/// # Safety
/// `law` must be a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cev_limit_law_free(law: *mut CevLimitLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// # Safety
/// `law` must be a live handle; `eta` and `zeta` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_limit_law_params(law: *const CevLimitLaw, eta: *mut f64, zeta: *mut f64) -> CevStatus {
    guard(|| {
        let l = deref(law, "law")?;
        write(eta, l.inner.eta)?;
        write(zeta, l.inner.zeta)
    })
}

/// # Safety
/// `law` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_limit_law_cdf(law: *const CevLimitLaw, y: f64, out: *mut f64) -> CevStatus {
    guard(|| write(out, deref(law, "law")?.inner.cdf(y)))
}

/// # Safety
/// `law` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_limit_law_pdf(law: *const CevLimitLaw, y: f64, out: *mut f64) -> CevStatus {
    guard(|| write(out, deref(law, "law")?.inner.pdf(y)))
}

/// # Safety
/// `law` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cev_limit_law_quantile(law: *const CevLimitLaw, p: f64, out: *mut f64) -> CevStatus {
    guard(|| write(out, deref(law, "law")?.inner.quantile(p)?))
}

/// # Safety
/// `sample` must be a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cev_sample_free(sample: *mut CevWeightedSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of draws; 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cev_sample_len(sample: *const CevWeightedSample) -> usize {
    sample.as_ref().map_or(0, |s| s.inner.len())
}

/// Kish effective sample size; NaN for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cev_sample_effective_size(sample: *const CevWeightedSample) -> f64 {
    sample.as_ref().map_or(f64::NAN, |s| s.inner.effective_size)
}

/// Copies the draws into caller arrays of length `len`, which must be at
/// least [`cev_sample_len`]. Weights are normalized to sum to one.
///
/// # Safety
/// `sample` must be a live handle; `x`, `y` and `weight` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cev_sample_copy(
    sample: *const CevWeightedSample,
    x: *mut f64,
    y: *mut f64,
    weight: *mut f64,
    len: usize,
) -> CevStatus {
    guard(|| {
        let s = &deref(sample, "sample")?.inner;
        if x.is_null() || y.is_null() || weight.is_null() {
            return Err(null("output array"));
        }
        if len < s.len() {
            return Err(Fail(
                CevStatus::InvalidArgument,
                format!("buffer of length {len} is shorter than the sample ({})", s.len()),
            ));
        }
        for (i, (&(a, b), &w)) in s.pairs.iter().zip(&s.weights).enumerate() {
            x.add(i).write(a);
            y.add(i).write(b);
            weight.add(i).write(w);
        }
        Ok(())
    })
}
