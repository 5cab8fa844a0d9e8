//! C interface to the auxspline sampler.
//!
//! Datasets and fits live behind opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`AuxStatus`]; on failure [`aux_last_error`] describes what went wrong on
//! the calling thread. Array outputs use a caller buffer plus capacity: the
//! required length is always written to `out_len`, and nothing is copied
//! when the buffer is too small.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use auxspline::config::RunConfig;
use auxspline::data::Dataset;
use auxspline::error::Error;
use auxspline::fit::{fit, Detail, Fit};
use auxspline::models::{return_level, GpdConfig};
use auxspline::simulate::{simulate_example, Example};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad input or configuration.
    InvalidArgument = 2,
    /// The sampler or a numerical routine failed.
    Numerical = 3,
    BufferTooSmall = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Curves available from a fit, all on the output grid.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxCurve {
    Grid = 0,
    Map = 1,
    Bma = 2,
    Lower = 3,
    Upper = 4,
}

/// Opaque dataset handle.
pub struct AuxDataset {
    data: Dataset,
}

/// Opaque handle to a finished fit.
pub struct AuxFit {
    fit: Fit,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: AuxStatus, msg: impl Into<String>) -> AuxStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> AuxStatus {
    match e {
        Error::Validation(_) | Error::BelowThreshold(_) => AuxStatus::InvalidArgument,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => AuxStatus::Io,
        _ => AuxStatus::Numerical,
    }
}

/// Runs `f`, turning library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), AuxStatus>) -> AuxStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AuxStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(AuxStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lib(e: Error) -> AuxStatus {
    fail(status_of(&e), e.to_string())
}

fn null(name: &str) -> AuxStatus {
    fail(AuxStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], AuxStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, AuxStatus> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        fail(
            AuxStatus::InvalidArgument,
            format!("{name} is not valid UTF-8"),
        )
    })
}

unsafe fn copy_out(
    values: &[f64],
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> Result<(), AuxStatus> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = values.len();
    if values.len() > cap {
        return Err(fail(
            AuxStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", values.len()),
        ));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn aux_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aux_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n` covariate/response pairs into a new dataset.
///
/// # Safety
/// `x` and `y` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aux_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut *mut AuxDataset,
) -> AuxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (x, y) = (slice(x, n, "x")?, slice(y, n, "y")?);
        let data = Dataset::new(x.to_vec(), y.to_vec()).map_err(lib)?;
        *out = Box::into_raw(Box::new(AuxDataset { data }));
        Ok(())
    })
}

/// Simulates one of the built-in examples (`sk1`, `dms2`, `dgk3`,
/// `poisson`) with its default noise level.
///
/// # Safety
/// `example` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aux_dataset_simulate(
    example: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut AuxDataset,
) -> AuxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let example: Example = text(example, "example")?
            .parse()
            .map_err(|e: Error| fail(AuxStatus::InvalidArgument, e.to_string()))?;
        let sim = simulate_example(example, n, None, seed).map_err(lib)?;
        *out = Box::into_raw(Box::new(AuxDataset { data: sim.data }));
        Ok(())
    })
}

/// Number of observations, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn aux_dataset_len(ds: *const AuxDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.data.n())
}

/// # Safety
/// `ds` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn aux_dataset_free(ds: *mut AuxDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Runs the sampler on `ds`. `config_toml` holds a run configuration in
/// the same TOML form the command line accepts; null means defaults.
///
/// # Safety
/// `ds` must be a live handle, `config_toml` null or NUL-terminated, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn aux_fit(
    ds: *const AuxDataset,
    config_toml: *const c_char,
    out: *mut *mut AuxFit,
) -> AuxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = ds.as_ref().ok_or_else(|| null("ds"))?;
        let config = if config_toml.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_toml(text(config_toml, "config_toml")?).map_err(lib)?
        };
        let fit = fit(&ds.data, &config, Detail::Full).map_err(lib)?;
        *out = Box::into_raw(Box::new(AuxFit { fit }));
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn aux_fit_free(fit: *mut AuxFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Recorded samples, or 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aux_fit_samples(fit: *const AuxFit) -> usize {
    fit.as_ref().map_or(0, |f| f.fit.chain.len())
}

/// Active knot locations of the MAP state, ascending.
///
/// # Safety
/// `fit` must be a live handle; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn aux_fit_map_knots(
    fit: *const AuxFit,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> AuxStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        copy_out(
            &f.fit.map_at_data.state.active_locations(),
            buf,
            cap,
            out_len,
        )
    })
}

/// Log posterior of every recorded sample, in order.
///
/// # Safety
/// `fit` must be a live handle; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn aux_fit_log_posterior(
    fit: *const AuxFit,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> AuxStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        let lp: Vec<f64> = f.fit.chain.samples.iter().map(|s| s.log_post).collect();
        copy_out(&lp, buf, cap, out_len)
    })
}

/// One curve on the output grid. Curves the configuration did not request
/// give `InvalidArgument`.
///
/// # Safety
/// `fit` must be a live handle; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn aux_fit_curve(
    fit: *const AuxFit,
    which: AuxCurve,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> AuxStatus {
    guard(|| {
        let f = &fit.as_ref().ok_or_else(|| null("fit"))?.fit;
        let values = match which {
            AuxCurve::Grid => Some(&f.grid),
            AuxCurve::Map => f.map.as_ref().map(|m| &m.curve),
            AuxCurve::Bma => f.bma.as_ref().map(|b| &b.curve),
            AuxCurve::Lower => f.bands.as_ref().map(|b| &b.lower),
            AuxCurve::Upper => f.bands.as_ref().map(|b| &b.upper),
        }
        .ok_or_else(|| {
            fail(
                AuxStatus::InvalidArgument,
                format!("{which:?} curve was not computed"),
            )
        })?;
        copy_out(values, buf, cap, out_len)
    })
}

/// Return level above the threshold for a GPD with scale `sigma` and shape
/// `xi`, exceeded once every `years` on average.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aux_return_level(
    sigma: f64,
    xi: f64,
    zeta_u: f64,
    n_y: f64,
    years: f64,
    out: *mut f64,
) -> AuxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = GpdConfig {
            zeta_u,
            n_y,
            ..GpdConfig::default()
        };
        config.validate().map_err(lib)?;
        if !(sigma > 0.0) {
            return Err(fail(AuxStatus::InvalidArgument, "sigma must be positive"));
        }
        *out = return_level(sigma, xi, &config, years).map_err(lib)?;
        Ok(())
    })
}
