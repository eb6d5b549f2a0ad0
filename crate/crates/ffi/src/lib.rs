//! C ABI for the sparse-detect library.
//!
//! Conventions: every fallible call returns an [`SdStatus`]; outputs are
//! written through out-pointers. Strings returned by the library must be
//! released with [`sd_string_free`], designs with [`sd_design_free`]. All
//! handles are opaque. No call unwinds across the boundary.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sparse_detect::boundary::{rho_star, BoundaryFamily};
use sparse_detect::binomial;
use sparse_detect::design::{audit_with_slack, load_design, make_anova, BinaryDesign};
use sparse_detect::error::Error;
use sparse_detect::model::LinkFunction;
use sparse_detect::risk::{run_experiment, ExperimentSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    /// Success.
    SdOk = 0,
    /// A null pointer, malformed string, or invalid configuration value.
    SdInvalidArgument = 1,
    /// An argument outside the mathematical domain of the operation.
    SdDomainError = 2,
    /// The operation is not defined for this input shape or size.
    SdUnsupported = 3,
    /// A file failed to parse.
    SdParseError = 4,
    /// An I/O failure.
    SdIoError = 5,
    /// An internal failure (should not happen; indicates a bug).
    SdInternal = 6,
}

/// Opaque design handle.
pub struct SdDesign {
    inner: BinaryDesign,
}

fn status_of(err: &Error) -> SdStatus {
    match err {
        Error::InvalidConfig(_) => SdStatus::SdInvalidArgument,
        Error::Domain(_) => SdStatus::SdDomainError,
        Error::UnsupportedConfig(_) | Error::UnsupportedSize(_) => SdStatus::SdUnsupported,
        Error::Parse { .. } => SdStatus::SdParseError,
        Error::Io { .. } => SdStatus::SdIoError,
    }
}

fn guard(body: impl FnOnce() -> SdStatus) -> SdStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(SdStatus::SdInternal)
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

fn write_string(out: *mut *mut c_char, text: String) -> SdStatus {
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            SdStatus::SdOk
        }
        Err(_) => SdStatus::SdInternal,
    }
}

/// Build a balanced design with `p` columns and `r` replicates per column.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sd_design_anova(
    p: usize,
    r: u64,
    out: *mut *mut SdDesign,
) -> SdStatus {
    guard(|| {
        if out.is_null() {
            return SdStatus::SdInvalidArgument;
        }
        match make_anova(p, r) {
            Ok(design) => {
                *out = Box::into_raw(Box::new(SdDesign { inner: design }));
                SdStatus::SdOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Load a design from `path`. `format` is "dense-csv" or "sparse-triplet".
///
/// # Safety
/// `path` and `format` must be NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_design_load(
    path: *const c_char,
    format: *const c_char,
    out: *mut *mut SdDesign,
) -> SdStatus {
    guard(|| {
        let (Some(path), Some(format)) = (read_str(path), read_str(format)) else {
            return SdStatus::SdInvalidArgument;
        };
        if out.is_null() {
            return SdStatus::SdInvalidArgument;
        }
        let format = match format.parse() {
            Ok(f) => f,
            Err(e) => return status_of(&e),
        };
        match load_design(std::path::Path::new(path), format) {
            Ok(design) => {
                *out = Box::into_raw(Box::new(SdDesign { inner: design }));
                SdStatus::SdOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Release a design handle. Null is accepted.
///
/// # Safety
/// `design` must be null or a pointer previously returned by this library
/// and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_design_free(design: *mut SdDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Number of rows of the design.
///
/// # Safety
/// `design` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_design_n(design: *const SdDesign) -> usize {
    (*design).inner.n()
}

/// Number of columns of the design.
///
/// # Safety
/// `design` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_design_p(design: *const SdDesign) -> usize {
    (*design).inner.p()
}

/// Audit the design structure; writes a JSON report.
///
/// # Safety
/// `design` must be a live handle; `out_json` must be valid. The returned
/// string must be released with `sd_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sd_design_audit_json(
    design: *const SdDesign,
    p_for_ratios: usize,
    slack: f64,
    out_json: *mut *mut c_char,
) -> SdStatus {
    guard(|| {
        if design.is_null() || out_json.is_null() {
            return SdStatus::SdInvalidArgument;
        }
        let report = audit_with_slack(&(*design).inner, p_for_ratios, slack);
        match serde_json::to_string(&report) {
            Ok(text) => write_string(out_json, text),
            Err(_) => SdStatus::SdInternal,
        }
    })
}

/// Boundary exponent rho*(alpha) for a family ("linear", "binary",
/// "binomial", "max-binary", "max-binomial") and link ("logistic",
/// "probit", "uniform").
///
/// # Safety
/// `family` and `link` must be NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_rho_star(
    family: *const c_char,
    link: *const c_char,
    alpha: f64,
    out: *mut f64,
) -> SdStatus {
    guard(|| {
        let (Some(family), Some(link)) = (read_str(family), read_str(link)) else {
            return SdStatus::SdInvalidArgument;
        };
        if out.is_null() {
            return SdStatus::SdInvalidArgument;
        }
        let link: LinkFunction = match link.parse() {
            Ok(l) => l,
            Err(e) => return status_of(&e),
        };
        let family = match BoundaryFamily::parse(family, link) {
            Ok(f) => f,
            Err(e) => return status_of(&e),
        };
        match rho_star(family, alpha) {
            Ok(v) => {
                *out = v;
                SdStatus::SdOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Exact `P(|Bin(r,1/2) - r/2| / sqrt(r/4) > t)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_binomial_survival(r: u64, t: f64, out: *mut f64) -> SdStatus {
    guard(|| {
        if out.is_null() {
            return SdStatus::SdInvalidArgument;
        }
        match binomial::standardized_survival(r, t) {
            Ok(v) => {
                *out = v;
                SdStatus::SdOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Exact two-sided binomial p-value of outcome `z` under `Bin(r, 1/2)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_binomial_pvalue(r: u64, z: u64, out: *mut f64) -> SdStatus {
    guard(|| {
        if out.is_null() {
            return SdStatus::SdInvalidArgument;
        }
        match binomial::two_sided_pvalue(r, z) {
            Ok(v) => {
                *out = v;
                SdStatus::SdOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Run a risk experiment described by a JSON spec; writes the result CSV
/// (header `test,t,A,risk,stderr,n_trials,seed`) to `out_csv`.
/// `workers` = 0 uses all cores.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out_csv` must be valid.
/// The returned string must be released with `sd_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sd_run_experiment_csv(
    spec_json: *const c_char,
    workers: usize,
    out_csv: *mut *mut c_char,
) -> SdStatus {
    guard(|| {
        let Some(spec_json) = read_str(spec_json) else {
            return SdStatus::SdInvalidArgument;
        };
        if out_csv.is_null() {
            return SdStatus::SdInvalidArgument;
        }
        let spec: ExperimentSpec = match serde_json::from_str(spec_json) {
            Ok(s) => s,
            Err(_) => return SdStatus::SdInvalidArgument,
        };
        let workers = if workers == 0 { None } else { Some(workers) };
        let curve = match run_experiment(&spec, workers) {
            Ok(c) => c,
            Err(e) => return status_of(&e),
        };
        let mut csv = String::from("test,t,A,risk,stderr,n_trials,seed\n");
        for pt in &curve.points {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                pt.test.as_str(),
                pt.t,
                pt.signal_strength,
                pt.risk,
                pt.stderr,
                pt.n_trials,
                curve.spec.seed
            ));
        }
        write_string(out_csv, csv)
    })
}

/// Release a string returned by this library. Null is accepted.
///
/// # Safety
/// `s` must be null or a string previously returned by this library and not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
