//! C ABI over `locper-core`.
//!
//! Objects are opaque handles created by `*_new` / `*_load` / `*_run` and released by the
//! matching `*_free`. Every fallible call returns a [`LocperStatus`]; on failure the message is
//! available from [`locper_last_error`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use locper_core::cell::build_cell_table;
use locper_core::coeff::{builtin_family, CoefficientField};
use locper_core::config::ExperimentConfig;
use locper_core::grid::TorusGrid;
use locper_core::harness::{emit_report, fit_rate, run_sweep, ConvergenceReport, ErrorCurve, RateFit, ReportPaths};
use locper_core::homogenize::effective_matrix;
use locper_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocperStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Solver = 4,
    Io = 5,
    Panic = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocperCurve {
    E0 = 0,
    E1 = 1,
    E2 = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocperFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocperPoint {
    pub eps_denominator: usize,
    pub eps: f64,
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
}

/// Opaque coefficient field.
pub struct LocperField(CoefficientField);

/// Opaque experiment configuration.
pub struct LocperConfig(ExperimentConfig);

/// Opaque convergence report, possibly partial.
pub struct LocperReport(ConvergenceReport);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut v = e.borrow_mut();
        v.clear();
        v.extend(msg.bytes().filter(|b| *b != 0));
    });
}

fn status_of(e: &Error) -> LocperStatus {
    if e.is_validation_failure() {
        LocperStatus::Validation
    } else if e.is_solver_failure() {
        LocperStatus::Solver
    } else if matches!(e, Error::Io { .. }) {
        LocperStatus::Io
    } else if matches!(e, Error::Fit(_) | Error::Mismatch(_)) {
        LocperStatus::InvalidArgument
    } else {
        LocperStatus::Internal
    }
}

struct Fail(LocperStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LocperStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LocperStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("panic inside locper");
            LocperStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LocperStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LocperStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
/// `len`) and returns its full length without the terminator. `buf` may be null to query
/// the length.
#[no_mangle]
pub unsafe extern "C" fn locper_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a builtin family. `keys` and `values` hold `n_params` parameter pairs and may be
/// null when `n_params` is 0.
#[no_mangle]
pub unsafe extern "C" fn locper_field_new(
    family: *const c_char,
    keys: *const *const c_char,
    values: *const f64,
    n_params: usize,
    out_field: *mut *mut LocperField,
) -> LocperStatus {
    guard(|| {
        let out_field = out(out_field, "out_field")?;
        *out_field = ptr::null_mut();
        let id = str_arg(family, "family")?;
        let mut params = BTreeMap::new();
        if n_params > 0 {
            if keys.is_null() || values.is_null() {
                return Err(null("keys or values"));
            }
            for i in 0..n_params {
                let k = str_arg(*keys.add(i), "parameter name")?;
                params.insert(k.to_string(), *values.add(i));
            }
        }
        let field = builtin_family(id, &params)?;
        *out_field = Box::into_raw(Box::new(LocperField(field)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn locper_field_free(field: *mut LocperField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

#[no_mangle]
pub unsafe extern "C" fn locper_field_dim(field: *const LocperField, out_dim: *mut usize) -> LocperStatus {
    guard(|| {
        *out(out_dim, "out_dim")? = handle(field, "field")?.0.dim();
        Ok(())
    })
}

/// Writes a(x, y) row-major into `out_matrix`, which holds dim² values; `x` and `y` hold dim.
#[no_mangle]
pub unsafe extern "C" fn locper_field_eval(
    field: *const LocperField,
    x: *const f64,
    y: *const f64,
    out_matrix: *mut f64,
) -> LocperStatus {
    guard(|| {
        let f = &handle(field, "field")?.0;
        if x.is_null() || y.is_null() || out_matrix.is_null() {
            return Err(null("x, y or out_matrix"));
        }
        let d = f.dim();
        let (mut px, mut py) = ([0.0; 2], [0.0; 2]);
        for i in 0..d {
            px[i] = *x.add(i);
            py[i] = *y.add(i);
        }
        let a = f.eval(px, py);
        for i in 0..d {
            for j in 0..d {
                *out_matrix.add(i * d + j) = a[i][j];
            }
        }
        Ok(())
    })
}

/// Effective matrix at the n_x^dim slow samples, row-major per sample, written to
/// `out_a0` (capacity `cap` values, at least n_x^dim · dim²). `out_len` receives the count.
#[no_mangle]
pub unsafe extern "C" fn locper_effective_matrix(
    field: *const LocperField,
    n_x: usize,
    n_y: usize,
    out_a0: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> LocperStatus {
    guard(|| {
        let f = &handle(field, "field")?.0;
        let out_len = out(out_len, "out_len")?;
        let d = f.dim();
        let cells = build_cell_table(
            f,
            TorusGrid::new(d, n_x)?,
            TorusGrid::new(d, n_y)?,
            f.preferred_scheme(),
            Default::default(),
        )?;
        let hom = effective_matrix(&cells, f)?;
        let need = hom.a0.len() * d * d;
        *out_len = need;
        if out_a0.is_null() || cap < need {
            return Err(Fail(
                LocperStatus::InvalidArgument,
                format!("output buffer holds {cap} values, {need} needed"),
            ));
        }
        for (s, a) in hom.a0.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    *out_a0.add(s * d * d + i * d + j) = a[i][j];
                }
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn locper_config_load(path: *const c_char, out_config: *mut *mut LocperConfig) -> LocperStatus {
    guard(|| {
        let out_config = out(out_config, "out_config")?;
        *out_config = ptr::null_mut();
        let cfg = ExperimentConfig::load(Path::new(str_arg(path, "path")?))?;
        *out_config = Box::into_raw(Box::new(LocperConfig(cfg)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn locper_config_parse(text: *const c_char, out_config: *mut *mut LocperConfig) -> LocperStatus {
    guard(|| {
        let out_config = out(out_config, "out_config")?;
        *out_config = ptr::null_mut();
        let cfg = ExperimentConfig::parse(str_arg(text, "text")?)?;
        *out_config = Box::into_raw(Box::new(LocperConfig(cfg)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn locper_config_free(config: *mut LocperConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

#[no_mangle]
pub unsafe extern "C" fn locper_config_eps_count(config: *const LocperConfig, out_count: *mut usize) -> LocperStatus {
    guard(|| {
        *out(out_count, "out_count")? = handle(config, "config")?.0.eps_denominators.len();
        Ok(())
    })
}

/// Runs the sweep. On a stage failure the partial report is still returned through
/// `out_report` (when any setup finished) together with the failure status.
#[no_mangle]
pub unsafe extern "C" fn locper_sweep_run(config: *const LocperConfig, out_report: *mut *mut LocperReport) -> LocperStatus {
    guard(|| {
        let out_report = out(out_report, "out_report")?;
        *out_report = ptr::null_mut();
        let cfg = &handle(config, "config")?.0;
        match run_sweep(cfg) {
            Ok(r) => {
                *out_report = Box::into_raw(Box::new(LocperReport(r)));
                Ok(())
            }
            Err(f) => {
                *out_report = Box::into_raw(Box::new(LocperReport(*f.partial)));
                Err(f.error.into())
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn locper_report_free(report: *mut LocperReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[no_mangle]
pub unsafe extern "C" fn locper_report_len(report: *const LocperReport, out_len: *mut usize) -> LocperStatus {
    guard(|| {
        *out(out_len, "out_len")? = handle(report, "report")?.0.points.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn locper_report_point(
    report: *const LocperReport,
    index: usize,
    out_point: *mut LocperPoint,
) -> LocperStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        let out_point = out(out_point, "out_point")?;
        let p = r.points.get(index).ok_or_else(|| {
            Fail(
                LocperStatus::InvalidArgument,
                format!("point {index} out of range ({} points)", r.points.len()),
            )
        })?;
        *out_point = LocperPoint {
            eps_denominator: p.denominator,
            eps: p.eps,
            e0: p.e0.value,
            e1: p.e1.value,
            e2: p.e2.value,
        };
        Ok(())
    })
}

/// 1 when the errors sit at the discretization floor, 0 otherwise.
#[no_mangle]
pub unsafe extern "C" fn locper_report_is_floor(report: *const LocperReport, out_flag: *mut i32) -> LocperStatus {
    guard(|| {
        *out(out_flag, "out_flag")? = handle(report, "report")?.0.floor as i32;
        Ok(())
    })
}

/// 1 when the sweep aborted and the report holds only the finished points.
#[no_mangle]
pub unsafe extern "C" fn locper_report_is_partial(report: *const LocperReport, out_flag: *mut i32) -> LocperStatus {
    guard(|| {
        *out(out_flag, "out_flag")? = handle(report, "report")?.0.is_partial() as i32;
        Ok(())
    })
}

fn to_c(f: RateFit) -> LocperFit {
    LocperFit {
        slope: f.slope,
        intercept: f.intercept,
        residual: f.residual,
    }
}

#[no_mangle]
pub unsafe extern "C" fn locper_report_fit(
    report: *const LocperReport,
    curve: LocperCurve,
    out_fit: *mut LocperFit,
) -> LocperStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        let out_fit = out(out_fit, "out_fit")?;
        let c = match curve {
            LocperCurve::E0 => ErrorCurve::E0,
            LocperCurve::E1 => ErrorCurve::E1,
            LocperCurve::E2 => ErrorCurve::E2,
        };
        *out_fit = to_c(r.fit(c)?);
        Ok(())
    })
}

/// Writes convergence.csv, timings.csv, summary.txt and loglog.dat into `dir`.
#[no_mangle]
pub unsafe extern "C" fn locper_report_write(report: *const LocperReport, dir: *const c_char) -> LocperStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        let dir = str_arg(dir, "dir")?;
        emit_report(r, &ReportPaths::in_dir(Path::new(dir)))?;
        Ok(())
    })
}

/// Least-squares slope of ln(errors) against ln(eps) over `n` points.
#[no_mangle]
pub unsafe extern "C" fn locper_fit_rate(
    eps: *const f64,
    errors: *const f64,
    n: usize,
    out_fit: *mut LocperFit,
) -> LocperStatus {
    guard(|| {
        let out_fit = out(out_fit, "out_fit")?;
        if n > 0 && (eps.is_null() || errors.is_null()) {
            return Err(null("eps or errors"));
        }
        let (e, v) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(eps, n), std::slice::from_raw_parts(errors, n))
        };
        *out_fit = to_c(fit_rate(e, v)?);
        Ok(())
    })
}
