use std::ffi::{c_char, CString};
use std::ptr;

use locper_ffi::*;

fn last_error() -> String {
    unsafe {
        let n = locper_last_error(ptr::null_mut(), 0);
        let mut buf = vec![0u8; n + 1];
        locper_last_error(buf.as_mut_ptr() as *mut c_char, buf.len());
        String::from_utf8(buf[..n].to_vec()).unwrap()
    }
}

fn field(id: &str, params: &[(&str, f64)]) -> *mut LocperField {
    let id = CString::new(id).unwrap();
    let names: Vec<CString> = params.iter().map(|(k, _)| CString::new(*k).unwrap()).collect();
    let keys: Vec<*const c_char> = names.iter().map(|c| c.as_ptr()).collect();
    let values: Vec<f64> = params.iter().map(|(_, v)| *v).collect();
    let mut f = ptr::null_mut();
    let s = unsafe { locper_field_new(id.as_ptr(), keys.as_ptr(), values.as_ptr(), params.len(), &mut f) };
    assert_eq!(s, LocperStatus::Ok, "{}", last_error());
    f
}

#[test]
fn field_lifecycle_and_eval() {
    let f = field("constant", &[("a12", 0.25), ("a21", -0.5)]);
    unsafe {
        let mut d = 0;
        assert_eq!(locper_field_dim(f, &mut d), LocperStatus::Ok);
        assert_eq!(d, 2);
        let mut a = [0.0; 4];
        let x = [0.1, 0.2];
        assert_eq!(locper_field_eval(f, x.as_ptr(), x.as_ptr(), a.as_mut_ptr()), LocperStatus::Ok);
        assert_eq!(a, [1.0, 0.25, -0.5, 1.0]);
        locper_field_free(f);
        locper_field_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_codes_with_messages() {
    unsafe {
        let id = CString::new("no_such_family").unwrap();
        let mut f = ptr::null_mut();
        assert_eq!(locper_field_new(id.as_ptr(), ptr::null(), ptr::null(), 0, &mut f), LocperStatus::Validation);
        assert!(f.is_null());
        assert!(last_error().contains("no_such_family"));
        assert_eq!(
            locper_field_new(ptr::null(), ptr::null(), ptr::null(), 0, &mut f),
            LocperStatus::NullPointer
        );
        let mut d = 0;
        assert_eq!(locper_field_dim(ptr::null(), &mut d), LocperStatus::NullPointer);

        let text = CString::new("[coefficient]\nfamily = constant\n[sweep]\neps = 0.3\n").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(locper_config_parse(text.as_ptr(), &mut c), LocperStatus::Validation);
        assert!(last_error().starts_with("line 4"), "{}", last_error());

        let mut fit = LocperFit::default();
        let e = [0.5, 0.25];
        assert_eq!(locper_fit_rate(e.as_ptr(), e.as_ptr(), 2, &mut fit), LocperStatus::InvalidArgument);
        let path = CString::new("/nonexistent/dir/cfg.ini").unwrap();
        assert_eq!(locper_config_load(path.as_ptr(), &mut c), LocperStatus::Io);
    }
}

#[test]
fn effective_matrix_of_one_dimensional_family() {
    let f = field("separable_1d", &[("s", 0.0)]);
    unsafe {
        let mut buf = [0.0; 4];
        let mut len = 0;
        let s = locper_effective_matrix(f, 4, 64, buf.as_mut_ptr(), buf.len(), &mut len);
        assert_eq!(s, LocperStatus::Ok, "{}", last_error());
        assert_eq!(len, 4);
        assert!(buf.iter().all(|v| (v - 3f64.sqrt()).abs() < 1e-8));
        let mut small = [0.0; 2];
        assert_eq!(
            locper_effective_matrix(f, 4, 64, small.as_mut_ptr(), 2, &mut len),
            LocperStatus::InvalidArgument
        );
        locper_field_free(f);
    }
}

#[test]
fn sweep_report_and_fit() {
    let text = CString::new(
        "[coefficient]\nfamily = separable_1d\n[grids]\nn_x = 8\nn_y = 32\nn_f = 16\n[sweep]\neps_denominators = 4, 8, 16\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(locper_config_parse(text.as_ptr(), &mut c), LocperStatus::Ok);
        let mut n = 0;
        locper_config_eps_count(c, &mut n);
        assert_eq!(n, 3);
        let mut r = ptr::null_mut();
        assert_eq!(locper_sweep_run(c, &mut r), LocperStatus::Ok, "{}", last_error());
        locper_report_len(r, &mut n);
        assert_eq!(n, 3);
        let mut p = LocperPoint::default();
        assert_eq!(locper_report_point(r, 0, &mut p), LocperStatus::Ok);
        assert_eq!(p.eps_denominator, 4);
        assert!(p.e2 < p.e0);
        assert_eq!(locper_report_point(r, 3, &mut p), LocperStatus::InvalidArgument);
        let mut fit = LocperFit::default();
        assert_eq!(locper_report_fit(r, LocperCurve::E2, &mut fit), LocperStatus::Ok);
        assert!(fit.slope > 1.5);
        let mut flag = 1;
        locper_report_is_floor(r, &mut flag);
        assert_eq!(flag, 0);
        locper_report_is_partial(r, &mut flag);
        assert_eq!(flag, 0);
        let out = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(locper_report_write(r, out.as_ptr()), LocperStatus::Ok);
        assert!(dir.path().join("convergence.csv").exists());
        locper_report_free(r);
        locper_config_free(c);
    }
}

#[test]
fn solver_failure_returns_partial_report() {
    let text = CString::new(
        "[coefficient]\nfamily = separable_1d\n[grids]\nn_x = 8\nn_y = 32\nn_f = 16\n[sweep]\neps_denominators = 4, 8, 16\n[solver]\npower_max_iter = 1\n",
    )
    .unwrap();
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(locper_config_parse(text.as_ptr(), &mut c), LocperStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(locper_sweep_run(c, &mut r), LocperStatus::Solver);
        assert!(last_error().contains("eps = 1/4"), "{}", last_error());
        assert!(!r.is_null());
        let mut flag = 0;
        locper_report_is_partial(r, &mut flag);
        assert_eq!(flag, 1);
        locper_report_free(r);
        locper_config_free(c);
    }
}

#[test]
fn fit_rate_matches_closed_form() {
    let eps = [0.125, 0.0625, 0.03125];
    let err: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(1.5)).collect();
    let mut fit = LocperFit::default();
    unsafe {
        assert_eq!(locper_fit_rate(eps.as_ptr(), err.as_ptr(), 3, &mut fit), LocperStatus::Ok);
    }
    assert!((fit.slope - 1.5).abs() < 1e-12);
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
}
