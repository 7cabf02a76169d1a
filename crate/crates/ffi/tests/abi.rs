use std::ffi::{CStr, CString};
use std::ptr;

use transonic_ffi::*;

fn last_error() -> String {
    let p = transonic_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(json: &str) -> (TransonicStatus, *mut TransonicConfig) {
    let text = CString::new(json).unwrap();
    let mut cfg = ptr::null_mut();
    let st = unsafe { transonic_config_from_json(text.as_ptr(), &mut cfg) };
    (st, cfg)
}

fn out_dir() -> (tempfile::TempDir, CString) {
    let tmp = tempfile::tempdir().unwrap();
    let path = CString::new(tmp.path().to_str().unwrap()).unwrap();
    (tmp, path)
}

#[test]
fn invalid_input_reports_status_and_message() {
    let (st, cfg) = config(r#"{"duct": {"n1": 1001}}"#);
    assert_eq!(st, TransonicStatus::Validation);
    assert!(cfg.is_null());
    assert!(last_error().contains("grid incompatible"));

    let (st, _) = config("{not json");
    assert_eq!(st, TransonicStatus::Validation);

    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { transonic_config_from_json(ptr::null(), &mut cfg) }, TransonicStatus::InvalidArgument);
    let (_, dir) = out_dir();
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { transonic_run_background(ptr::null(), dir.as_ptr(), &mut rep) }, TransonicStatus::InvalidArgument);
    assert!(last_error().contains("config is null"));
    assert_eq!(transonic_set_threads(0), TransonicStatus::InvalidArgument);

    let v = unsafe { CStr::from_ptr(transonic_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn background_run_exposes_residuals() {
    let (st, cfg) = config(r#"{"duct": {"n1": 1680}}"#);
    assert_eq!(st, TransonicStatus::Ok);
    assert!(transonic_last_error().is_null());
    let (tmp, dir) = out_dir();
    let mut rep = ptr::null_mut();
    unsafe {
        assert_eq!(transonic_run_background(cfg, dir.as_ptr(), &mut rep), TransonicStatus::Ok);
        let mut v = f64::NAN;
        let name = CString::new("mass_flux_defect").unwrap();
        assert_eq!(transonic_report_residual(rep, name.as_ptr(), &mut v), TransonicStatus::Ok);
        assert!(v <= 1e-10);
        let bogus = CString::new("bogus").unwrap();
        assert_eq!(transonic_report_residual(rep, bogus.as_ptr(), &mut v), TransonicStatus::NotFound);
        assert_eq!(transonic_report_sup_xi(rep, &mut v), TransonicStatus::NotFound);
        let (mut n, mut f) = (0, 0);
        assert_eq!(transonic_report_checks(rep, &mut n, &mut f), TransonicStatus::InvalidArgument);

        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(transonic_report_json(rep)).to_str().unwrap()).unwrap();
        assert_eq!(json["subcommand"], "background");
        assert!(tmp.path().join("background.csv").exists());
        transonic_report_free(rep);
        transonic_config_free(cfg);
    }
}

#[test]
fn unperturbed_potential_solve_is_sonic_at_the_origin() {
    let json = r#"{"duct": {"n1": 1680, "modes": 4, "symmetric": true}, "potential": {"eps": 0.0}}"#;
    let (st, cfg) = config(json);
    assert_eq!(st, TransonicStatus::Ok, "{}", last_error());
    let (_tmp, dir) = out_dir();
    let mut rep = ptr::null_mut();
    unsafe {
        assert_eq!(transonic_solve_potential(cfg, dir.as_ptr(), &mut rep), TransonicStatus::Ok, "{}", last_error());
        let mut xi = f64::NAN;
        assert_eq!(transonic_report_sup_xi(rep, &mut xi), TransonicStatus::Ok);
        assert_eq!(xi, 0.0);
        transonic_report_free(rep);
        transonic_config_free(cfg);
    }
}

#[test]
fn failed_checks_still_return_a_report() {
    let (st, cfg) = config(r#"{"duct": {"n1": 840, "modes": 2}}"#);
    assert_eq!(st, TransonicStatus::Ok);
    let (_tmp, dir) = out_dir();
    let mut rep = ptr::null_mut();
    unsafe {
        assert_eq!(transonic_verify(cfg, dir.as_ptr(), &mut rep), TransonicStatus::VerifyFailed);
        assert!(!rep.is_null());
        let (mut n, mut f) = (0, 0);
        assert_eq!(transonic_report_checks(rep, &mut n, &mut f), TransonicStatus::Ok);
        assert!(n > 10 && f == 1, "{n} checks, {f} failed");
        transonic_report_free(rep);
        transonic_config_free(cfg);
    }
}
