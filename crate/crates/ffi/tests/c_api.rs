use std::ffi::{CStr, CString};
use std::ptr;

use regen_ffi::*;

fn last_error() -> String {
    let p = regen_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn model(toml: &str) -> *mut RegenModel {
    let text = CString::new(toml).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { regen_model_from_toml(text.as_ptr(), &mut m) }, RegenStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(regen_version()) };
    assert_eq!(v.to_str().unwrap(), regen::VERSION);
}

#[test]
fn model_moments_and_errors() {
    let m = model("kind = \"poisson_count\"\nrate = 2.0");
    let (mut mu, mut a, mut s2) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { regen_model_known_moments(m, &mut mu, &mut a, &mut s2) }, RegenStatus::Ok);
    assert_eq!((mu, a, s2), (0.5, 2.0, 1.0));
    unsafe { regen_model_free(m) };

    let bad = CString::new("kind = \"poisson_count\"\nrate = -1.0").unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { regen_model_from_toml(bad.as_ptr(), &mut out) };
    assert_ne!(st, RegenStatus::Ok);
    assert!(out.is_null());
    assert!(last_error().contains("rate"));

    assert_eq!(
        unsafe { regen_model_from_toml(ptr::null(), &mut out) },
        RegenStatus::NullPointer
    );
    let unknown = CString::new("kind = \"nope\"").unwrap();
    assert_eq!(unsafe { regen_model_from_toml(unknown.as_ptr(), &mut out) }, RegenStatus::Config);
    unsafe { regen_model_free(ptr::null_mut()) };
}

#[test]
fn trajectory_roundtrip() {
    let m = model("kind = \"deterministic_drift\"\nduration = 1.0\nslope = 2.0");
    let mut tr = ptr::null_mut();
    assert_eq!(unsafe { regen_trajectory_simulate(m, 10.0, 1, 0, 1000, &mut tr) }, RegenStatus::Ok);
    let mut n = 0u64;
    let mut z = 0.0;
    unsafe {
        assert_eq!(regen_trajectory_count(tr, 3.5, &mut n), RegenStatus::Ok);
        assert_eq!(regen_trajectory_evaluate(tr, 3.5, &mut z), RegenStatus::Ok);
    }
    assert_eq!((n, z), (3, 7.0));
    assert_eq!(unsafe { regen_trajectory_evaluate(tr, 1e6, &mut z) }, RegenStatus::Domain);
    let mut short = ptr::null_mut();
    assert_eq!(unsafe { regen_trajectory_simulate(m, 100.0, 1, 0, 5, &mut short) }, RegenStatus::Budget);
    assert!(short.is_null());
    unsafe {
        regen_trajectory_free(tr);
        regen_model_free(m);
    }
}

#[test]
fn renewal_tables() {
    let pmf = [0.5, 0.5];
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { regen_renewal_arithmetic(pmf.as_ptr(), 2, 1.0, 3, &mut t) }, RegenStatus::Ok);
    assert_eq!(unsafe { regen_renewal_table_len(t) }, 4);
    let mut u = 0.0;
    assert_eq!(unsafe { regen_renewal_table_value(t, 3.0, &mut u) }, RegenStatus::Ok);
    assert!((u - 2.875).abs() < 1e-12);
    unsafe { regen_renewal_table_free(t) };

    let bad = [0.5, 0.4];
    assert_eq!(
        unsafe { regen_renewal_arithmetic(bad.as_ptr(), 2, 1.0, 3, &mut t) },
        RegenStatus::Validation
    );

    let m = model("kind = \"poisson_count\"\nrate = 1.0");
    assert_eq!(unsafe { regen_renewal_for_model(m, 0.01, 5.0, &mut t) }, RegenStatus::Ok);
    assert_eq!(unsafe { regen_renewal_table_value(t, 5.0, &mut u) }, RegenStatus::Ok);
    assert!((u - 6.0).abs() < 0.02, "{u}");
    unsafe {
        regen_renewal_table_free(t);
        regen_model_free(m);
    }
}

#[test]
fn ks_through_c() {
    let zeros = [0.0; 8];
    let mut d = 1.0;
    assert_eq!(unsafe { regen_ks_distance(zeros.as_ptr(), 8, 0.0, &mut d) }, RegenStatus::Ok);
    assert_eq!(d, 0.0);
    assert_eq!(unsafe { regen_ks_distance(zeros.as_ptr(), 0, 1.0, &mut d) }, RegenStatus::Validation);
    assert_eq!(unsafe { regen_ks_distance(ptr::null(), 3, 1.0, &mut d) }, RegenStatus::NullPointer);
}

#[test]
fn run_config_returns_report() {
    let cfg = CString::new(
        "[model]\nkind = \"arithmetic_count\"\n\n[[checks]]\nname = \"mean_expansion\"\nt_grid = [2.0, 4.0]\nreplicates = 1000\ncycles = 1000\n",
    )
    .unwrap();
    let mut code = -1;
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { regen_run_config(cfg.as_ptr(), 3, &mut code, &mut json) }, RegenStatus::Ok);
    assert_eq!(code, 0);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { regen_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["config", "verdicts", "timing", "version"] {
        assert!(v.get(key).is_some(), "{key}");
    }

    let bad = CString::new("[[checks]]\nname = \"nope\"\n").unwrap();
    assert_eq!(unsafe { regen_run_config(bad.as_ptr(), 3, &mut code, &mut json) }, RegenStatus::Config);
    assert!(json.is_null());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/regen.h")).unwrap();
    for f in [
        "regen_version",
        "regen_last_error_message",
        "regen_model_from_toml",
        "regen_model_free",
        "regen_model_known_moments",
        "regen_trajectory_simulate",
        "regen_trajectory_count",
        "regen_trajectory_evaluate",
        "regen_trajectory_free",
        "regen_renewal_arithmetic",
        "regen_renewal_for_model",
        "regen_renewal_table_len",
        "regen_renewal_table_value",
        "regen_renewal_table_free",
        "regen_ks_distance",
        "regen_run_config",
        "regen_string_free",
        "typedef struct RegenModel RegenModel;",
        "REGEN_STATUS_BUDGET = 5",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
}
