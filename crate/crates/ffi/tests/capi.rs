use std::ffi::{CStr, CString};
use std::ptr;

use ftsbench::garch::GarchParams;
use ftsbench::synth::{gen_arma, gen_garch, ArmaParams};
use ftsbench_ffi::*;

fn last_error() -> String {
    let p = fts_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(fts_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn rmse_and_errors() {
    let p = [1.0, 2.0, 3.0];
    let a = [1.0, 2.0, 5.0];
    let mut out = 0.0;
    let s = unsafe { fts_rmse(p.as_ptr(), a.as_ptr(), 3, &mut out) };
    assert_eq!(s, FtsStatus::Ok);
    assert!((out - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!(fts_last_error().is_null());

    let s = unsafe { fts_rmse(ptr::null(), a.as_ptr(), 3, &mut out) };
    assert_eq!(s, FtsStatus::NullPointer);
    assert!(last_error().contains("predicted"));

    let s = unsafe { fts_rmse(p.as_ptr(), a.as_ptr(), 0, &mut out) };
    assert_ne!(s, FtsStatus::Ok);
}

#[test]
fn returns_from_closes() {
    let closes = [100.0, 110.0, 99.0];
    let mut out = [0.0; 2];
    let s = unsafe { fts_compute_returns(closes.as_ptr(), 3, FtsReturnKind::Simple, out.as_mut_ptr()) };
    assert_eq!(s, FtsStatus::Ok);
    assert!((out[0] - 0.1).abs() < 1e-15 && (out[1] + 0.1).abs() < 1e-15);
    let s = unsafe { fts_compute_returns(closes.as_ptr(), 3, FtsReturnKind::Log, out.as_mut_ptr()) };
    assert_eq!(s, FtsStatus::Ok);
    assert!((out[0] - 1.1f64.ln()).abs() < 1e-15);

    let bad = [100.0, -1.0];
    let s = unsafe { fts_compute_returns(bad.as_ptr(), 2, FtsReturnKind::Simple, out.as_mut_ptr()) };
    assert_eq!(s, FtsStatus::InvalidInput);
}

#[test]
fn arima_handle_roundtrip() {
    let y = gen_arma(&ArmaParams::new(0.0, vec![0.6], vec![], 1.0), 1000, 3).unwrap();
    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { fts_arima_fit(y.as_ptr(), y.len(), 1, 0, 0, &mut fit) }, FtsStatus::Ok);
    assert!(!fit.is_null());
    let (mut c, mut phi) = (0.0, [0.0]);
    let s = unsafe { fts_arima_coefficients(fit, &mut c, phi.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(s, FtsStatus::Ok);
    assert!((phi[0] - 0.6).abs() < 0.1, "{phi:?}");
    let (mut ll, mut aic) = (0.0, 0.0);
    let s = unsafe { fts_arima_criteria(fit, &mut ll, &mut aic, ptr::null_mut()) };
    assert_eq!(s, FtsStatus::Ok);
    assert!((aic - (2.0 * 3.0 - 2.0 * ll)).abs() < 1e-9);
    let mut f = [0.0; 4];
    let s = unsafe { fts_arima_forecast(fit, y.as_ptr(), y.len(), 4, f.as_mut_ptr()) };
    assert_eq!(s, FtsStatus::Ok);
    assert!(f.iter().all(|v| v.is_finite()));
    unsafe { fts_arima_free(fit) };
    unsafe { fts_arima_free(ptr::null_mut()) };

    let short = [1.0, 2.0];
    let mut fit = ptr::null_mut();
    let s = unsafe { fts_arima_fit(short.as_ptr(), 2, 4, 0, 1, &mut fit) };
    assert_eq!(s, FtsStatus::InsufficientData);
    assert!(fit.is_null());
    assert!(last_error().contains("insufficient"));
}

#[test]
fn garch_handle_roundtrip() {
    let r = gen_garch(&GarchParams::new(0.0, 0.05, 0.10, 0.85), 3000, 5).unwrap();
    let mut fit = ptr::null_mut();
    assert_eq!(unsafe { fts_garch_fit(r.as_ptr(), r.len(), &mut fit) }, FtsStatus::Ok);
    let mut p = FtsGarchParams::default();
    assert_eq!(unsafe { fts_garch_params(fit, &mut p) }, FtsStatus::Ok);
    assert!(p.alpha1 + p.beta1 < 1.0 && p.alpha0 > 0.0);
    let mut ll = 0.0;
    assert_eq!(unsafe { fts_garch_loglik(fit, &mut ll) }, FtsStatus::Ok);
    assert!(ll.is_finite());
    let mut v = [0.0; 3];
    assert_eq!(unsafe { fts_garch_forecast_variance(fit, 3, v.as_mut_ptr()) }, FtsStatus::Ok);
    assert!(v.iter().all(|x| *x > 0.0));
    assert_eq!(unsafe { fts_garch_forecast_variance(fit, 0, v.as_mut_ptr()) }, FtsStatus::InvalidInput);
    unsafe { fts_garch_free(fit) };

    let flat = [0.01; 50];
    let mut fit = ptr::null_mut();
    let s = unsafe { fts_garch_fit(flat.as_ptr(), flat.len(), &mut fit) };
    assert_eq!(s, FtsStatus::DegenerateVariance);
}

#[test]
fn benchmark_missing_config_is_io_error() {
    let path = CString::new("/nonexistent/config.json").unwrap();
    let mut json = ptr::null_mut();
    let s = unsafe { fts_run_benchmark_json(path.as_ptr(), &mut json) };
    assert_eq!(s, FtsStatus::Io);
    assert!(json.is_null());
    let s = unsafe { fts_run_benchmark_json(ptr::null(), &mut json) };
    assert_eq!(s, FtsStatus::NullPointer);
}

#[test]
fn benchmark_returns_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = ftsbench::synth::gen_text_fixture(120, 3).unwrap();
    let files = ftsbench::synth::write_fixture(&fixture, dir.path()).unwrap();
    let cfg = dir.path().join("config.json");
    let body = serde_json::json!({
        "prices": files.prices,
        "models": ["arima", "garch"],
        "arima": {"grid": {"p_max": 1, "d_max": 0, "q_max": 1}},
        "seed": 1,
        "out_dir": dir.path().join("out"),
        "timing": false,
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let mut json = ptr::null_mut();
    let s = unsafe { fts_run_benchmark_json(path.as_ptr(), &mut json) };
    assert_eq!(s, FtsStatus::Ok, "{}", last_error());
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { fts_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["models"].as_array().unwrap().len(), 2);
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ftsbench.h")).unwrap();
    for name in [
        "fts_version",
        "fts_last_error",
        "fts_rmse",
        "fts_compute_returns",
        "fts_arima_fit",
        "fts_arima_free",
        "fts_garch_fit",
        "fts_garch_free",
        "fts_run_benchmark_json",
        "fts_string_free",
        "typedef struct FtsArimaFit FtsArimaFit;",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"ftsbench.h\"\nint main(void) {\n  double o;\n  FtsArimaFit *f = 0;\n  \
         FtsStatus s = fts_rmse(0, 0, 0, &o);\n  fts_arima_free(f);\n  return s == FTS_STATUS_OK;\n}\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
}
