use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cevpolar_ffi::*;

const MODEL: &str = r#"{"polar": {
    "radial": {"kind": "rayleigh", "params": {}},
    "angular": {"kind": "uniform"},
    "curve": {"kind": "elliptical", "rho": 0.6}}}"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cev_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn model() -> *mut CevModel {
    let json = CString::new(MODEL).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cev_model_from_json(json.as_ptr(), &mut m) }, CevStatus::Ok);
    assert!(!m.is_null());
    m
}

fn normal_cdf(y: f64) -> f64 {
    0.5 * libm::erfc(-y / std::f64::consts::SQRT_2)
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(cev_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn gaussian_limit_law() {
    let mut law = ptr::null_mut();
    unsafe {
        assert_eq!(cev_limit_law_new(2.0, 1.0, &mut law), CevStatus::Ok);
        for y in [-3.0, -1.0, 0.0, 0.5, 2.5] {
            let mut f = 0.0;
            assert_eq!(cev_limit_law_cdf(law, y, &mut f), CevStatus::Ok);
            assert!((f - normal_cdf(y)).abs() < 1e-10, "{y}: {f}");
            let mut q = 0.0;
            assert_eq!(cev_limit_law_quantile(law, f, &mut q), CevStatus::Ok);
            assert!((q - y).abs() < 1e-8);
        }
        let mut p = 0.0;
        assert_eq!(cev_limit_law_pdf(law, 0.0, &mut p), CevStatus::Ok);
        assert!((p - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        cev_limit_law_free(law);
    }
}

#[test]
fn model_round_trip() {
    let m = model();
    unsafe {
        let mut law = ptr::null_mut();
        assert_eq!(cev_model_limit_law(m, &mut law), CevStatus::Ok);
        let (mut eta, mut zeta) = (0.0, 0.0);
        assert_eq!(cev_limit_law_params(law, &mut eta, &mut zeta), CevStatus::Ok);
        assert_eq!((eta, zeta), (2.0, 1.0));
        cev_limit_law_free(law);

        let t = 20.0;
        let mut frame = CevFrame::default();
        assert_eq!(cev_model_frame(m, t, &mut frame), CevStatus::Ok);
        assert_eq!(frame.t, t);
        assert!((frame.psi_t - 1.0 / t).abs() < 1e-12);

        let mut c = 0.0;
        assert_eq!(
            cev_model_conditional_cdf(m, t, f64::INFINITY, 0.0, &mut c),
            CevStatus::Ok
        );
        assert!((c - 0.5).abs() < 0.02, "{c}");

        let mut s = 0.0;
        assert_eq!(cev_model_survival_x(m, 3.0, &mut s), CevStatus::Ok);
        assert!((s - 0.5 * libm::erfc(3.0 / std::f64::consts::SQRT_2)).abs() < 1e-9);

        let mut sample = ptr::null_mut();
        assert_eq!(
            cev_model_sample_conditional(m, 4.0, 1000, 9, &mut sample),
            CevStatus::Ok
        );
        let n = cev_sample_len(sample);
        assert!(n > 0 && n <= 1000);
        assert!(cev_sample_effective_size(sample) > 1.0);
        let (mut x, mut y, mut w) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        assert_eq!(
            cev_sample_copy(sample, x.as_mut_ptr(), y.as_mut_ptr(), w.as_mut_ptr(), n),
            CevStatus::Ok
        );
        assert!(x.iter().all(|&v| v > 4.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(y.iter().all(|v| v.is_finite()));
        assert_eq!(
            cev_sample_copy(sample, x.as_mut_ptr(), y.as_mut_ptr(), w.as_mut_ptr(), n - 1),
            CevStatus::InvalidArgument
        );
        cev_sample_free(sample);
        cev_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut law = ptr::null_mut();
        assert_eq!(cev_limit_law_new(0.5, 1.0, &mut law), CevStatus::InvalidArgument);
        assert!(law.is_null());
        assert!(last_error().contains("eta"));

        assert_eq!(cev_limit_law_new(2.0, 1.0, ptr::null_mut()), CevStatus::NullPointer);
        assert_eq!(cev_limit_law_cdf(ptr::null(), 0.0, &mut 0.0), CevStatus::NullPointer);
        assert_eq!(
            cev_model_from_json(ptr::null(), &mut ptr::null_mut()),
            CevStatus::NullPointer
        );

        let bad = CString::new(r#"{"polar": {"oops": 1}}"#).unwrap();
        assert_eq!(
            cev_model_from_json(bad.as_ptr(), &mut ptr::null_mut()),
            CevStatus::Config
        );
        let mixture = CString::new(r#"{"mixture": {"p": 0.4, "rho": 0.8, "tau_mix": -0.4}}"#).unwrap();
        assert_eq!(
            cev_model_from_json(mixture.as_ptr(), &mut ptr::null_mut()),
            CevStatus::Config
        );

        let m = model();
        let mut sample = ptr::null_mut();
        assert_eq!(
            cev_model_sample_conditional(m, 1e200, 5, 1, &mut sample),
            CevStatus::Numeric
        );
        assert!(sample.is_null());
        assert_eq!(
            cev_model_frame(m, -1.0, &mut CevFrame::default()),
            CevStatus::InvalidArgument
        );
        cev_model_free(m);

        assert_eq!(cev_sample_len(ptr::null()), 0);
        assert!(cev_sample_effective_size(ptr::null()).is_nan());
        cev_model_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../include/cevpolar.h");
    assert!(header.exists());
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "cev_model_from_json",
        "cev_limit_law_cdf",
        "cev_sample_copy",
        "CEV_STATUS_NUMERIC",
    ] {
        assert!(text.contains(f), "{f}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler, skipping syntax check");
        return;
    };
    assert!(status.success());
}

const C_MAIN: &str = r#"
#include <math.h>
#include <stdio.h>
#include "cevpolar.h"

int main(void) {
    CevLimitLaw *law = NULL;
    if (cev_limit_law_new(2.0, 1.0, &law) != CEV_STATUS_OK) return 1;
    double f = 0.0;
    if (cev_limit_law_cdf(law, 0.0, &f) != CEV_STATUS_OK) return 2;
    cev_limit_law_free(law);
    if (fabs(f - 0.5) > 1e-12) return 3;
    if (cev_limit_law_new(0.5, 1.0, &law) != CEV_STATUS_INVALID_ARGUMENT) return 4;
    printf("%s|%s\n", cev_version(), cev_last_error());
    return 0;
}
"#;

#[test]
fn links_from_c() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libcevpolar_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("static library or C compiler unavailable, skipping");
        return;
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_link");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    std::fs::write(&src, C_MAIN).unwrap();
    let bin = dir.join("main");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let (version, err) = text.trim().split_once('|').unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
    assert!(err.contains("eta"));
}
