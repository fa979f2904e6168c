use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use lumpkit_ffi::*;

const PERTURBED_POINTS: [f64; 18] = [1., 0., 0., 0., 1., 0., 0., 0., 1., 1., 5., 2., 3., 3., 2., 5., 2., 3.];

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/models")
}

fn load(name: &str) -> *mut LkModel {
    let path = CString::new(models().join(name).to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { lk_model_load(path.as_ptr(), &mut m) }, LkStatus::LkOk);
    m
}

fn last_error() -> String {
    let p = lk_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn perturbed_fixed() -> (*mut LkModel, *mut LkBasis) {
    let m = load("perturbed.ode");
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { lk_basis_from_points(m, PERTURBED_POINTS.as_ptr(), 6, &mut b) }, LkStatus::LkOk);
    (m, b)
}

#[test]
fn drift_and_jacobian() {
    let m = load("perturbed.ode");
    unsafe {
        assert_eq!(lk_model_dim(m), 3);
        assert_eq!(lk_model_observable_count(m), 1);
        let x = [1.0, 1.0, 1.0];
        let mut f = [0.0; 3];
        assert_eq!(lk_model_eval_drift(m, x.as_ptr(), 3, f.as_mut_ptr()), LkStatus::LkOk);
        let expected = [(1.0 + 4.05 + 4.0) / 2.0, -2.0 / 4.0, -2.0 / 4.0];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        let mut j = [0.0; 9];
        assert_eq!(lk_model_jacobian(m, x.as_ptr(), 3, j.as_mut_ptr()), LkStatus::LkOk);
        // d f1 / d x1 = -2 x1 (x2^2 + 4.05 x2 x3 + 4 x3^2) / (x1^2 + 1)^2
        assert!((j[0] + 2.0 * 9.05 / 4.0).abs() < 1e-14);
        assert_eq!(lk_model_eval_drift(m, x.as_ptr(), 2, f.as_mut_ptr()), LkStatus::LkInvalidArgument);
        lk_model_free(m);
    }
}

#[test]
fn lump_fixed_basis() {
    let (m, b) = perturbed_fixed();
    unsafe {
        assert_eq!(lk_basis_len(b), 6);
        let mut eps_max = 0.0;
        assert_eq!(lk_epsilon_max(m, b, &mut eps_max), LkStatus::LkOk);
        assert!((eps_max - 20.25877896123061).abs() < 1e-9);

        let mut l = ptr::null_mut();
        assert_eq!(lk_lump(m, b, 0.2, &mut l), LkStatus::LkOk);
        assert_eq!((lk_lumping_size(l), lk_lumping_cols(l)), (2, 3));
        assert_eq!(lk_lumping_epsilon(l), 0.2);
        let mut rows = [0.0; 6];
        assert_eq!(lk_lumping_copy_rows(l, rows.as_mut_ptr(), 6), LkStatus::LkOk);
        let expected = [1.0, 0.0, 0.0, 0.0, 0.443, 0.897];
        for (a, e) in rows.iter().zip(expected) {
            assert!((a.abs() - e).abs() < 1e-3, "{rows:?}");
        }
        assert_eq!(lk_lumping_copy_rows(l, rows.as_mut_ptr(), 5), LkStatus::LkInvalidArgument);

        let mut d = f64::NAN;
        let x = [1.0, 1.0, 1.0];
        assert_eq!(lk_deviation(m, l, x.as_ptr(), 3, &mut d), LkStatus::LkOk);
        assert!(d.is_finite() && d >= 0.0);

        lk_lumping_free(l);
        lk_basis_free(b);
        lk_model_free(m);
    }
}

#[test]
fn find_epsilon_cutoff_two() {
    let (m, b) = perturbed_fixed();
    unsafe {
        let mut l = ptr::null_mut();
        let (mut eps, mut iters) = (0.0, 0usize);
        assert_eq!(lk_find_epsilon(m, b, 2, 1e-6, &mut l, &mut eps, &mut iters), LkStatus::LkOk);
        assert_eq!(lk_lumping_size(l), 2);
        assert_eq!(iters, 26);
        assert!((0.089109537881493..=0.089109537881493 + 1e-6).contains(&eps));
        lk_lumping_free(l);

        // optional outputs may be null
        assert_eq!(lk_find_epsilon(m, b, 3, 1e-6, &mut l, ptr::null_mut(), ptr::null_mut()), LkStatus::LkOk);
        assert_eq!(lk_lumping_epsilon(l), 0.0);
        lk_lumping_free(l);
        lk_basis_free(b);
        lk_model_free(m);
    }
}

#[test]
fn sampled_basis_is_seeded() {
    let m = load("lumpable.ode");
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(lk_basis_sample(m, 7, 3, &mut a), LkStatus::LkOk);
        assert_eq!(lk_basis_sample(m, 7, 3, &mut b), LkStatus::LkOk);
        assert_eq!(lk_basis_len(a), lk_basis_len(b));
        let mut l = ptr::null_mut();
        assert_eq!(lk_lump(m, a, 0.0, &mut l), LkStatus::LkOk);
        assert_eq!(lk_lumping_size(l), 2);
        lk_lumping_free(l);
        lk_basis_free(a);
        lk_basis_free(b);
        lk_model_free(m);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut m = ptr::null_mut();
        let bad = CString::new("model m\nvar x, y\neq x = y +\n").unwrap();
        assert_eq!(lk_model_parse(bad.as_ptr(), &mut m), LkStatus::LkParseError);
        assert!(m.is_null());
        assert!(last_error().contains("line 3"), "{}", last_error());

        let missing = CString::new("/nonexistent/model.ode").unwrap();
        assert_eq!(lk_model_load(missing.as_ptr(), &mut m), LkStatus::LkIoError);

        assert_eq!(lk_model_parse(ptr::null(), &mut m), LkStatus::LkNullPointer);
        assert!(last_error().contains("text"));

        let m = load("perturbed.ode");
        let mut b = ptr::null_mut();
        assert_eq!(lk_basis_sample(m, 0, 0, &mut b), LkStatus::LkInvalidArgument);
        assert_eq!(lk_basis_sample(m, 0, 3, &mut b), LkStatus::LkOk);
        let mut l = ptr::null_mut();
        assert_eq!(lk_lump(m, b, -1.0, &mut l), LkStatus::LkInvalidArgument);
        assert_eq!(lk_lump(m, b, f64::NAN, &mut l), LkStatus::LkInvalidArgument);
        assert_eq!(lk_lump(m, ptr::null(), 0.1, &mut l), LkStatus::LkNullPointer);
        assert!(l.is_null());

        // a successful call clears the message
        assert_eq!(lk_lump(m, b, 0.1, &mut l), LkStatus::LkOk);
        assert!(lk_last_error_message().is_null());

        assert_eq!(lk_model_dim(ptr::null()), 0);
        assert!(lk_lumping_epsilon(ptr::null()).is_nan());
        lk_model_free(ptr::null_mut());
        lk_lumping_free(l);
        lk_basis_free(b);
        lk_model_free(m);
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(lk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/lumpkit.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 20);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for t in ["typedef struct LkModel LkModel;", "LK_NUMERIC_ERROR = 2", "LK_PANIC = 6"] {
        assert!(header.contains(t), "{t}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "lumpkit.h"

int main(int argc, char **argv) {
    LkModel *m = NULL;
    LkBasis *b = NULL;
    LkLumping *l = NULL;
    if (argc < 2 || lk_model_load(argv[1], &m) != LK_OK) return 10;
    if (lk_basis_sample(m, 1, 3, &b) != LK_OK) return 11;
    if (lk_lump(m, b, 0.0, &l) != LK_OK) return 12;
    size_t k = lk_lumping_size(l), n = lk_lumping_cols(l);
    double rows[64];
    if (k * n > 64 || lk_lumping_copy_rows(l, rows, k * n) != LK_OK) return 13;
    lk_lumping_free(l);
    if (lk_lump(m, NULL, 0.0, &l) != LK_NULL_POINTER || l != NULL) return 14;
    printf("%zu %zu %s\n", k, n, lk_last_error_message());
    lk_basis_free(b);
    lk_model_free(m);
    return 0;
}
"#;

/// Compiles a C client against the generated header and the shared library.
#[test]
fn c_client_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; C client not built");
        return;
    };
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("liblumpkit_ffi.so");
    assert!(lib.exists(), "{} not built", lib.display());

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let src = dir.join("client.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.join("client");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&profile_dir)
        .arg("-llumpkit_ffi")
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).arg(models().join("lumpable.ode")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("2 3 basis is null"), "{stdout}");
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
