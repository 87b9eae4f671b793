use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use crgan_ffi::*;

fn last_error() -> String {
    let p = crgan_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn reject_matches_hand_case() {
    let v = [2.0, 1.0, 0.0];
    let w = [1.0, 1.0, 1.0];
    let mut out = [0.0; 3];
    let st = unsafe { crgan_reject(v.as_ptr(), w.as_ptr(), 3, out.as_mut_ptr()) };
    assert_eq!(st, CrganStatus::Ok);
    assert_eq!(out, [1.0, 0.0, -1.0]);
}

#[test]
fn zero_weight_is_numeric_error() {
    let v = [1.0, 2.0];
    let w = [0.0, 0.0];
    let mut out = [0.0; 2];
    let st = unsafe { crgan_reject(v.as_ptr(), w.as_ptr(), 2, out.as_mut_ptr()) };
    assert_eq!(st, CrganStatus::Numeric);
    assert!(last_error().contains("degenerate"), "{}", last_error());
}

#[test]
fn null_pointers_are_reported() {
    let mut out = [0.0; 2];
    let st = unsafe { crgan_reject(ptr::null(), [1.0, 0.0].as_ptr(), 2, out.as_mut_ptr()) };
    assert_eq!(st, CrganStatus::NullPointer);
    assert!(last_error().contains('v'));
    unsafe { crgan_cr_head_free(ptr::null_mut()) };
    unsafe { crgan_generator_free(ptr::null_mut()) };
}

#[test]
fn head_handle_scores_cascade() {
    // w1 = (1,0), w2 = (1,1): s1 = 3, v2 = (0,4), s2 = 4
    let weights = [1.0, 0.0, 1.0, 1.0];
    let mut head = ptr::null_mut();
    assert_eq!(
        unsafe { crgan_cr_head_new(weights.as_ptr(), 2, 2, &mut head) },
        CrganStatus::Ok
    );
    let mut n = 0usize;
    assert_eq!(unsafe { crgan_cr_head_num_scores(head, &mut n) }, CrganStatus::Ok);
    assert_eq!(n, 2);
    let features = [3.0, 4.0];
    let mut scores = [0.0; 2];
    let st = unsafe { crgan_cr_head_scores(head, features.as_ptr(), 1, scores.as_mut_ptr()) };
    assert_eq!(st, CrganStatus::Ok);
    assert_eq!(scores, [3.0, 4.0]);
    unsafe { crgan_cr_head_free(head) };
}

#[test]
fn frechet_and_mode_report() {
    // two points per set, identical spread, means 1 apart on x
    let a = [0.0, 2.0, 0.0, 0.0];
    let b = [1.0, 3.0, 0.0, 0.0];
    let mut fd = -1.0;
    assert_eq!(
        unsafe { crgan_frechet_distance(a.as_ptr(), 2, b.as_ptr(), 2, 2, &mut fd) },
        CrganStatus::Ok
    );
    assert!((fd - 1.0).abs() < 1e-12);

    let mut short = 0.0;
    let st = unsafe { crgan_frechet_distance(a.as_ptr(), 1, b.as_ptr(), 1, 2, &mut short) };
    assert_eq!(st, CrganStatus::Domain);

    let pts = [2.0; 50].iter().chain([0.0; 50].iter()).copied().collect::<Vec<_>>();
    let mut report = CrganModeReport::default();
    assert_eq!(
        unsafe { crgan_mode_report_ring8(pts.as_ptr(), 50, &mut report) },
        CrganStatus::Ok
    );
    assert_eq!(report.modes_covered, 1);
    assert_eq!(report.high_quality_fraction, 1.0);
}

#[test]
fn bad_config_is_config_error() {
    let text = CString::new("n_heads = -3").unwrap();
    let mut fd = 0.0;
    let mut report = CrganModeReport::default();
    let st = unsafe { crgan_train(text.as_ptr(), &mut fd, &mut report) };
    assert_eq!(st, CrganStatus::Config);
    assert!(last_error().contains("n_heads"));
}

#[test]
fn train_then_load_and_sample() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "task = gmm8_conditional\nn_heads = 2\ng_widths = 8\nd_widths = 8\nbatch_size = 8\n\
         total_g_updates = 4\neval_every = 2\neval_samples = 64\nout_dir = {}\n",
        dir.path().display()
    );
    let text = CString::new(text).unwrap();
    let mut fd = -1.0;
    let mut report = CrganModeReport::default();
    assert_eq!(
        unsafe { crgan_train(text.as_ptr(), &mut fd, &mut report) },
        CrganStatus::Ok
    );
    assert!(fd >= 0.0);
    assert!(report.modes_covered <= 8);

    let path = CString::new(dir.path().join("checkpoint.bin").to_str().unwrap()).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { crgan_generator_load(path.as_ptr(), &mut g) }, CrganStatus::Ok);
    let mut cond = 0;
    assert_eq!(unsafe { crgan_generator_is_conditional(g, &mut cond) }, CrganStatus::Ok);
    assert_eq!(cond, 1);

    let mut a = vec![0.0; 20];
    let mut b = vec![0.0; 20];
    let mut labels = vec![usize::MAX; 10];
    unsafe {
        assert_eq!(
            crgan_generator_sample(g, 10, 7, a.as_mut_ptr(), labels.as_mut_ptr()),
            CrganStatus::Ok
        );
        assert_eq!(
            crgan_generator_sample(g, 10, 7, b.as_mut_ptr(), ptr::null_mut()),
            CrganStatus::Ok
        );
        crgan_generator_free(g);
    }
    assert_eq!(a, b);
    assert!(labels.iter().all(|&l| l < 8));
}

#[test]
fn missing_checkpoint_is_io_error() {
    let path = CString::new("/nonexistent/dir/checkpoint.bin").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { crgan_generator_load(path.as_ptr(), &mut g) }, CrganStatus::Io);
    assert!(g.is_null());
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(crgan_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> Option<PathBuf> {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().ok()?;
    Some(exe.parent()?.parent()?.to_path_buf())
}

#[test]
fn c_program_links_against_static_library() {
    let Some(lib_dir) = target_dir() else { return };
    if !lib_dir.join("libcrgan_ffi.a").exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include "crgan.h"
#include <stdio.h>
int main(void) {
    double v[3] = {2, 1, 0}, w[3] = {1, 1, 1}, out[3];
    if (crgan_reject(v, w, 3, out) != CRGAN_STATUS_OK) return 1;
    if (out[0] != 1.0 || out[1] != 0.0 || out[2] != -1.0) return 2;
    double zero[2] = {0, 0};
    if (crgan_reject(v, zero, 2, out) != CRGAN_STATUS_NUMERIC) return 3;
    if (crgan_last_error_message() == NULL) return 4;
    printf("ok %s\n", crgan_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = work.path().join("smoke");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(lib_dir.join("libcrgan_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
