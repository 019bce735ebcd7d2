use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hjdefect_ffi::*;

#[test]
fn closed_forms_through_the_abi() {
    let mut v = f64::NAN;
    unsafe {
        assert_eq!(hj_analytic_hbar_1d(1.0, 2.0, &mut v), HjStatus::Ok);
        assert!((v - 2.0).abs() < 1e-6);
        assert_eq!(hj_analytic_ergodic_1d(0.0, 1.0, &mut v), HjStatus::Ok);
        assert!((v - 1.0).abs() < 1e-9);
        assert_eq!(hj_u_eps_flat(1.0, 0.1, 0.0, &mut v), HjStatus::Ok);
        assert!((v + 1.0).abs() < 1e-9);
        assert_eq!(hj_analytic_ergodic_1d(0.0, -1.0, &mut v), HjStatus::Precondition);
        assert!(!hj_last_error().is_null());
        assert_eq!(hj_analytic_hbar_1d(1.0, 2.0, ptr::null_mut()), HjStatus::NullPointer);
        assert!(CStr::from_ptr(hj_version()).to_str().unwrap().starts_with("0."));
    }
}

#[test]
fn spec_and_field_handles() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(hj_spec_new(1, HjKinetic::Norm, 0.0, 1.0, &mut spec), HjStatus::Ok);
        let mut e = 0.0;
        let radii = [2.0, 4.0, 8.0];
        assert_eq!(hj_ergodic_constant(spec, radii.as_ptr(), 3, 0.02, &mut e), HjStatus::Ok);
        assert!((e - 1.0).abs() < 2e-2);
        let mut field = ptr::null_mut();
        assert_eq!(hj_solve_eps(spec, 1.0, 0.05, 3.0, 0.0025, &mut field), HjStatus::Ok);
        let n = hj_field_len(field);
        assert_eq!(hj_field_dim(field), 1);
        let mut vals = vec![0.0; n];
        assert_eq!(hj_field_values(field, vals.as_mut_ptr(), n), HjStatus::Ok);
        assert_eq!(hj_field_values(field, vals.as_mut_ptr(), n - 1), HjStatus::Config);
        let mut u0 = 0.0;
        assert_eq!(hj_field_eval(field, [0.0].as_ptr(), &mut u0), HjStatus::Ok);
        assert!((u0 + 1.0).abs() < 0.05);
        let mut xy = [0.0; 2];
        assert_eq!(hj_field_coords(field, 0, xy.as_mut_ptr()), HjStatus::Ok);
        assert_eq!(xy[0], -3.0);
        assert_eq!(hj_field_eval(field, [5.0].as_ptr(), &mut u0), HjStatus::Domain);
        let coarse = hj_solve_eps(spec, 1.0, 0.05, 3.0, 0.05, &mut field);
        assert_eq!(coarse, HjStatus::Precondition);
        hj_field_free(field);
        hj_spec_free(spec);
        assert_eq!(hj_spec_new(3, HjKinetic::Norm, 0.0, 1.0, &mut spec), HjStatus::Config);
        assert_eq!(hj_effective_hamiltonian(ptr::null(), ptr::null(), 100, &mut e), HjStatus::NullPointer);
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = crate_dir.join("include");
    assert!(header_dir.join("hjdefect.h").exists());
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("hj_smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "hjdefect.h"
int main(void) {
    double v = 0.0;
    if (hj_analytic_hbar_1d(1.0, 2.0, &v) != HJ_STATUS_OK) return 1;
    HjSpec *spec = NULL;
    if (hj_spec_new(1, HJ_KINETIC_NORM, 0.0, 1.0, &spec) != HJ_STATUS_OK) return 2;
    hj_spec_free(spec);
    if (hj_spec_new(5, HJ_KINETIC_NORM, 0.0, 1.0, &spec) != HJ_STATUS_CONFIG) return 3;
    printf("%.6f %s\n", v, hj_last_error());
    return 0;
}
"#,
    )
    .unwrap();
    let obj = tmp.join("hj_smoke.o");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-c"])
        .arg("-I")
        .arg(&header_dir)
        .arg(&src)
        .arg("-o")
        .arg(&obj)
        .status()
        .expect("C compiler");
    assert!(status.success());
    // link against the static library when this profile produced one
    let lib = tmp.parent().unwrap().join(if cfg!(debug_assertions) { "debug" } else { "release" }).join("libhjdefect_ffi.a");
    if !lib.exists() {
        return;
    }
    let exe = tmp.join("hj_smoke");
    let status = Command::new("cc")
        .arg(&obj)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("2.000000 dimension must be 1 or 2"), "{text}");
}
